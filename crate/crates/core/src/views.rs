//! Simulated depth camera: pinhole rendering by ray casting, back-projection
//! and 8-view panoramas.
//!
//! Depth values are ranges along each pixel's ray (not `z` depth). Misses
//! are stored as [`INVALID_DEPTH`].

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvh::Bvh;
use crate::geometry::{PointCloud, RigidTransform};
use crate::{Error, Point3, Result, TriangleMesh, Vector3};

pub const INVALID_DEPTH: f64 = 0.0;
pub const PANORAMA_VIEWS: usize = 8;

/// Pinhole camera with square pixels. `pose` maps camera coordinates
/// (`+x` right, `+y` down, `+z` forward) into the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub pose: RigidTransform,
    pub width: u32,
    pub height: u32,
    pub vertical_fov_deg: f64,
    pub max_range: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            pose: RigidTransform::identity(),
            width: 320,
            height: 240,
            vertical_fov_deg: 60.0,
            max_range: 4.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("camera width and height must be at least 1".into()));
        }
        if !(self.vertical_fov_deg > 0.0 && self.vertical_fov_deg < 180.0) {
            return Err(Error::InvalidArgument(format!(
                "vertical field of view {} must lie in (0, 180)",
                self.vertical_fov_deg
            )));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::InvalidArgument("max_range must be positive".into()));
        }
        Ok(())
    }

    pub fn with_pose(mut self, pose: RigidTransform) -> Self {
        self.pose = pose;
        self
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        (self.height as f64 / 2.0) / (self.vertical_fov_deg.to_radians() / 2.0).tan()
    }

    /// Principal point in pixel-index coordinates; for odd sizes it falls
    /// on the center of the middle pixel.
    pub fn principal_point(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Unit ray direction through the center of pixel `(u, v)`, in the camera frame.
    pub fn pixel_direction(&self, u: u32, v: u32) -> Vector3 {
        let f = self.focal();
        let (cx, cy) = self.principal_point();
        Vector3::new((u as f64 - cx) / f, (v as f64 - cy) / f, 1.0).normalize()
    }

    /// Optical axis in the world frame.
    pub fn forward(&self) -> Vector3 {
        self.pose.transform_vector(&Vector3::z())
    }

    pub fn position(&self) -> Point3 {
        self.pose.origin()
    }

    /// Projects a camera-frame point to continuous pixel coordinates.
    pub fn project(&self, p: &Point3) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        let f = self.focal();
        let (cx, cy) = self.principal_point();
        Some((cx + f * p.x / p.z, cy + f * p.y / p.z))
    }
}

/// Camera-to-world pose at `eye` whose optical axis points at `target`,
/// with image "down" aligned to world −z where possible.
pub fn look_at(eye: &Point3, target: &Point3) -> Result<RigidTransform> {
    let forward = (target - eye)
        .try_normalize(1e-12)
        .ok_or_else(|| Error::DegenerateInput("look_at eye and target coincide".into()))?;
    let up = if forward.cross(&Vector3::z()).norm() > 1e-9 {
        Vector3::z()
    } else {
        Vector3::y()
    };
    let right = forward.cross(&up).normalize();
    let down = forward.cross(&right);
    let m = Matrix3::from_columns(&[right, down, forward]);
    Ok(RigidTransform::from_matrix_and_translation(&m, eye.coords))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub camera: CameraModel,
    /// Row-major, `width × height`, meters along each ray.
    pub depth: Vec<f64>,
}

impl DepthImage {
    pub fn new(camera: CameraModel, depth: Vec<f64>) -> Result<Self> {
        camera.validate()?;
        if depth.len() != camera.pixel_count() {
            return Err(Error::InvalidArgument(format!(
                "{} depth values for a {}x{} image",
                depth.len(),
                camera.width,
                camera.height
            )));
        }
        if let Some(i) = depth
            .iter()
            .position(|&d| d != INVALID_DEPTH && !(d > 0.0 && d <= camera.max_range))
        {
            return Err(Error::InvalidArgument(format!(
                "depth {} at pixel {i} is outside (0, {}]",
                depth[i], camera.max_range
            )));
        }
        Ok(Self { camera, depth })
    }

    pub fn invalid(camera: CameraModel) -> Self {
        Self {
            depth: vec![INVALID_DEPTH; camera.pixel_count()],
            camera,
        }
    }

    pub fn get(&self, u: u32, v: u32) -> Option<f64> {
        let d = self.depth[v as usize * self.camera.width as usize + u as usize];
        (d != INVALID_DEPTH).then_some(d)
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|&&d| d != INVALID_DEPTH).count()
    }

    /// Same pixels under a different camera pose.
    pub fn reposed(&self, pose: RigidTransform) -> DepthImage {
        DepthImage {
            camera: self.camera.with_pose(pose),
            depth: self.depth.clone(),
        }
    }
}

/// A mesh with its acceleration structure, ready for repeated rendering.
#[derive(Debug, Clone)]
pub struct Scene {
    bvh: Bvh,
}

impl Scene {
    pub fn new(mesh: &TriangleMesh) -> Self {
        Self { bvh: Bvh::new(mesh) }
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// Nearest hit per pixel within `max_range`. Rows render in parallel;
    /// each pixel is independent so the output does not depend on scheduling.
    pub fn render(&self, camera: &CameraModel) -> DepthImage {
        let (w, h) = (camera.width, camera.height);
        let origin = camera.position();
        let depth: Vec<f64> = (0..h)
            .into_par_iter()
            .flat_map_iter(|v| {
                (0..w).map(move |u| {
                    let dir = camera.pose.transform_vector(&camera.pixel_direction(u, v));
                    self.bvh
                        .intersect(&origin, &dir, 0.0, camera.max_range)
                        .map_or(INVALID_DEPTH, |hit| hit.t)
                })
            })
            .collect();
        DepthImage {
            camera: *camera,
            depth,
        }
    }
}

pub fn render_depth(mesh: &TriangleMesh, camera: &CameraModel) -> DepthImage {
    Scene::new(mesh).render(camera)
}

/// One point per valid pixel, in the camera frame.
pub fn depth_to_cloud(img: &DepthImage) -> PointCloud {
    let cam = &img.camera;
    let mut points = Vec::with_capacity(img.valid_count());
    for v in 0..cam.height {
        for u in 0..cam.width {
            if let Some(d) = img.get(u, v) {
                points.push(Point3::from(cam.pixel_direction(u, v) * d));
            }
        }
    }
    PointCloud::new(points).expect("finite depths give finite points")
}

/// Eight renders from `position` at yaw 0°, 45°, …, 315° about world `z`,
/// each applying the yaw on top of the template's orientation.
pub fn capture_panorama(scene: &TriangleMesh, position: &Point3, template: &CameraModel) -> Vec<DepthImage> {
    let prepared = Scene::new(scene);
    panorama_poses(position, template)
        .into_iter()
        .map(|pose| prepared.render(&template.with_pose(pose)))
        .collect()
}

pub fn panorama_poses(position: &Point3, template: &CameraModel) -> Vec<RigidTransform> {
    (0..PANORAMA_VIEWS)
        .map(|k| {
            let yaw = RigidTransform::from_yaw((k as f64 * 45.0).to_radians());
            RigidTransform::new(yaw.rotation * template.pose.rotation, position.coords)
        })
        .collect()
}

/// Camera orientation looking horizontally along world `+x`.
pub fn level_orientation() -> RigidTransform {
    look_at(&Point3::origin(), &Point3::new(1.0, 0.0, 0.0)).expect("distinct points")
}

/// Writes a 16-bit grayscale PNG of depth in millimeters (0 = invalid).
pub fn write_depth_png(img: &DepthImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let pixels: Vec<u16> = img
        .depth
        .iter()
        .map(|&d| if d == INVALID_DEPTH { 0 } else { (d * 1000.0).round().clamp(1.0, 65535.0) as u16 })
        .collect();
    let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(img.camera.width, img.camera.height, pixels)
        .expect("buffer size matches camera");
    buf.save(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Reads a 16-bit millimeter PNG back into a depth image for `camera`.
pub fn read_depth_png(path: impl AsRef<Path>, camera: CameraModel) -> Result<DepthImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let luma = img.into_luma16();
    if luma.width() != camera.width || luma.height() != camera.height {
        return Err(Error::InvalidArgument(format!(
            "PNG is {}x{}, camera is {}x{}",
            luma.width(),
            luma.height(),
            camera.width,
            camera.height
        )));
    }
    let depth = luma
        .into_raw()
        .into_iter()
        .map(|mm| if mm == 0 { INVALID_DEPTH } else { (mm as f64 / 1000.0).min(camera.max_range) })
        .collect();
    DepthImage::new(camera, depth)
}

#[derive(Serialize, Deserialize)]
struct DepthSidecar {
    camera: CameraModel,
    format: String,
    invalid_value: f32,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes little-endian `f32` depth (row-major) to `path` and the camera
/// model to a `.json` sidecar next to it.
pub fn write_depth_raw(img: &DepthImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(img.depth.len() * 4);
    for &d in &img.depth {
        bytes.extend_from_slice(&(d as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = DepthSidecar {
        camera: img.camera,
        format: "f32le row-major range-along-ray meters".into(),
        invalid_value: INVALID_DEPTH as f32,
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("serializable");
    let sp = sidecar_path(path);
    fs::write(&sp, json).map_err(|e| Error::io(sp, e))
}

pub fn read_depth_raw(path: impl AsRef<Path>) -> Result<DepthImage> {
    let path = path.as_ref();
    let sp = sidecar_path(path);
    let json = fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?;
    let sidecar: DepthSidecar = serde_json::from_str(&json).map_err(|e| Error::Parse {
        path: sp.clone(),
        location: format!("line {}", e.line()),
        message: e.to_string(),
    })?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = sidecar.camera.pixel_count() * 4;
    if bytes.len() != expected {
        return Err(Error::parse_offset(path, bytes.len(), format!("expected {expected} bytes of depth")));
    }
    let depth = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .map(|d| if d == sidecar.invalid_value as f64 { INVALID_DEPTH } else { d.min(sidecar.camera.max_range) })
        .collect();
    DepthImage::new(sidecar.camera, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn odd_camera() -> CameraModel {
        CameraModel {
            width: 33,
            height: 25,
            ..Default::default()
        }
    }

    #[test]
    fn empty_frustum_is_all_invalid() {
        let mesh = shapes::cuboid(Vector3::repeat(0.1)).translated(&Vector3::new(0.0, 0.0, -2.0));
        let img = render_depth(&mesh, &odd_camera());
        assert_eq!(img.valid_count(), 0);
        assert!(depth_to_cloud(&img).is_empty());
    }

    #[test]
    fn axial_triangle_at_one_meter() {
        let tri = TriangleMesh::new(
            vec![Point3::new(-0.5, -0.5, 1.0), Point3::new(0.5, -0.5, 1.0), Point3::new(0.0, 0.5, 1.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let cam = odd_camera();
        let img = render_depth(&tri, &cam);
        let d = img.get(16, 12).unwrap();
        assert!((d - 1.0).abs() < 1e-6);
        let cloud = depth_to_cloud(&DepthImage::new(cam, {
            let mut v = vec![INVALID_DEPTH; cam.pixel_count()];
            v[12 * 33 + 16] = d;
            v
        }).unwrap());
        assert!((cloud.points()[0] - Point3::new(0.0, 0.0, 1.0)).norm() < 1e-6);
    }

    #[test]
    fn sphere_center_depth_matches_analytic() {
        let sphere = shapes::uv_sphere(0.5, 256, 512).translated(&Vector3::new(0.0, 0.0, 2.0));
        let img = render_depth(&sphere, &odd_camera());
        // The ray hits the sphere pole region, where tessellation error is tiny.
        assert!((img.get(16, 12).unwrap() - 1.5).abs() < 1e-4);
    }

    #[test]
    fn plane_round_trip_lies_on_plane() {
        let wall = shapes::cuboid(Vector3::new(4.0, 4.0, 0.01)).translated(&Vector3::new(0.0, 0.0, 1.5));
        let cam = CameraModel::default();
        let cloud = depth_to_cloud(&render_depth(&wall, &cam));
        assert_eq!(cloud.len(), cam.pixel_count());
        for p in cloud.points() {
            assert!((p.z - 1.495).abs() < 1e-6);
        }
    }

    #[test]
    fn render_is_invariant_to_triangle_order_and_rigid_motion() {
        let mesh = shapes::torus(0.2, 0.07, 32, 16).translated(&Vector3::new(0.0, 0.0, 1.0));
        let cam = odd_camera();
        let base = render_depth(&mesh, &cam);
        let mut faces = mesh.faces().to_vec();
        faces.reverse();
        let shuffled = TriangleMesh::new(mesh.vertices().to_vec(), faces).unwrap();
        assert_eq!(render_depth(&shuffled, &cam).depth, base.depth);

        let motion = RigidTransform::new(
            nalgebra::UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1),
            Vector3::new(0.4, -1.0, 2.0),
        );
        let moved = render_depth(&mesh.transformed(&motion), &cam.with_pose(motion.compose(&cam.pose)));
        for (a, b) in base.depth.iter().zip(&moved.depth) {
            if *a == INVALID_DEPTH || *b == INVALID_DEPTH {
                // Grazing rays may flip between hit and miss under rounding.
                continue;
            }
            assert!((a - b).abs() < 1e-6);
        }
        let flips = base.depth.iter().zip(&moved.depth).filter(|(a, b)| (**a == INVALID_DEPTH) != (**b == INVALID_DEPTH)).count();
        assert!(flips <= 2);
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let eye = Point3::new(1.0, 2.0, 1.2);
        let target = Point3::new(0.3, 0.1, 0.7);
        let pose = look_at(&eye, &target).unwrap();
        let fwd = pose.transform_vector(&Vector3::z());
        assert!((fwd - (target - eye).normalize()).norm() < 1e-12);
        // Image down has a non-positive world z component.
        assert!(pose.transform_vector(&Vector3::y()).z <= 0.0);
        let straight_down = look_at(&Point3::new(0.0, 0.0, 1.0), &Point3::origin()).unwrap();
        assert!((straight_down.transform_vector(&Vector3::z()) + Vector3::z()).norm() < 1e-12);
    }

    #[test]
    fn panorama_yaws_and_symmetry() {
        let room = shapes::cylinder(2.0, 2.5, 64);
        let template = CameraModel {
            width: 41,
            height: 31,
            pose: level_orientation(),
            ..Default::default()
        };
        let poses = panorama_poses(&Point3::origin(), &template);
        for (k, pose) in poses.iter().enumerate() {
            let fwd = pose.transform_vector(&Vector3::z());
            let want = (45.0 * k as f64).to_radians();
            assert!((fwd - Vector3::new(want.cos(), want.sin(), 0.0)).norm() < 1e-9);
        }
        let images = capture_panorama(&room, &Point3::origin(), &template);
        assert_eq!(images.len(), 8);
        for img in &images[1..] {
            for (a, b) in images[0].depth.iter().zip(&img.depth) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn panorama_clouds_lie_on_scene_surface() {
        let room = shapes::cuboid(Vector3::new(3.0, 4.0, 2.5));
        let template = CameraModel {
            width: 64,
            height: 48,
            pose: level_orientation(),
            ..Default::default()
        };
        let pos = Point3::new(0.3, -0.2, 0.1);
        let bvh = Bvh::new(&room);
        for img in capture_panorama(&room, &pos, &template) {
            let world = crate::transform_cloud(&depth_to_cloud(&img), &img.camera.pose);
            for p in world.points() {
                // 1 voxel of a 40³ grid over a 1 m object would be 2.5 cm; we are far tighter.
                assert!(bvh.closest_point(p).unwrap().distance < 1e-4);
            }
        }
    }

    #[test]
    fn depth_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::uv_sphere(0.3, 32, 64).translated(&Vector3::new(0.0, 0.0, 1.0));
        let img = render_depth(&mesh, &odd_camera());
        let raw = dir.path().join("d.bin");
        write_depth_raw(&img, &raw).unwrap();
        let back = read_depth_raw(&raw).unwrap();
        assert_eq!(back.camera, img.camera);
        for (a, b) in img.depth.iter().zip(&back.depth) {
            assert!((a - b).abs() < 1e-6);
        }
        let png = dir.path().join("d.png");
        write_depth_png(&img, &png).unwrap();
        let back = read_depth_png(&png, img.camera).unwrap();
        for (a, b) in img.depth.iter().zip(&back.depth) {
            assert!((a - b).abs() <= 0.0005 + 1e-12);
        }
    }
}
