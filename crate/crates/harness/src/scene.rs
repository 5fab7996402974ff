//! Tabletop scenes, viewpoint sampling and the per-trial seed scheme.

use std::f64::consts::{PI, TAU};

use nbv_core::{shapes, Point3, Result, RigidTransform, TriangleMesh, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smallest bounding-box extent every object is scaled to, meters.
pub const GRIP_WIDTH: f64 = 0.1;
/// Side of the square table patch, meters.
pub const TABLE_SIZE: f64 = 1.6;
/// Steepest first/random view, degrees above the horizon. Steeper views put
/// the object inside the segmentation band's inner radius.
pub const MAX_ELEVATION_DEG: f64 = 50.0;

/// Independent random streams drawn for each (mesh, pose) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scene = 1,
    FirstView = 2,
    RandomView = 3,
    Ransac = 4,
    Hausdorff = 5,
    Noise = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `stream` of trial (mesh, pose): splitmix64 chained over
/// master, mesh index, pose index, stream id. Independent of scenario, so
/// every scenario of a pair sees the same scene and first view.
pub fn trial_seed(master: u64, mesh: usize, pose: usize, stream: Stream) -> u64 {
    [mesh as u64, pose as u64, stream as u64]
        .into_iter()
        .fold(splitmix64(master), |acc, x| splitmix64(acc ^ x))
}

/// A synthesized scene in world coordinates (z up, floor at z = 0).
#[derive(Debug, Clone)]
pub struct TabletopScene {
    /// Table and object together, what the sensor sees.
    pub scene: TriangleMesh,
    /// The object alone, in the world.
    pub object: TriangleMesh,
    /// Object-to-world transform applied to the input mesh.
    pub object_pose: RigidTransform,
    pub table_height: f64,
}

impl TabletopScene {
    /// Center of the object's bounding box, world frame.
    pub fn object_center(&self) -> Point3 {
        self.object.bounds().expect("non-empty object").center()
    }
}

fn table_patch(height: f64) -> TriangleMesh {
    let h = TABLE_SIZE / 2.0;
    let v = vec![
        Point3::new(-h, -h, height),
        Point3::new(h, -h, height),
        Point3::new(h, h, height),
        Point3::new(-h, h, height),
    ];
    TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).expect("valid quad")
}

/// Rests an already grip-scaled `mesh` on a table at `table_height`, with a
/// seeded yaw about the vertical and its footprint centered at the origin.
/// The mesh's own "down" is kept as its stable face.
pub fn synthesize_scene(mesh: &TriangleMesh, table_height: f64, seed: u64) -> Result<TabletopScene> {
    if !(table_height > 0.0 && table_height.is_finite()) {
        return Err(nbv_core::Error::InvalidArgument(format!("table height {table_height} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let yaw = RigidTransform::from_yaw(rng.random_range(0.0..TAU));
    let turned = mesh.transformed(&yaw);
    let b = turned
        .bounds()
        .ok_or_else(|| nbv_core::Error::DegenerateInput("cannot place an empty mesh".into()))?;
    let c = b.center();
    let shift = Vector3::new(-c.x, -c.y, table_height - b.min.z);
    let object = turned.translated(&shift);
    let object_pose = RigidTransform::from_translation(shift).compose(&yaw);
    let mut scene = table_patch(table_height);
    scene.append(&object);
    Ok(TabletopScene {
        scene,
        object,
        object_pose,
        table_height,
    })
}

/// Seeded table height from the configured set.
pub fn pick_table_height(heights: &[f64], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7ab1e);
    heights[rng.random_range(0..heights.len())]
}

/// A camera position uniform by area on the upper hemisphere of radius
/// `d` about `center`, limited to heights in `height_range` and elevations
/// up to [`MAX_ELEVATION_DEG`]. When the limits leave no band the nearest
/// realizable elevation is used.
pub fn sample_viewpoint(center: &Point3, d: f64, height_range: (f64, f64), seed: u64) -> Point3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = ((height_range.0 - center.z) / d).clamp(0.0, 1.0);
    let hi = ((height_range.1 - center.z) / d).clamp(0.0, 1.0).min(MAX_ELEVATION_DEG.to_radians().sin());
    let s: f64 = if lo < hi { rng.random_range(lo..hi) } else { hi.min(lo) };
    let azimuth = rng.random_range(0.0..TAU);
    let r = (1.0 - s * s).sqrt();
    center + d * Vector3::new(r * azimuth.cos(), r * azimuth.sin(), s)
}

/// A camera position uniform on the whole sphere of radius `d` about `center`.
pub fn sample_sphere(center: &Point3, d: f64, seed: u64) -> Point3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s: f64 = rng.random_range(-1.0..1.0);
    let azimuth = rng.random_range(0.0..TAU);
    let r = (1.0 - s * s).sqrt();
    center + d * Vector3::new(r * azimuth.cos(), r * azimuth.sin(), s)
}

/// Point opposite `eye` through `center`.
pub fn antipode(center: &Point3, eye: &Point3) -> Point3 {
    center + (center - eye)
}

/// Robot base pose for a camera at `eye` looking toward `target`: base on
/// the floor under the camera, heading along the horizontal bearing.
pub fn robot_base_under(eye: &Point3, target: &Point3) -> RigidTransform {
    let dx = target.x - eye.x;
    let dy = target.y - eye.y;
    let heading = if dx.hypot(dy) > 1e-12 { dy.atan2(dx) } else { 0.0 };
    RigidTransform::from_translation(Vector3::new(eye.x, eye.y, 0.0)).compose(&RigidTransform::from_yaw(heading))
}

/// Held-out procedural objects, a deterministic mix of primitive families.
pub fn procedural_meshes(count: usize, seed: u64) -> Vec<(String, TriangleMesh)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let family = i % 9;
            let mut r = |lo: f64, hi: f64| rng.random_range(lo..hi);
            let (kind, mesh) = match family {
                0 => ("box", shapes::cuboid(Vector3::new(r(0.5, 1.5), r(0.5, 1.5), r(0.5, 2.0)))),
                1 => ("cylinder", shapes::cylinder(r(0.3, 0.6), r(0.6, 2.0), 24)),
                2 => ("frustum", shapes::frustum(r(0.3, 0.6), r(0.1, 0.3), r(0.5, 1.5), 24)),
                3 => ("sphere", shapes::uv_sphere(r(0.4, 0.6), 16, 32)),
                4 => {
                    let major = r(0.5, 0.8);
                    ("torus", shapes::torus(major, r(0.15, 0.3), 32, 16))
                }
                5 => {
                    let (w, t) = (r(0.8, 1.4), r(0.3, 0.5));
                    ("l_prism", shapes::extrude(&[[0.0, 0.0], [w, 0.0], [w, t], [t, t], [t, w], [0.0, w]], r(0.4, 1.0)))
                }
                6 => {
                    let (w, t) = (r(1.0, 1.6), r(0.3, 0.5));
                    let h = w / 2.0;
                    let poly = [[-h, 0.0], [h, 0.0], [h, t], [t / 2.0, t], [t / 2.0, w], [-t / 2.0, w], [-t / 2.0, t], [-h, t]];
                    ("t_prism", shapes::extrude(&poly, r(0.4, 1.0)))
                }
                7 => {
                    let (w, t, d) = (r(1.0, 1.4), r(0.2, 0.35), r(0.6, 1.2));
                    let poly = [[0.0, 0.0], [w, 0.0], [w, d], [w - t, d], [w - t, t], [t, t], [t, d], [0.0, d]];
                    ("u_prism", shapes::extrude(&poly, r(0.5, 1.0)))
                }
                _ => {
                    let points = 5 + (i / 9) % 3;
                    let (outer, inner) = (r(0.6, 0.9), r(0.3, 0.45));
                    let poly: Vec<[f64; 2]> = (0..2 * points)
                        .map(|k| {
                            let a = PI * k as f64 / points as f64;
                            let rad = if k % 2 == 0 { outer } else { inner };
                            [rad * a.cos(), rad * a.sin()]
                        })
                        .collect();
                    ("star_prism", shapes::extrude(&poly, r(0.3, 0.8)))
                }
            };
            (format!("proc_{i:03}_{kind}"), mesh)
        })
        .collect()
}
