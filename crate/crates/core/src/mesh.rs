use log::warn;

use crate::geometry::{Aabb, RigidTransform};
use crate::{Error, Point3, Result, Vector3};

/// Indexed triangle mesh in meters.
///
/// Every face index is below the vertex count and no face repeats a vertex.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Validates indices and drops faces that repeat a vertex index.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some((i, f)) = faces.iter().enumerate().find(|(_, f)| f.iter().any(|&v| v as usize >= n)) {
            return Err(Error::InvalidArgument(format!(
                "face {i} {f:?} references a vertex beyond the {n} available"
            )));
        }
        if let Some(i) = vertices.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!("vertex {i} has a non-finite coordinate")));
        }
        let before = faces.len();
        let faces: Vec<[u32; 3]> = faces
            .into_iter()
            .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            .collect();
        if faces.len() != before {
            warn!("dropped {} degenerate faces", before - faces.len());
        }
        Ok(Self { vertices, faces })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn triangles(&self) -> impl Iterator<Item = [Point3; 3]> + '_ {
        (0..self.faces.len()).map(|i| self.triangle(i))
    }

    /// Bounds of the vertices referenced by faces.
    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.faces.iter().flat_map(|f| f.iter().map(|&v| self.vertices[v as usize])))
    }

    pub fn surface_area(&self) -> f64 {
        self.triangles().map(|t| triangle_area(&t)).sum()
    }

    /// Signed volume by the divergence theorem; positive for closed meshes
    /// with outward-facing (counter-clockwise) triangles.
    pub fn signed_volume(&self) -> f64 {
        self.triangles()
            .map(|[a, b, c]| a.coords.dot(&b.coords.cross(&c.coords)) / 6.0)
            .sum()
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| t.transform_point(p)).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, offset: &Vector3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| p + offset).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Uniform scaling about `center`.
    pub fn scaled_about(&self, center: &Point3, factor: f64) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| center + (p - center) * factor).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Appends `other`, returning the index of its first face in the result.
    pub fn append(&mut self, other: &TriangleMesh) -> usize {
        let base = self.vertices.len() as u32;
        let first_face = self.faces.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces.extend(other.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
        first_face
    }

    pub fn flip_orientation(&mut self) {
        for f in &mut self.faces {
            f.swap(1, 2);
        }
    }

    /// Scales the mesh uniformly about its bounding-box center so the
    /// smallest bounding-box extent equals `width`.
    pub fn scale_to_grip_width(&self, width: f64) -> Result<TriangleMesh> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidArgument(format!("grip width must be positive, got {width}")));
        }
        let bounds = self
            .bounds()
            .ok_or_else(|| Error::DegenerateInput("cannot scale an empty mesh".into()))?;
        let smallest = bounds.extent().min();
        if !(smallest > 0.0) {
            return Err(Error::DegenerateInput(format!(
                "mesh has zero extent along at least one axis ({:?})",
                bounds.extent()
            )));
        }
        Ok(self.scaled_about(&bounds.center(), width / smallest))
    }

    /// Undirected edges that are not shared by exactly two faces.
    pub fn non_manifold_edges(&self) -> usize {
        use std::collections::HashMap;
        let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        counts.values().filter(|&&c| c != 2).count()
    }
}

pub fn triangle_area(t: &[Point3; 3]) -> f64 {
    0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm()
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn extent(m: &TriangleMesh) -> Vector3 {
        m.bounds().unwrap().extent()
    }

    #[test]
    fn unit_cube_scaled_to_grip_width() {
        let cube = shapes::cuboid(Vector3::new(1.0, 1.0, 1.0));
        let scaled = cube.scale_to_grip_width(0.1).unwrap();
        assert!((extent(&scaled) - Vector3::repeat(0.1)).amax() < 1e-12);
        assert!((scaled.bounds().unwrap().center() - cube.bounds().unwrap().center()).norm() < 1e-12);
    }

    #[test]
    fn box_scaled_proportionally() {
        let b = shapes::cuboid(Vector3::new(0.2, 0.4, 0.6)).translated(&Vector3::new(1.0, 2.0, 3.0));
        let scaled = b.scale_to_grip_width(0.1).unwrap();
        assert!((extent(&scaled) - Vector3::new(0.1, 0.2, 0.3)).amax() < 1e-12);
        // Idempotent after the first application.
        let again = scaled.scale_to_grip_width(0.1).unwrap();
        for (p, q) in scaled.vertices().iter().zip(again.vertices()) {
            assert!((p - q).norm() < 1e-9);
        }
    }

    #[test]
    fn flat_mesh_cannot_be_scaled() {
        let quad = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(quad.scale_to_grip_width(0.1), Err(Error::DegenerateInput(_))));
        assert!(TriangleMesh::empty().scale_to_grip_width(0.1).is_err());
    }

    #[test]
    fn degenerate_faces_are_dropped_and_bad_indices_rejected() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let m = TriangleMesh::new(v.clone(), vec![[0, 1, 2], [0, 0, 1]]).unwrap();
        assert_eq!(m.faces().len(), 1);
        assert!(TriangleMesh::new(v, vec![[0, 1, 3]]).is_err());
    }

    #[test]
    fn cube_volume_and_manifoldness() {
        let cube = shapes::cuboid(Vector3::new(1.0, 2.0, 3.0));
        assert!((cube.signed_volume() - 6.0).abs() < 1e-9);
        assert_eq!(cube.non_manifold_edges(), 0);
        assert!((cube.surface_area() - 22.0).abs() < 1e-9);
    }

    #[test]
    fn closest_point_regions() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(1.0, 0.0, 0.0);
        let c = Point3::new(0.0, 1.0, 0.0);
        let interior = closest_point_on_triangle(&Point3::new(0.2, 0.2, 1.0), &a, &b, &c);
        assert!((interior - Point3::new(0.2, 0.2, 0.0)).norm() < 1e-12);
        let vertex = closest_point_on_triangle(&Point3::new(-1.0, -1.0, 0.0), &a, &b, &c);
        assert_eq!(vertex, a);
        let edge = closest_point_on_triangle(&Point3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((edge - Point3::new(0.5, 0.5, 0.0)).norm() < 1e-12);
    }
}
