//! Procedural closed meshes with outward-facing triangles, centered on the
//! origin. Used for synthetic scenes and analytic test fixtures.

use std::f64::consts::TAU;

use crate::{Point3, TriangleMesh, Vector3};

fn build(vertices: Vec<Point3>, faces: Vec<[u32; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, faces).expect("procedural mesh indices are valid")
}

fn quad(faces: &mut Vec<[u32; 3]>, a: u32, b: u32, c: u32, d: u32) {
    faces.push([a, b, c]);
    faces.push([a, c, d]);
}

/// Axis-aligned box with the given edge lengths.
pub fn cuboid(size: Vector3) -> TriangleMesh {
    let h = size / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let mut faces = Vec::with_capacity(12);
    quad(&mut faces, 0, 2, 3, 1);
    quad(&mut faces, 4, 5, 7, 6);
    quad(&mut faces, 0, 1, 5, 4);
    quad(&mut faces, 2, 6, 7, 3);
    quad(&mut faces, 0, 4, 6, 2);
    quad(&mut faces, 1, 3, 7, 5);
    build(vertices, faces)
}

/// Truncated cone along `z`. A zero top radius closes to an apex.
pub fn frustum(bottom_radius: f64, top_radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let segments = segments.max(3);
    let hz = height / 2.0;
    let mut vertices = Vec::new();
    let ring = |r: f64, z: f64| (0..segments).map(move |i| {
        let a = TAU * i as f64 / segments as f64;
        Point3::new(r * a.cos(), r * a.sin(), z)
    });
    vertices.extend(ring(bottom_radius, -hz));
    let apex = top_radius <= 0.0;
    if apex {
        vertices.push(Point3::new(0.0, 0.0, hz));
    } else {
        vertices.extend(ring(top_radius, hz));
    }
    let n = segments as u32;
    let bottom_center = vertices.len() as u32;
    vertices.push(Point3::new(0.0, 0.0, -hz));
    let mut faces = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        faces.push([bottom_center, j, i]);
        if apex {
            faces.push([i, j, n]);
        } else {
            quad(&mut faces, i, j, n + j, n + i);
        }
    }
    if !apex {
        let top_center = vertices.len() as u32;
        vertices.push(Point3::new(0.0, 0.0, hz));
        for i in 0..n {
            faces.push([top_center, n + i, n + (i + 1) % n]);
        }
    }
    build(vertices, faces)
}

pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    frustum(radius, radius, height, segments)
}

/// Latitude/longitude sphere.
pub fn uv_sphere(radius: f64, stacks: usize, slices: usize) -> TriangleMesh {
    let stacks = stacks.max(2);
    let slices = slices.max(3);
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for s in 1..stacks {
        let phi = std::f64::consts::PI * s as f64 / stacks as f64;
        for j in 0..slices {
            let theta = TAU * j as f64 / slices as f64;
            vertices.push(Point3::new(
                radius * phi.sin() * theta.cos(),
                radius * phi.sin() * theta.sin(),
                radius * phi.cos(),
            ));
        }
    }
    let south = vertices.len() as u32;
    vertices.push(Point3::new(0.0, 0.0, -radius));
    let m = slices as u32;
    let idx = |s: u32, j: u32| 1 + (s - 1) * m + (j % m);
    let mut faces = Vec::new();
    for j in 0..m {
        faces.push([0, idx(1, j), idx(1, j + 1)]);
    }
    for s in 1..(stacks as u32 - 1) {
        for j in 0..m {
            quad(&mut faces, idx(s, j), idx(s + 1, j), idx(s + 1, j + 1), idx(s, j + 1));
        }
    }
    let last = stacks as u32 - 1;
    for j in 0..m {
        faces.push([south, idx(last, j + 1), idx(last, j)]);
    }
    build(vertices, faces)
}

/// Torus around the `z` axis.
pub fn torus(major_radius: f64, minor_radius: f64, major_segments: usize, minor_segments: usize) -> TriangleMesh {
    let (nu, nv) = (major_segments.max(3), minor_segments.max(3));
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let theta = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let phi = TAU * j as f64 / nv as f64;
            let r = major_radius + minor_radius * phi.cos();
            vertices.push(Point3::new(r * theta.cos(), r * theta.sin(), minor_radius * phi.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + (j % nv)) as u32;
    let mut faces = Vec::new();
    for i in 0..nu {
        for j in 0..nv {
            quad(&mut faces, idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
        }
    }
    build(vertices, faces)
}

/// Extrudes a simple polygon in the `xy` plane along `z`. Either winding is accepted.
pub fn extrude(polygon: &[[f64; 2]], height: f64) -> TriangleMesh {
    let mut poly: Vec<[f64; 2]> = polygon.to_vec();
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    let n = poly.len() as u32;
    let hz = height / 2.0;
    let mut vertices: Vec<Point3> = poly.iter().map(|p| Point3::new(p[0], p[1], -hz)).collect();
    vertices.extend(poly.iter().map(|p| Point3::new(p[0], p[1], hz)));
    let mut faces = Vec::new();
    for [a, b, c] in ear_clip(&poly) {
        faces.push([n + a, n + b, n + c]);
        faces.push([a, c, b]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        quad(&mut faces, i, j, n + j, n + i);
    }
    build(vertices, faces)
}

fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Ear clipping for a counter-clockwise simple polygon.
fn ear_clip(poly: &[[f64; 2]]) -> Vec<[u32; 3]> {
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut remaining: Vec<u32> = (0..poly.len() as u32).collect();
    let mut tris = Vec::new();
    while remaining.len() > 3 {
        let m = remaining.len();
        let ear = (0..m).find(|&i| {
            let (ip, inext) = (remaining[(i + m - 1) % m], remaining[(i + 1) % m]);
            let (a, b, c) = (poly[ip as usize], poly[remaining[i] as usize], poly[inext as usize]);
            if cross(a, b, c) <= 0.0 {
                return false;
            }
            remaining.iter().all(|&k| {
                if k == ip || k == inext || k == remaining[i] {
                    return true;
                }
                let p = poly[k as usize];
                !(cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0)
            })
        });
        let Some(i) = ear else {
            // Not simple; fall back to a fan so the mesh stays closed.
            break;
        };
        tris.push([remaining[(i + m - 1) % m], remaining[i], remaining[(i + 1) % m]]);
        remaining.remove(i);
    }
    for k in 1..remaining.len().saturating_sub(1) {
        tris.push([remaining[0], remaining[k], remaining[k + 1]]);
    }
    tris
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_closed_outward(m: &TriangleMesh, expected_volume: f64, tol: f64) {
        assert_eq!(m.non_manifold_edges(), 0);
        let v = m.signed_volume();
        assert!((v - expected_volume).abs() <= tol * expected_volume, "volume {v} vs {expected_volume}");
    }

    #[test]
    fn closed_and_outward() {
        use std::f64::consts::PI;
        assert_closed_outward(&cuboid(Vector3::new(0.1, 0.2, 0.3)), 0.006, 1e-9);
        assert_closed_outward(&cylinder(1.0, 2.0, 256), 2.0 * PI, 1e-3);
        assert_closed_outward(&frustum(1.0, 0.0, 3.0, 256), PI, 1e-3);
        assert_closed_outward(&frustum(1.0, 0.5, 1.0, 256), PI * (1.0 + 0.5 + 0.25) / 3.0, 1e-3);
        assert_closed_outward(&uv_sphere(1.0, 128, 256), 4.0 / 3.0 * PI, 1e-3);
        assert_closed_outward(&torus(1.0, 0.25, 256, 128), 2.0 * PI * PI * 0.0625, 1e-3);
    }

    #[test]
    fn extruded_l_shape() {
        let l = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 3.0], [0.0, 3.0]];
        assert_closed_outward(&extrude(&l, 0.5), 4.0 * 0.5, 1e-9);
        let mut cw = l;
        cw.reverse();
        assert_closed_outward(&extrude(&cw, 0.5), 2.0, 1e-9);
    }
}
