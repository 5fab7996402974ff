//! Bounding-volume hierarchy over the triangles of a mesh, answering
//! nearest-hit ray queries and closest-point queries.

use crate::geometry::Aabb;
use crate::mesh::closest_point_on_triangle;
use crate::{Point3, TriangleMesh, Vector3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Ray parameter, in units of the direction's length.
    pub t: f64,
    pub face: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub point: Point3,
    pub distance: f64,
    pub face: usize,
}

/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone)]
pub struct Bvh {
    triangles: Vec<[Point3; 3]>,
    /// Permutation of triangle indices referenced by leaves.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let triangles: Vec<[Point3; 3]> = mesh.triangles().collect();
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let centroids: Vec<Point3> = triangles
            .iter()
            .map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            build(&triangles, &centroids, &mut order, 0, triangles.len(), &mut nodes);
        }
        Self { triangles, order, nodes }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| n.bounds)
    }

    /// Nearest intersection with `t` in `(t_min, t_max]`. Triangles are two-sided.
    pub fn intersect(&self, origin: &Point3, dir: &Vector3, t_min: f64, t_max: f64) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|c| 1.0 / c);
        let prepared = PreparedRay::new(origin, dir);
        let mut best: Option<RayHit> = None;
        let mut limit = t_max;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.ray_interval(origin, &inv, t_min, limit).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &tri in &self.order[start..end] {
                        if let Some(t) = prepared.intersect(&self.triangles[tri]) {
                            let better = match best {
                                None => true,
                                // Equal distances resolve to the lower face index so the
                                // result does not depend on traversal order.
                                Some(b) => t < b.t || (t == b.t && tri < b.face),
                            };
                            if t > t_min && t <= limit && better {
                                best = Some(RayHit { t, face: tri });
                                limit = t;
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }

    /// Closest point on the mesh surface to `p`, or `None` for an empty mesh.
    pub fn closest_point(&self, p: &Point3) -> Option<ClosestPoint> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = ClosestPoint {
            point: *p,
            distance: f64::INFINITY,
            face: usize::MAX,
        };
        let mut best_sq = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.distance_squared(p) > best_sq {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &tri in &self.order[start..end] {
                        let [a, b, c] = &self.triangles[tri];
                        let q = closest_point_on_triangle(p, a, b, c);
                        let d = (q - p).norm_squared();
                        if d < best_sq || (d == best_sq && tri < best.face) {
                            best_sq = d;
                            best = ClosestPoint { point: q, distance: 0.0, face: tri };
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared(p);
                    let dr = self.nodes[right].bounds.distance_squared(p);
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.distance = best_sq.sqrt();
        Some(best)
    }
}

fn build(
    triangles: &[[Point3; 3]],
    centroids: &[Point3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let bounds = order[start..end]
        .iter()
        .fold(Aabb::empty(), |b, &i| {
            let t = &triangles[i];
            let mut b = b;
            t.iter().for_each(|p| b.grow(p));
            b
        });
    let index = nodes.len();
    nodes.push(Node {
        bounds,
        kind: NodeKind::Leaf { start, end },
    });
    if end - start <= LEAF_SIZE {
        return index;
    }
    let cbounds = Aabb::from_points(order[start..end].iter().map(|&i| centroids[i])).expect("non-empty range");
    let axis = cbounds.largest_axis();
    if cbounds.extent()[axis] <= 0.0 {
        return index;
    }
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
    });
    let left = build(triangles, centroids, order, start, mid, nodes);
    let right = build(triangles, centroids, order, mid, end, nodes);
    nodes[index].kind = NodeKind::Inner { left, right };
    index
}

/// Per-ray precomputation for the watertight ray/triangle test of Woop,
/// Benthin and Wald (2013). Rays through shared edges hit exactly one of
/// the adjacent triangles or both, never neither.
struct PreparedRay {
    origin: Point3,
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
}

impl PreparedRay {
    fn new(origin: &Point3, dir: &Vector3) -> Self {
        let kz = dir.iamax();
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        Self {
            origin: *origin,
            kx,
            ky,
            kz,
            sx: dir[kx] / dir[kz],
            sy: dir[ky] / dir[kz],
            sz: 1.0 / dir[kz],
        }
    }

    fn intersect(&self, tri: &[Point3; 3]) -> Option<f64> {
        let a = tri[0] - self.origin;
        let b = tri[1] - self.origin;
        let c = tri[2] - self.origin;
        let (kx, ky, kz) = (self.kx, self.ky, self.kz);
        let ax = a[kx] - self.sx * a[kz];
        let ay = a[ky] - self.sy * a[kz];
        let bx = b[kx] - self.sx * b[kz];
        let by = b[ky] - self.sy * b[kz];
        let cx = c[kx] - self.sx * c[kz];
        let cy = c[ky] - self.sy * c[kz];
        let u = cx * by - cy * bx;
        let v = ax * cy - ay * cx;
        let w = bx * ay - by * ax;
        if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
            return None;
        }
        let det = u + v + w;
        if det == 0.0 {
            return None;
        }
        let az = self.sz * a[kz];
        let bz = self.sz * b[kz];
        let cz = self.sz * c[kz];
        let t = (u * az + v * bz + w * cz) / det;
        t.is_finite().then_some(t)
    }
}
