//! Marching cubes over a score grid.
//!
//! Cube corners sit at voxel centers, so an `n³` grid has `(n−1)³` cubes. A
//! corner is inside when its score is at least the iso level. The 256-case
//! triangle table is derived at first use from face rules instead of being
//! typed in: on each cube face the inside corners are joined by segments
//! (ambiguous faces keep the two inside corners apart), the segments chain
//! into closed loops, and each loop is fanned into triangles. Neighboring
//! cubes see a shared face with the same rule, so the surface is closed
//! wherever it stays away from the grid boundary.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::voxel::ScoreGrid;
use crate::{Point3, TriangleMesh};

/// Corner offsets in `(x, y, z)`.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Each face as a corner cycle, counter-clockwise seen from outside the cube.
const FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [3, 7, 6, 2],
    [0, 4, 7, 3],
    [1, 2, 6, 5],
];

fn edge_between(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        .expect("adjacent corners")
}

/// Stands for the centroid of a loop's vertices in [`Loop::triangles`].
const CENTER: u8 = 12;

/// One closed crossing loop of a cube case and its triangulation.
#[derive(Debug, Clone)]
struct Loop {
    edges: Vec<u8>,
    /// Entries are edge numbers or [`CENTER`].
    triangles: Vec<[u8; 3]>,
}

type Table = Vec<Vec<Loop>>;

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

fn build_table() -> Table {
    // Pick the loop direction once: for a lone inside corner the normal must
    // point away from it.
    let probe = &case_loops(1)[0];
    let pos = |e: u8| {
        let [a, b] = EDGES[e as usize];
        Point3::from((corner_point(a).coords + corner_point(b).coords) / 2.0)
    };
    let (p0, p1, p2) = (pos(probe[0]), pos(probe[1]), pos(probe[2]));
    let reverse = (p1 - p0).cross(&(p2 - p0)).dot(&(p0 - corner_point(0))) < 0.0;
    (0..256)
        .map(|case| {
            case_loops(case)
                .into_iter()
                .map(|mut edges| {
                    if reverse {
                        edges.reverse();
                    }
                    let triangles = triangulate(&edges);
                    Loop { edges, triangles }
                })
                .collect()
        })
        .collect()
}

fn corner_point(c: usize) -> Point3 {
    let [x, y, z] = CORNERS[c];
    Point3::new(x as f64, y as f64, z as f64)
}

fn share_face(e: u8, f: u8) -> bool {
    let (a, b) = (EDGES[e as usize], EDGES[f as usize]);
    FACES.iter().any(|face| a.iter().chain(&b).all(|c| face.contains(c)))
}

/// Fans from an apex whose diagonals all cut through the cube's interior.
/// A diagonal lying in a cube face could be drawn again by the neighbor
/// across that face, so when no such apex exists the loop is fanned around
/// its centroid instead.
fn triangulate(edges: &[u8]) -> Vec<[u8; 3]> {
    let m = edges.len();
    if m == 3 {
        return vec![[edges[0], edges[1], edges[2]]];
    }
    for apex in 0..m {
        let ok = (2..m - 1).all(|d| !share_face(edges[apex], edges[(apex + d) % m]));
        if ok {
            return (1..m - 1)
                .map(|d| [edges[apex], edges[(apex + d) % m], edges[(apex + d + 1) % m]])
                .collect();
        }
    }
    (0..m).map(|i| [CENTER, edges[i], edges[(i + 1) % m]]).collect()
}

fn case_loops(case: usize) -> Vec<Vec<u8>> {
    let inside = |c: usize| case & (1 << c) != 0;
    // next[e] = edge reached from crossing edge `e` within one face.
    let mut next: [Option<usize>; 12] = [None; 12];
    for face in FACES {
        let ins: Vec<bool> = face.iter().map(|&c| inside(c)).collect();
        if ins.iter().all(|&b| b) || ins.iter().all(|&b| !b) {
            continue;
        }
        // Walk the cycle; every inside run is bounded by an entry crossing
        // (outside → inside) and an exit crossing (inside → outside).
        let start = (0..4).find(|&k| !ins[k]).expect("face has an outside corner");
        let mut entry = None;
        for s in 1..=4 {
            let k = (start + s) % 4;
            let prev = (start + s + 3) % 4;
            let e = edge_between(face[prev], face[k]);
            if ins[k] && !ins[prev] {
                entry = Some(e);
            } else if !ins[k] && ins[prev] {
                let en = entry.take().expect("entry precedes exit");
                debug_assert!(next[e].is_none());
                next[e] = Some(en);
            }
        }
    }
    let mut loops = Vec::new();
    let mut used = [false; 12];
    for e0 in 0..12 {
        if next[e0].is_none() || used[e0] {
            continue;
        }
        let mut lp = vec![e0 as u8];
        used[e0] = true;
        let mut e = next[e0].expect("checked");
        while e != e0 {
            used[e] = true;
            lp.push(e as u8);
            e = next[e].expect("crossing edges form closed loops");
        }
        loops.push(lp);
    }
    loops
}

/// Triangulated iso-surface of `g` at `iso`, in world coordinates.
pub fn marching_cubes(g: &ScoreGrid, iso: f64) -> TriangleMesh {
    let spec = g.spec();
    let n = spec.resolution;
    let scores = g.scores();
    let table = table();
    let value = |i: usize, j: usize, k: usize| scores[spec.linear(i, j, k)] as f64;

    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    // Keyed by (lower corner's linear index, axis).
    let mut vertex_of: HashMap<(usize, u8), u32> = HashMap::new();

    for k in 0..n - 1 {
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let mut vals = [0.0f64; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    vals[c] = value(i + off[0], j + off[1], k + off[2]);
                    if vals[c] >= iso {
                        case |= 1 << c;
                    }
                }
                for lp in &table[case] {
                    // Slots 0..12 hold edge vertices, slot 12 the loop center.
                    let mut slot = [u32::MAX; 13];
                    for &e in &lp.edges {
                        let [a, b] = EDGES[e as usize];
                        let (ca, cb) = (CORNERS[a], CORNERS[b]);
                        let lo = if ca <= cb { ca } else { cb };
                        let axis = (0..3).find(|&d| ca[d] != cb[d]).expect("edge spans one axis") as u8;
                        let key = (spec.linear(i + lo[0], j + lo[1], k + lo[2]), axis);
                        slot[e as usize] = *vertex_of.entry(key).or_insert_with(|| {
                            let pa = spec.cell_center(i + ca[0], j + ca[1], k + ca[2]);
                            let pb = spec.cell_center(i + cb[0], j + cb[1], k + cb[2]);
                            let t = ((iso - vals[a]) / (vals[b] - vals[a])).clamp(0.0, 1.0);
                            vertices.push(pa + (pb - pa) * t);
                            (vertices.len() - 1) as u32
                        });
                    }
                    if lp.triangles.iter().any(|t| t.contains(&CENTER)) {
                        let sum = lp.edges.iter().fold(crate::Vector3::zeros(), |acc, &e| acc + vertices[slot[e as usize] as usize].coords);
                        vertices.push(Point3::from(sum / lp.edges.len() as f64));
                        slot[CENTER as usize] = (vertices.len() - 1) as u32;
                    }
                    for t in &lp.triangles {
                        faces.push(t.map(|e| slot[e as usize]));
                    }
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("indices come from the vertex list")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::GridSpec;
    use crate::Vector3;

    /// Generalized winding number of a closed oriented mesh around `p`
    /// (sum of signed solid angles / 4π).
    fn winding_number(mesh: &TriangleMesh, p: &Point3) -> f64 {
        let mut total = 0.0;
        for [a, b, c] in mesh.triangles() {
            let (a, b, c) = (a - p, b - p, c - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    #[test]
    fn every_case_closes_its_loops() {
        for case in 0..256 {
            let loops = &table()[case];
            if case == 0 || case == 255 {
                assert!(loops.is_empty());
            } else {
                assert!(!loops.is_empty(), "case {case}");
            }
            let crossings: usize = loops.iter().map(|l| l.edges.len()).sum();
            let expected = EDGES.iter().filter(|[a, b]| ((case >> a) & 1) != ((case >> b) & 1)).count();
            assert_eq!(crossings, expected, "case {case}");
        }
    }

    #[test]
    fn all_zero_grid_gives_empty_mesh() {
        let spec = GridSpec::new(8, Point3::origin(), 0.1).unwrap();
        assert!(marching_cubes(&ScoreGrid::filled(spec, 0.0).unwrap(), 0.5).is_empty());
    }

    #[test]
    fn single_voxel_is_enclosed() {
        let spec = GridSpec::new(5, Point3::origin(), 0.1).unwrap();
        let mut scores = vec![0.0f32; spec.cell_count()];
        scores[spec.linear(2, 2, 2)] = 1.0;
        let g = ScoreGrid::filled(spec, 0.0).unwrap().with_scores(scores).unwrap();
        let mesh = marching_cubes(&g, 0.5);
        assert_eq!(mesh.non_manifold_edges(), 0);
        assert!((winding_number(&mesh, &spec.cell_center(2, 2, 2)) - 1.0).abs() < 1e-9);
        assert!(winding_number(&mesh, &spec.cell_center(0, 0, 0)).abs() < 1e-9);
        assert!(mesh.signed_volume() > 0.0);
    }

    fn sphere_grid(n: usize, radius_voxels: f64) -> (ScoreGrid, Point3, f64) {
        let h = 0.01;
        let spec = GridSpec::new(n, Point3::origin(), h).unwrap();
        let center = Point3::from(Vector3::repeat(n as f64 * h / 2.0));
        let r = radius_voxels * h;
        let scores = (0..spec.cell_count())
            .map(|idx| {
                let d = (spec.center_of(idx) - center).norm() - r;
                (0.5 - d / (4.0 * h)).clamp(0.0, 1.0) as f32
            })
            .collect();
        (ScoreGrid::filled(spec, 0.0).unwrap().with_scores(scores).unwrap(), center, r)
    }

    #[test]
    fn sphere_is_closed_and_accurate() {
        let (g, center, r) = sphere_grid(32, 10.0);
        let mesh = marching_cubes(&g, 0.5);
        assert!(!mesh.is_empty());
        assert_eq!(mesh.non_manifold_edges(), 0);
        let h = g.spec().voxel_size;
        for v in mesh.vertices() {
            assert!(((v - center).norm() - r).abs() <= h);
        }
        let expected = 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
        assert!((mesh.signed_volume() - expected).abs() / expected < 0.05);
    }

    #[test]
    fn random_grids_are_watertight_away_from_the_boundary() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let spec = GridSpec::new(8, Point3::origin(), 1.0).unwrap();
            let scores = (0..spec.cell_count())
                .map(|idx| {
                    let [i, j, k] = spec.unlinear(idx);
                    if [i, j, k].iter().any(|&c| c == 0 || c == 7) {
                        0.0
                    } else {
                        rng.random::<f32>()
                    }
                })
                .collect();
            let g = ScoreGrid::filled(spec, 0.0).unwrap().with_scores(scores).unwrap();
            let mesh = marching_cubes(&g, 0.5);
            assert_eq!(mesh.non_manifold_edges(), 0);
            assert!(mesh.signed_volume() > 0.0 || mesh.is_empty());
        }
    }
}
