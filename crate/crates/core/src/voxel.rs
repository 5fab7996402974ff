//! Cubic voxel grids: specs, binary occupancy, occupancy scores and the
//! uncertain band around the decision boundary.
//!
//! Cells are indexed `(i, j, k)` along `(x, y, z)` and stored with `i`
//! varying fastest: `linear = i + n * (j + n * k)`.

use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, PointCloud};
use crate::{Error, Point3, Result, TriangleMesh};

pub const DEFAULT_RESOLUTION: usize = 40;
pub const DEFAULT_V_BOUNDARY: f64 = 0.5;
pub const DEFAULT_EPSILON: f64 = 0.025;
pub const DEFAULT_PADDING: f64 = 0.05;

/// Placement of an `n³` cubic grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    /// Minimum corner of cell `(0, 0, 0)`.
    pub origin: Point3,
    pub voxel_size: f64,
}

impl GridSpec {
    pub fn new(resolution: usize, origin: Point3, voxel_size: f64) -> Result<Self> {
        let spec = Self {
            resolution,
            origin,
            voxel_size,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::InvalidArgument(format!("grid resolution {} < 2", self.resolution)));
        }
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(Error::InvalidArgument(format!("voxel size {} must be positive", self.voxel_size)));
        }
        if !self.origin.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("grid origin is not finite".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.resolution.pow(3)
    }

    pub fn edge_length(&self) -> f64 {
        self.voxel_size * self.resolution as f64
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::new(self.origin, self.origin + crate::Vector3::repeat(self.edge_length()))
    }

    pub fn linear(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.resolution;
        i + n * (j + n * k)
    }

    pub fn unlinear(&self, index: usize) -> [usize; 3] {
        let n = self.resolution;
        [index % n, (index / n) % n, index / (n * n)]
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Point3 {
        let h = self.voxel_size;
        self.origin + crate::Vector3::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h)
    }

    pub fn center_of(&self, index: usize) -> Point3 {
        let [i, j, k] = self.unlinear(index);
        self.cell_center(i, j, k)
    }

    /// Cell containing `p`. Points on a face shared by two cells belong to
    /// the higher-index cell; points outside the grid give `None`.
    pub fn cell_of(&self, p: &Point3) -> Option<[usize; 3]> {
        let n = self.resolution as f64;
        let mut out = [0usize; 3];
        for a in 0..3 {
            let c = ((p[a] - self.origin[a]) / self.voxel_size).floor();
            if !(c >= 0.0 && c < n) {
                return None;
            }
            out[a] = c as usize;
        }
        Some(out)
    }

    /// Whether two specs describe the same grid within `tol` (relative to the voxel size).
    pub fn approx_eq(&self, other: &GridSpec, tol: f64) -> bool {
        self.resolution == other.resolution
            && (self.voxel_size - other.voxel_size).abs() <= tol * self.voxel_size
            && (self.origin - other.origin).amax() <= tol * self.voxel_size
    }
}

/// Cubic grid covering `bounds` grown by `padding` (a fraction of each
/// extent) on every side, centered on the box. The edge follows the largest
/// padded extent.
pub fn fit_spec(bounds: &Aabb, resolution: usize, padding: f64) -> Result<GridSpec> {
    let extent = bounds.extent();
    let largest = extent.max();
    if !(largest > 0.0 && largest.is_finite()) {
        return Err(Error::DegenerateInput(format!("bounds have no positive extent: {extent:?}")));
    }
    if !(padding >= 0.0 && padding.is_finite()) {
        return Err(Error::InvalidArgument(format!("padding {padding} must be non-negative")));
    }
    let edge = largest * (1.0 + 2.0 * padding);
    let origin = bounds.center() - crate::Vector3::repeat(edge / 2.0);
    GridSpec::new(resolution, origin, edge / resolution as f64)
}

/// `n³` occupancy bits.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryGrid {
    spec: GridSpec,
    bits: Vec<bool>,
}

impl BinaryGrid {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            bits: vec![false; spec.cell_count()],
            spec,
        }
    }

    pub fn from_bits(spec: GridSpec, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != spec.cell_count() {
            return Err(Error::SpecMismatch(format!(
                "{} bits for a {}³ grid",
                bits.len(),
                spec.resolution
            )));
        }
        Ok(Self { spec, bits })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.bits[self.spec.linear(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.spec.linear(i, j, k);
        self.bits[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn occupied_centers(&self) -> Vec<Point3> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| self.spec.center_of(i))
            .collect()
    }
}

/// Occupancy scores in `[0, 1]` with the decision boundary and uncertainty band.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrid {
    spec: GridSpec,
    scores: Vec<f32>,
    v_boundary: f64,
    epsilon: f64,
}

impl ScoreGrid {
    pub fn new(spec: GridSpec, scores: Vec<f32>, v_boundary: f64, epsilon: f64) -> Result<Self> {
        spec.validate()?;
        if scores.len() != spec.cell_count() {
            return Err(Error::SpecMismatch(format!(
                "{} scores for a {}³ grid",
                scores.len(),
                spec.resolution
            )));
        }
        if let Some(i) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidArgument(format!("score {} at cell {i} is outside [0, 1]", scores[i])));
        }
        if !(v_boundary > 0.0 && v_boundary < 1.0) {
            return Err(Error::InvalidArgument(format!("v_boundary {v_boundary} must lie in (0, 1)")));
        }
        if !(epsilon > 0.0 && epsilon < v_boundary) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} must lie in (0, v_boundary)")));
        }
        Ok(Self {
            spec,
            scores,
            v_boundary,
            epsilon,
        })
    }

    /// Grid filled with one score and the default boundary/band.
    pub fn filled(spec: GridSpec, value: f32) -> Result<Self> {
        Self::new(spec, vec![value; spec.cell_count()], DEFAULT_V_BOUNDARY, DEFAULT_EPSILON)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn v_boundary(&self) -> f64 {
        self.v_boundary
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.scores[self.spec.linear(i, j, k)]
    }

    /// Replaces the score array, keeping spec and band.
    pub fn with_scores(&self, scores: Vec<f32>) -> Result<Self> {
        Self::new(self.spec, scores, self.v_boundary, self.epsilon)
    }

    pub fn with_band(&self, v_boundary: f64, epsilon: f64) -> Result<Self> {
        Self::new(self.spec, self.scores.clone(), v_boundary, epsilon)
    }

    pub fn is_uncertain(&self, score: f32) -> bool {
        (score as f64 - self.v_boundary).abs() <= self.epsilon
    }
}

/// Centers of the voxels whose score lies in `[v_boundary − ε, v_boundary + ε]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UncertainSet {
    pub centroids: Vec<Point3>,
}

impl UncertainSet {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }
}

/// Result of [`voxelize_cloud`].
#[derive(Debug, Clone)]
pub struct VoxelizedCloud {
    pub grid: BinaryGrid,
    /// Points that fell outside the grid and were ignored.
    pub outside: usize,
}

pub fn voxelize_cloud(cloud: &PointCloud, spec: &GridSpec) -> Result<VoxelizedCloud> {
    spec.validate()?;
    if cloud.is_empty() {
        return Err(Error::InvalidArgument("cannot voxelize an empty cloud".into()));
    }
    let mut grid = BinaryGrid::empty(*spec);
    let mut outside = 0;
    for p in cloud.points() {
        match spec.cell_of(p) {
            Some([i, j, k]) => grid.set(i, j, k, true),
            None => outside += 1,
        }
    }
    if outside == cloud.len() {
        return Err(Error::EmptyResult(format!("all {outside} points lie outside the grid")));
    }
    Ok(VoxelizedCloud { grid, outside })
}

/// Bit set iff score ≥ v_boundary.
pub fn threshold_grid(g: &ScoreGrid) -> BinaryGrid {
    BinaryGrid {
        spec: g.spec,
        bits: g.scores.iter().map(|&s| s as f64 >= g.v_boundary).collect(),
    }
}

pub fn uncertain_voxels(g: &ScoreGrid) -> UncertainSet {
    UncertainSet {
        centroids: g
            .scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| g.is_uncertain(s))
            .map(|(i, _)| g.spec.center_of(i))
            .collect(),
    }
}

/// Solid voxelization: a cell is occupied iff its center is inside the
/// closed mesh, decided by the parity of surface crossings along the
/// cell's `z` column. Crossings use a top-left fill rule in the `xy`
/// projection so columns through shared edges are counted exactly once.
pub fn voxelize_mesh_solid(mesh: &TriangleMesh, spec: &GridSpec) -> BinaryGrid {
    let n = spec.resolution;
    let h = spec.voxel_size;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n * n];
    let col_coord = |c: usize, axis: usize| spec.origin[axis] + (c as f64 + 0.5) * h;

    for [a, b, c] in mesh.triangles() {
        let (p0, mut p1, mut p2) = (a, b, c);
        let area2 = (p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x);
        if area2 == 0.0 {
            continue;
        }
        if area2 < 0.0 {
            std::mem::swap(&mut p1, &mut p2);
        }
        let min_x = p0.x.min(p1.x).min(p2.x);
        let max_x = p0.x.max(p1.x).max(p2.x);
        let min_y = p0.y.min(p1.y).min(p2.y);
        let max_y = p0.y.max(p1.y).max(p2.y);
        let range = |lo: f64, hi: f64, axis: usize| {
            let first = (((lo - spec.origin[axis]) / h) - 0.5).ceil().max(0.0) as usize;
            let last = (((hi - spec.origin[axis]) / h) - 0.5).floor();
            if last < 0.0 {
                return first..first;
            }
            first..((last as usize) + 1).min(n)
        };
        let normal = (p1 - p0).cross(&(p2 - p0));
        for j in range(min_y, max_y, 1) {
            let y = col_coord(j, 1);
            for i in range(min_x, max_x, 0) {
                let x = col_coord(i, 0);
                if covers_top_left(&p0, &p1, &p2, x, y) {
                    // Solve normal · (q − p0) = 0 for z.
                    let z = p0.z - (normal.x * (x - p0.x) + normal.y * (y - p0.y)) / normal.z;
                    columns[i + n * j].push(z);
                }
            }
        }
    }

    let mut grid = BinaryGrid::empty(*spec);
    for j in 0..n {
        for i in 0..n {
            let col = &mut columns[i + n * j];
            if col.len() < 2 {
                continue;
            }
            col.sort_by(f64::total_cmp);
            for pair in col.chunks_exact(2) {
                for k in 0..n {
                    let z = col_coord(k, 2);
                    if z > pair[0] && z < pair[1] {
                        grid.set(i, j, k, true);
                    }
                }
            }
        }
    }
    grid
}

/// Point-in-triangle for a counter-clockwise `xy` triangle with the
/// top-left rule on edges.
fn covers_top_left(a: &Point3, b: &Point3, c: &Point3, x: f64, y: f64) -> bool {
    let edge = |p: &Point3, q: &Point3| {
        let (dx, dy) = (q.x - p.x, q.y - p.y);
        let e = dx * (y - p.y) - dy * (x - p.x);
        if e != 0.0 {
            return e > 0.0;
        }
        // Left edges run downward; top edges run horizontally leftward.
        dy < 0.0 || (dy == 0.0 && dx < 0.0)
    };
    edge(a, b) && edge(b, c) && edge(c, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use crate::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_spec(n: usize) -> GridSpec {
        GridSpec::new(n, Point3::origin(), 1.0 / n as f64).unwrap()
    }

    fn grid_of(values: &[f32]) -> ScoreGrid {
        let spec = unit_spec(2);
        let mut scores = vec![0.0f32; 8];
        scores[..values.len()].copy_from_slice(values);
        ScoreGrid::new(spec, scores, DEFAULT_V_BOUNDARY, DEFAULT_EPSILON).unwrap()
    }

    #[test]
    fn single_center_point() {
        let spec = unit_spec(4);
        let cloud = PointCloud::new(vec![Point3::new(0.5, 0.5, 0.5)]).unwrap();
        let v = voxelize_cloud(&cloud, &spec).unwrap();
        assert_eq!(v.grid.count(), 1);
        // Shared faces go to the higher-index cell.
        assert!(v.grid.get(2, 2, 2));
    }

    #[test]
    fn inset_corners_fill_two_cubed() {
        let spec = unit_spec(2);
        let pts = (0..8)
            .map(|c| {
                let f = |bit: usize| if c & bit == 0 { 0.01 } else { 0.99 };
                Point3::new(f(1), f(2), f(4))
            })
            .collect();
        let v = voxelize_cloud(&PointCloud::new(pts).unwrap(), &spec).unwrap();
        assert_eq!(v.grid.count(), 8);
    }

    #[test]
    fn out_of_bounds_points_counted_or_rejected() {
        let spec = unit_spec(4);
        let cloud = PointCloud::new(vec![Point3::new(0.5, 0.5, 0.5), Point3::new(2.0, 0.0, 0.0), Point3::new(1.0, 0.5, 0.5)]).unwrap();
        assert_eq!(voxelize_cloud(&cloud, &spec).unwrap().outside, 2);
        let far = PointCloud::new(vec![Point3::new(-1.0, 0.0, 0.0)]).unwrap();
        assert!(matches!(voxelize_cloud(&far, &spec), Err(Error::EmptyResult(_))));
        assert!(voxelize_cloud(&PointCloud::empty(), &spec).is_err());
    }

    #[test]
    fn random_cloud_matches_point_in_cell_oracle() {
        let spec = GridSpec::new(40, Point3::new(-0.3, 0.1, 0.2), 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point3> = (0..1000)
            .map(|_| Point3::new(rng.random_range(-0.35..0.15), rng.random_range(0.05..0.55), rng.random_range(0.15..0.65)))
            .collect();
        let v = voxelize_cloud(&PointCloud::new(pts.clone()).unwrap(), &spec).unwrap();
        // Oracle: test each point against each cell's half-open box.
        let mut expected = vec![false; spec.cell_count()];
        let mut outside = 0;
        for p in &pts {
            let mut found = false;
            for (idx, cell) in expected.iter_mut().enumerate() {
                let [i, j, k] = spec.unlinear(idx);
                let lo = spec.origin + Vector3::new(i as f64, j as f64, k as f64) * spec.voxel_size;
                let inside = (0..3).all(|a| p[a] >= lo[a] && p[a] < lo[a] + spec.voxel_size);
                if inside {
                    *cell = true;
                    found = true;
                    break;
                }
            }
            outside += usize::from(!found);
        }
        assert_eq!(v.grid.bits(), expected.as_slice());
        assert_eq!(v.outside, outside);
        assert!(v.grid.count() <= pts.len());
    }

    #[test]
    fn fit_spec_examples() {
        let unit = Aabb::new(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let s = fit_spec(&unit, 40, 0.0).unwrap();
        assert!((s.voxel_size - 1.0 / 40.0).abs() < 1e-15);
        let s = fit_spec(&unit, 40, 0.05).unwrap();
        assert!((s.voxel_size - 0.0275).abs() < 1e-15);
        assert!((s.bounds().center() - unit.center()).norm() < 1e-12);
        let b = Aabb::new(Point3::origin(), Point3::new(1.0, 2.0, 3.0));
        let s = fit_spec(&b, 40, 0.05).unwrap();
        assert!((s.edge_length() - 3.0 * 1.1).abs() < 1e-12);
        let flat = Aabb::new(Point3::origin(), Point3::origin());
        assert!(fit_spec(&flat, 40, 0.05).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert!(threshold_grid(&ScoreGrid::filled(unit_spec(2), 0.6).unwrap()).bits().iter().all(|&b| b));
        let g = grid_of(&[0.5, 0.49, 0.51]);
        assert_eq!(&threshold_grid(&g).bits()[..3], &[true, false, true]);
    }

    #[test]
    fn uncertain_examples() {
        let g = grid_of(&[0.47, 0.50, 0.53, 0.90]);
        let u = uncertain_voxels(&g);
        assert_eq!(u.centroids, vec![g.spec().center_of(1)]);
        let certain = grid_of(&[1.0, 0.0, 1.0, 1.0]);
        assert!(uncertain_voxels(&certain).is_empty());
    }

    #[test]
    fn score_grid_invariants() {
        let spec = unit_spec(2);
        assert!(ScoreGrid::new(spec, vec![1.5; 8], 0.5, 0.025).is_err());
        assert!(ScoreGrid::new(spec, vec![0.5; 8], 0.5, 0.6).is_err());
        assert!(ScoreGrid::new(spec, vec![0.5; 8], 1.0, 0.025).is_err());
        assert!(ScoreGrid::new(spec, vec![0.5; 7], 0.5, 0.025).is_err());
    }

    #[test]
    fn solid_voxelization_of_a_sphere() {
        let sphere = shapes::uv_sphere(0.4, 64, 128).translated(&Vector3::repeat(0.5));
        let spec = unit_spec(32);
        let g = voxelize_mesh_solid(&sphere, &spec);
        for idx in 0..spec.cell_count() {
            let r = (spec.center_of(idx) - Point3::new(0.5, 0.5, 0.5)).norm();
            if (r - 0.4).abs() > 0.01 {
                assert_eq!(g.bits()[idx], r < 0.4, "cell {idx} at radius {r}");
            }
        }
    }

    #[test]
    fn solid_voxelization_of_aligned_cube_is_exact() {
        // Cube faces pass exactly through cell-center columns' neighbors; the
        // diagonal edges of its faces hit column centers exactly.
        let spec = unit_spec(10);
        let cube = shapes::cuboid(Vector3::repeat(0.6)).translated(&Vector3::repeat(0.5));
        let g = voxelize_mesh_solid(&cube, &spec);
        assert_eq!(g.count(), 6 * 6 * 6);
    }

    fn arb_grid() -> impl Strategy<Value = ScoreGrid> {
        prop::collection::vec(0.0f32..=1.0, 27).prop_map(|s| ScoreGrid::new(unit_spec(3), s, 0.5, 0.025).unwrap())
    }

    proptest! {
        #[test]
        fn uncertain_set_is_exhaustive_scan(g in arb_grid()) {
            let u = uncertain_voxels(&g);
            let expected: Vec<Point3> = (0..27)
                .filter(|&i| ((g.scores()[i] as f64) - 0.5).abs() <= 0.025)
                .map(|i| g.spec().center_of(i))
                .collect();
            prop_assert_eq!(&u.centroids, &expected);
            // No confidently-scored voxel appears in the uncertain set.
            for c in &u.centroids {
                let [i, j, k] = g.spec().cell_of(c).unwrap();
                prop_assert!(((g.get(i, j, k) as f64) - 0.5).abs() <= 0.025);
            }
        }
    }
}
