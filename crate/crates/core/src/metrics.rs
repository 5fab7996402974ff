//! Reconstruction and navigation metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bvh::Bvh;
use crate::mesh::triangle_area;
use crate::voxel::BinaryGrid;
use crate::{Error, Point3, Result, TriangleMesh};

/// `|A ∩ B| / |A ∪ B|`; two empty grids count as identical.
pub fn jaccard(a: &BinaryGrid, b: &BinaryGrid) -> Result<f64> {
    if !a.spec().approx_eq(b.spec(), 1e-9) {
        return Err(Error::SpecMismatch(format!(
            "cannot compare a {}³ grid with a {}³ grid at a different placement",
            a.spec().resolution,
            b.spec().resolution
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// `n` points drawn uniformly by area over the surface of `mesh`.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Point3>> {
    let tris: Vec<[Point3; 3]> = mesh.triangles().collect();
    let mut cumulative = Vec::with_capacity(tris.len());
    let mut total = 0.0;
    for t in &tris {
        total += triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("mesh has no surface area to sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let r = rng.random::<f64>() * total;
            let f = cumulative.partition_point(|&c| c <= r).min(tris.len() - 1);
            let [a, b, c] = tris[f];
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            a + (b - a) * u + (c - a) * v
        })
        .collect())
}

/// Largest distance from a surface sample of `from` to the surface of `to`.
/// Units follow the meshes (meters here).
pub fn hausdorff_one_direction(from: &TriangleMesh, to: &TriangleMesh, n_samples: usize, seed: u64) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::InvalidArgument("Hausdorff distance needs two non-empty meshes".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let samples = sample_surface(from, n_samples, seed)?;
    let bvh = Bvh::new(to);
    use rayon::prelude::*;
    Ok(samples
        .par_iter()
        .map(|p| bvh.closest_point(p).expect("non-empty target").distance)
        .reduce(|| 0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Shortest-path length from start to goal, meters.
    pub shortest: f64,
    /// Length of the executed path, meters.
    pub taken: f64,
    pub success: bool,
}

fn check_records(trials: &[TrajectoryRecord]) -> Result<()> {
    if trials.is_empty() {
        return Err(Error::InvalidArgument("SPL over an empty trial set".into()));
    }
    if let Some(t) = trials.iter().find(|t| !(t.shortest >= 0.0 && t.taken >= 0.0)) {
        return Err(Error::InvalidArgument(format!("negative or NaN path length in {t:?}")));
    }
    Ok(())
}

/// Success weighted by path length: `mean(S · l / max(p, l))`.
pub fn spl(trials: &[TrajectoryRecord]) -> Result<f64> {
    check_records(trials)?;
    let sum: f64 = trials
        .iter()
        .map(|t| {
            if !t.success {
                0.0
            } else if t.shortest == 0.0 && t.taken == 0.0 {
                1.0
            } else {
                t.shortest / t.taken.max(t.shortest)
            }
        })
        .sum();
    Ok(sum / trials.len() as f64)
}

pub fn success_rate(trials: &[TrajectoryRecord]) -> Result<f64> {
    check_records(trials)?;
    Ok(trials.iter().filter(|t| t.success).count() as f64 / trials.len() as f64)
}

/// A navigate-then-pick episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E2eRecord {
    pub shortest: f64,
    pub taken: f64,
    pub navigation_success: bool,
    pub pick_success: bool,
}

/// SPL with success meaning the pick succeeded.
pub fn e2espl(trials: &[E2eRecord]) -> Result<f64> {
    let as_nav: Vec<TrajectoryRecord> = trials
        .iter()
        .map(|t| TrajectoryRecord {
            shortest: t.shortest,
            taken: t.taken,
            success: t.pick_success,
        })
        .collect();
    spl(&as_nav)
}

/// One reconstruction comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub jaccard: f64,
    pub hausdorff_mm: f64,
    pub hausdorff_samples: usize,
    pub seed: u64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "jaccard,hausdorff_mm,hausdorff_samples,seed";

    pub fn to_csv_row(&self) -> String {
        format!("{:.9},{:.6},{},{}", self.jaccard, self.hausdorff_mm, self.hausdorff_samples, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use crate::voxel::GridSpec;
    use crate::Vector3;
    use proptest::prelude::*;

    fn spec() -> GridSpec {
        GridSpec::new(4, Point3::origin(), 1.0).unwrap()
    }

    fn grid_with(cells: &[usize]) -> BinaryGrid {
        let mut bits = vec![false; 64];
        for &c in cells {
            bits[c] = true;
        }
        BinaryGrid::from_bits(spec(), bits).unwrap()
    }

    #[test]
    fn jaccard_examples() {
        let a = grid_with(&[0, 1, 2, 3, 4, 5, 6, 7]);
        let b = grid_with(&[4, 5, 6, 7, 8, 9, 10, 11]);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &grid_with(&[20, 21])).unwrap(), 0.0);
        assert!((jaccard(&a, &b).unwrap() - 4.0 / 12.0).abs() < 1e-15);
        assert_eq!(jaccard(&grid_with(&[]), &grid_with(&[])).unwrap(), 1.0);
        let other = BinaryGrid::empty(GridSpec::new(5, Point3::origin(), 1.0).unwrap());
        assert!(matches!(jaccard(&a, &other), Err(Error::SpecMismatch(_))));
    }

    proptest! {
        #[test]
        fn jaccard_is_symmetric(xs in proptest::collection::vec(any::<bool>(), 64), ys in proptest::collection::vec(any::<bool>(), 64)) {
            let a = BinaryGrid::from_bits(spec(), xs).unwrap();
            let b = BinaryGrid::from_bits(spec(), ys).unwrap();
            prop_assert_eq!(jaccard(&a, &b).unwrap(), jaccard(&b, &a).unwrap());
            prop_assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn spl_never_exceeds_success_rate(recs in proptest::collection::vec((0.0f64..10.0, 0.0f64..20.0, any::<bool>()), 1..40)) {
            let trials: Vec<TrajectoryRecord> = recs.into_iter().map(|(l, p, s)| TrajectoryRecord { shortest: l, taken: p, success: s }).collect();
            prop_assert!(spl(&trials).unwrap() <= success_rate(&trials).unwrap() + 1e-12);
        }
    }

    #[test]
    fn spl_examples() {
        let ok = |l: f64, p: f64| TrajectoryRecord { shortest: l, taken: p, success: true };
        assert_eq!(spl(&[ok(3.0, 3.0)]).unwrap(), 1.0);
        assert_eq!(spl(&[TrajectoryRecord { success: false, ..ok(1.0, 1.0) }]).unwrap(), 0.0);
        assert_eq!(spl(&[ok(2.0, 4.0), ok(2.0, 2.0)]).unwrap(), 0.75);
        assert_eq!(spl(&[ok(0.0, 0.0)]).unwrap(), 1.0);
        assert!(spl(&[]).is_err());
    }

    #[test]
    fn e2espl_uses_pick_success() {
        let rec = |nav: bool, pick: bool| E2eRecord {
            shortest: 2.0,
            taken: 3.0,
            navigation_success: nav,
            pick_success: pick,
        };
        assert_eq!(e2espl(&[rec(true, false), rec(false, false)]).unwrap(), 0.0);
        let batch: Vec<E2eRecord> = (0..20).map(|i| rec(i % 2 == 0, i % 3 == 0)).collect();
        let flagged: Vec<TrajectoryRecord> = batch
            .iter()
            .map(|t| TrajectoryRecord { shortest: t.shortest, taken: t.taken, success: t.pick_success })
            .collect();
        assert_eq!(e2espl(&batch).unwrap(), spl(&flagged).unwrap());
    }

    #[test]
    fn hausdorff_self_is_zero() {
        let m = shapes::uv_sphere(1.0, 16, 32);
        assert!(hausdorff_one_direction(&m, &m, 2000, 1).unwrap() < 1e-12);
        assert!(hausdorff_one_direction(&m, &TriangleMesh::empty(), 10, 1).is_err());
    }

    #[test]
    fn hausdorff_translated_cube() {
        let a = shapes::cuboid(Vector3::repeat(1.0));
        let b = a.translated(&Vector3::new(0.1, 0.0, 0.0));
        let d = hausdorff_one_direction(&a, &b, 10_000, 7).unwrap();
        assert!((d - 0.1).abs() <= 0.01, "{d}");
    }

    #[test]
    fn hausdorff_concentric_spheres() {
        let a = shapes::uv_sphere(1.0, 64, 128);
        let b = shapes::uv_sphere(1.2, 64, 128);
        let d = hausdorff_one_direction(&a, &b, 10_000, 7).unwrap();
        assert!((d - 0.2).abs() <= 0.01, "{d}");
    }

    #[test]
    fn hausdorff_variance_across_seeds_is_small() {
        let a = shapes::cuboid(Vector3::repeat(1.0));
        let b = a.translated(&Vector3::new(0.1, 0.0, 0.0));
        let vals: Vec<f64> = (0..10).map(|s| hausdorff_one_direction(&a, &b, 10_000, s).unwrap()).collect();
        let mean = vals.iter().sum::<f64>() / 10.0;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 10.0;
        assert!(var < 0.02 * mean);
    }

    #[test]
    fn csv_row_shape() {
        let r = MetricReport { jaccard: 0.5, hausdorff_mm: 1.25, hausdorff_samples: 100, seed: 3 };
        assert_eq!(r.to_csv_row().split(',').count(), MetricReport::CSV_HEADER.split(',').count());
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<MetricReport>(&json).unwrap(), r);
    }
}
