//! Isolating a tabletop object: keep a horizontal band around the robot,
//! find the support plane with RANSAC, keep what lies above it.

use nalgebra::Matrix3;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Plane, PointCloud};
use crate::{Error, Point3, Result, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    /// Inner radius of the horizontal band, meters.
    pub r_min: f64,
    /// Outer radius of the horizontal band, meters.
    pub r_max: f64,
    pub ransac_iterations: usize,
    /// Point-to-plane distance for a RANSAC inlier, meters.
    pub inlier_threshold: f64,
    pub up_axis: Vector3,
    /// Maximum angle between a plane normal and `up_axis`, degrees.
    pub parallel_tolerance: f64,
    /// Height above the plane a point must exceed to count as object, meters.
    pub above_margin: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            r_min: 0.3,
            r_max: 0.7,
            ransac_iterations: 1000,
            inlier_threshold: 0.005,
            up_axis: Vector3::z(),
            parallel_tolerance: 10.0,
            above_margin: 0.005,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min >= 0.0 && self.r_min < self.r_max) {
            return Err(Error::InvalidArgument(format!(
                "band radii must satisfy 0 <= r_min < r_max, got {} and {}",
                self.r_min, self.r_max
            )));
        }
        if !(self.inlier_threshold > 0.0 && self.parallel_tolerance > 0.0 && self.above_margin > 0.0) {
            return Err(Error::InvalidArgument("segmentation thresholds must be positive".into()));
        }
        if self.ransac_iterations == 0 {
            return Err(Error::InvalidArgument("ransac_iterations must be at least 1".into()));
        }
        if (self.up_axis.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument("up_axis must be a unit vector".into()));
        }
        Ok(())
    }
}

/// Points whose horizontal distance from the sensor origin lies in
/// `[r_min, r_max]`. "Horizontal" means orthogonal to `up_axis`.
pub fn band_filter(cloud: &PointCloud, params: &SegmentationParams) -> PointCloud {
    let up = params.up_axis;
    cloud.filter(|p| {
        let r = (p.coords - up * up.dot(&p.coords)).norm();
        r >= params.r_min && r <= params.r_max
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    /// Normal oriented toward `up_axis`.
    pub plane: Plane,
    /// Indices into the input cloud, ascending.
    pub inliers: Vec<usize>,
}

/// RANSAC over seeded three-point hypotheses restricted to planes within
/// `parallel_tolerance` of horizontal, followed by a least-squares refit
/// on the winning inliers. Ties in inlier count go to the lower plane.
pub fn ransac_plane(cloud: &PointCloud, params: &SegmentationParams, seed: u64) -> Result<PlaneFit> {
    params.validate()?;
    let pts = cloud.points();
    if pts.len() < 3 {
        return Err(Error::InvalidArgument(format!("RANSAC needs at least 3 points, got {}", pts.len())));
    }
    let up = params.up_axis;
    let cos_tol = params.parallel_tolerance.to_radians().cos();

    // Hypotheses are drawn sequentially so the result is independent of how
    // the scoring below is scheduled.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hypotheses: Vec<Plane> = (0..params.ransac_iterations)
        .filter_map(|_| {
            let idx = sample(&mut rng, pts.len(), 3);
            let (a, b, c) = (pts[idx.index(0)], pts[idx.index(1)], pts[idx.index(2)]);
            let n = (b - a).cross(&(c - a));
            let n = n.try_normalize(1e-12)?;
            let n = if n.dot(&up) < 0.0 { -n } else { n };
            (n.dot(&up) >= cos_tol).then(|| Plane::from_point_normal(&a, n).ok()).flatten()
        })
        .collect();
    if hypotheses.is_empty() {
        return Err(Error::NoPlane {
            iterations: params.ransac_iterations,
        });
    }

    let counts: Vec<usize> = hypotheses
        .par_iter()
        .map(|h| pts.iter().filter(|p| h.signed_distance(p).abs() <= params.inlier_threshold).count())
        .collect();
    let best = (0..hypotheses.len())
        .min_by(|&a, &b| {
            counts[b]
                .cmp(&counts[a])
                .then(hypotheses[a].offset.total_cmp(&hypotheses[b].offset))
                .then(a.cmp(&b))
        })
        .expect("non-empty");
    let hypothesis = hypotheses[best];
    let inliers = inliers_of(pts, &hypothesis, params.inlier_threshold);

    let plane = refit(pts, &inliers, &up)
        .filter(|p| p.normal.dot(&up) >= cos_tol)
        .unwrap_or(hypothesis);
    let refit_inliers = inliers_of(pts, &plane, params.inlier_threshold);
    let inliers = if refit_inliers.len() >= inliers.len() { refit_inliers } else { inliers };
    Ok(PlaneFit { plane, inliers })
}

fn inliers_of(pts: &[Point3], plane: &Plane, threshold: f64) -> Vec<usize> {
    pts.iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() <= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Total least squares plane through the selected points.
fn refit(pts: &[Point3], indices: &[usize], up: &Vector3) -> Option<Plane> {
    if indices.len() < 3 {
        return None;
    }
    let n = indices.len() as f64;
    let mean = indices.iter().fold(Vector3::zeros(), |acc, &i| acc + pts[i].coords) / n;
    let mut cov = Matrix3::zeros();
    for &i in indices {
        let d = pts[i].coords - mean;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let normal: Vector3 = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
    let normal = if normal.dot(up) < 0.0 { -normal } else { normal };
    Plane::from_point_normal(&Point3::from(mean), normal).ok()
}

/// Points strictly more than `margin` above the plane (`n·p − offset > margin`).
pub fn extract_above_plane(cloud: &PointCloud, plane: &Plane, margin: f64) -> PointCloud {
    cloud.filter(|p| plane.signed_distance(p) > margin)
}

/// Band filter, support plane and above-plane extraction in one call.
pub fn isolate_object(cloud: &PointCloud, params: &SegmentationParams, seed: u64) -> Result<(PointCloud, PlaneFit)> {
    let band = band_filter(cloud, params);
    let fit = ransac_plane(&band, params, seed)?;
    let object = extract_above_plane(&band, &fit.plane, params.above_margin);
    Ok((object, fit))
}
