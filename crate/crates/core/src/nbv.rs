//! Next-best-view from the uncertain voxels: the direction of least spread
//! of the uncertain set, and the robot placement that looks along it.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::views::CameraModel;
use crate::voxel::UncertainSet;
use crate::{Error, Point3, Result, RigidTransform, Vector3};

/// Relative eigenvalue gap below which two axes count as tied.
const TIE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalAxes {
    /// Descending.
    pub eigenvalues: [f64; 3],
    /// `eigenvectors[k]` belongs to `eigenvalues[k]`. Each has its
    /// largest-magnitude component positive.
    pub eigenvectors: [Vector3; 3],
    pub centroid: Point3,
}

/// Eigen-decomposition of the covariance (divided by `n`) of the points.
pub fn principal_axes(points: &[Point3]) -> Result<PrincipalAxes> {
    if points.len() < 3 {
        return Err(Error::DegenerateSet(format!("{} points, need at least 3", points.len())));
    }
    let n = points.len() as f64;
    let centroid = Point3::from(points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues = order.map(|k| eig.eigenvalues[k].max(0.0));
    let eigenvectors = order.map(|k| canonical_sign(eig.eigenvectors.column(k).into_owned().normalize()));
    if !(eigenvalues[0] > 0.0) || eigenvalues[1] <= 1e-12 * eigenvalues[0] {
        return Err(Error::DegenerateSet(format!(
            "uncertain set has rank < 2 (eigenvalues {eigenvalues:?})"
        )));
    }
    Ok(PrincipalAxes {
        eigenvalues,
        eigenvectors,
        centroid,
    })
}

fn canonical_sign(v: Vector3) -> Vector3 {
    if v[v.iamax()] < 0.0 {
        -v
    } else {
        v
    }
}

/// Unit direction from the uncertain set toward the next camera: the axis
/// of least variance, flipped to the side away from the current camera.
/// Tied smallest eigenvalues resolve to the candidate most orthogonal to
/// the current viewing direction.
pub fn next_best_view(uncertain: &UncertainSet, current: &CameraModel) -> Result<Vector3> {
    let axes = principal_axes(&uncertain.centroids)?;
    let to_camera = (current.position() - axes.centroid).try_normalize(1e-12).unwrap_or_else(|| -current.forward());
    let [l0, l1, l2] = axes.eigenvalues;
    let tied = |l: f64| l - l2 <= TIE_TOLERANCE * l0;
    let v = if tied(l0) {
        // Isotropic: pick the principal axis closest to perpendicular.
        *axes
            .eigenvectors
            .iter()
            .min_by(|a, b| a.dot(&to_camera).abs().total_cmp(&b.dot(&to_camera).abs()))
            .expect("three axes")
    } else if tied(l1) {
        // Tied plane: the in-plane direction perpendicular to the camera.
        let (a, b) = (axes.eigenvectors[1], axes.eigenvectors[2]);
        let w = a * to_camera.dot(&b) - b * to_camera.dot(&a);
        w.try_normalize(1e-9).unwrap_or(b)
    } else {
        axes.eigenvectors[2]
    };
    let d = v.dot(&to_camera);
    Ok(if d > 1e-12 {
        -v
    } else if d < -1e-12 {
        v
    } else {
        canonical_sign(v)
    })
}

/// Fetch-like kinematics. Heights are above the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotGeometry {
    /// Camera height with the torso fully lowered.
    pub base_camera_height: f64,
    pub torso_min: f64,
    pub torso_max: f64,
    /// Robot base in the world (z-up, base on the floor).
    pub pose: RigidTransform,
}

impl Default for RobotGeometry {
    fn default() -> Self {
        Self {
            base_camera_height: 1.0,
            torso_min: 0.0,
            torso_max: 0.4,
            pose: RigidTransform::identity(),
        }
    }
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.torso_min <= self.torso_max) {
            return Err(Error::InvalidArgument(format!(
                "torso range [{}, {}] is empty",
                self.torso_min, self.torso_max
            )));
        }
        if !(self.base_camera_height >= 0.0) {
            return Err(Error::InvalidArgument("base camera height must be non-negative".into()));
        }
        Ok(())
    }

    pub fn camera_height_range(&self) -> (f64, f64) {
        (self.base_camera_height + self.torso_min, self.base_camera_height + self.torso_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NbvSolution {
    pub v_nbv: Vector3,
    /// Base target in the robot frame, on the floor.
    pub p_target: Point3,
    /// Camera pitch, positive looking down, radians.
    pub theta_head: f64,
    pub h_torso: f64,
    pub d_optimal: f64,
    /// Set when the torso limits kept the camera off the requested height.
    pub clamped: bool,
    /// Set when `v_nbv` was vertical and the current bearing was kept.
    pub vertical_fallback: bool,
}

impl NbvSolution {
    /// Camera position implied by the solution, robot frame.
    pub fn camera_position(&self, robot: &RobotGeometry) -> Point3 {
        Point3::new(self.p_target.x, self.p_target.y, robot.base_camera_height + self.h_torso)
    }
}

/// Places the base `d_optimal` from the centroid's ground projection along
/// the horizontal part of `v_nbv`, then lifts the torso toward the height
/// at which the camera looks along `−v_nbv`, and pitches the head at the
/// centroid from wherever the torso ended up. All inputs in the robot frame.
pub fn target_pose(v_nbv: &Vector3, centroid: &Point3, robot: &RobotGeometry, d_optimal: f64) -> Result<NbvSolution> {
    robot.validate()?;
    if !(d_optimal > 0.0) {
        return Err(Error::InvalidArgument(format!("d_optimal {d_optimal} must be positive")));
    }
    let v = v_nbv
        .try_normalize(1e-12)
        .ok_or_else(|| Error::InvalidArgument("v_nbv has zero length".into()))?;
    let horizontal = nalgebra::Vector2::new(v.x, v.y);
    let (dir, lift, vertical_fallback) = if horizontal.norm() < 1e-6 {
        // Keep the current bearing: stay on the robot's side of the object.
        let toward_robot = nalgebra::Vector2::new(-centroid.x, -centroid.y);
        let dir = toward_robot.try_normalize(1e-12).unwrap_or(nalgebra::Vector2::new(-1.0, 0.0));
        (dir, if v.z > 0.0 { robot.torso_max } else { robot.torso_min }, true)
    } else {
        let h = horizontal.norm();
        let desired = centroid.z + d_optimal * v.z / h;
        (horizontal / h, desired - robot.base_camera_height, false)
    };
    let h_torso = lift.clamp(robot.torso_min, robot.torso_max);
    let camera_height = robot.base_camera_height + h_torso;
    let theta_head = (camera_height - centroid.z).atan2(d_optimal);
    let p = nalgebra::Vector2::new(centroid.x, centroid.y) + dir * d_optimal;
    Ok(NbvSolution {
        v_nbv: v,
        p_target: Point3::new(p.x, p.y, 0.0),
        theta_head,
        h_torso,
        d_optimal,
        clamped: (h_torso - lift).abs() > 1e-12,
        vertical_fallback,
    })
}
