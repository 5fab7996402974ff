//! Seeded odometry noise for registration ablations.
//!
//! A motion is replayed as `steps` equal increments (same rotation axis,
//! angle split evenly, translation chosen so the increments recompose to the
//! exact motion). Each increment's translation and rotation angle are then
//! scaled by independent factors in `[1 − f, 1 + f]`.

use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, RigidTransform, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    Uniform,
    /// Normal with σ = fraction / 2, clipped to `±fraction`.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdometryNoiseModel {
    /// Relative translation error bound per increment.
    pub fraction: f64,
    /// Relative rotation-angle error bound per increment.
    pub rotation_fraction: f64,
    pub steps: usize,
    pub seed: u64,
    pub distribution: NoiseDistribution,
}

impl Default for OdometryNoiseModel {
    fn default() -> Self {
        Self {
            fraction: 0.05,
            rotation_fraction: 0.05,
            steps: 10,
            seed: 0,
            distribution: NoiseDistribution::Uniform,
        }
    }
}

impl OdometryNoiseModel {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("fraction", self.fraction), ("rotation_fraction", self.rotation_fraction)] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!("{name} {f} must lie in [0, 1)")));
            }
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn factor(&self, rng: &mut ChaCha8Rng, bound: f64) -> f64 {
        if bound == 0.0 {
            return 1.0;
        }
        let e = match self.distribution {
            NoiseDistribution::Uniform => rng.random_range(-bound..=bound),
            NoiseDistribution::Normal => Normal::new(0.0, bound / 2.0)
                .expect("positive sigma")
                .sample(rng)
                .clamp(-bound, bound),
        };
        1.0 + e
    }
}

/// `true_motion` as seen through noisy odometry.
pub fn perturb_registration(true_motion: &RigidTransform, model: &OdometryNoiseModel) -> Result<RigidTransform> {
    model.validate()?;
    if model.fraction == 0.0 && model.rotation_fraction == 0.0 {
        return Ok(*true_motion);
    }
    let n = model.steps;
    let (axis, angle) = true_motion
        .rotation
        .axis_angle()
        .unwrap_or((Vector3::z_axis(), 0.0));
    let inc = UnitQuaternion::from_axis_angle(&axis, angle / n as f64);
    // Σ_k R_inc^k · Δt = t  ⇒  Δt = (Σ_k R_inc^k)⁻¹ t.
    let r_inc = inc.to_rotation_matrix().into_inner();
    let mut sum = nalgebra::Matrix3::zeros();
    let mut power = nalgebra::Matrix3::identity();
    for _ in 0..n {
        sum += power;
        power *= r_inc;
    }
    let step_t = sum
        .try_inverse()
        .ok_or_else(|| Error::DegenerateInput("motion cannot be split into equal increments".into()))?
        * true_motion.translation;

    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut acc = RigidTransform::identity();
    for _ in 0..n {
        let ft = model.factor(&mut rng, model.fraction);
        let fr = model.factor(&mut rng, model.rotation_fraction);
        let step = RigidTransform::new(
            UnitQuaternion::from_axis_angle(&axis, angle / n as f64 * fr),
            step_t * ft,
        );
        acc = acc.compose(&step);
    }
    Ok(acc)
}
