//! Points, rigid transforms, planes and bounding boxes.

use nalgebra::{Matrix3, Quaternion, Rotation3, Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::{Error, Point3, Result, Vector3};

/// Finite 3D points in meters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.points.iter().copied())
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    /// Keeps the points for which `keep` returns true, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&Point3) -> bool) -> PointCloud {
        PointCloud {
            points: self.points.iter().copied().filter(|p| keep(p)).collect(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
    }
}

/// Rotation (unit quaternion, stored scalar-last) followed by a translation.
///
/// `a.compose(&b)` applies `b` first, then `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "TransformRepr", try_from = "TransformRepr")]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3,
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    /// `[x, y, z, w]`
    rotation: [f64; 4],
    translation: [f64; 3],
}

impl From<RigidTransform> for TransformRepr {
    fn from(t: RigidTransform) -> Self {
        let q = t.rotation.quaternion().coords;
        Self {
            rotation: [q.x, q.y, q.z, q.w],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl TryFrom<TransformRepr> for RigidTransform {
    type Error = String;

    fn try_from(r: TransformRepr) -> std::result::Result<Self, String> {
        let [x, y, z, w] = r.rotation;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            return Err(format!("rotation quaternion norm {norm} is not 1"));
        }
        Ok(Self {
            rotation: UnitQuaternion::from_quaternion(q),
            translation: Vector3::from(r.translation),
        })
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3) -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self {
            rotation,
            translation: Vector3::zeros(),
        }
    }

    /// Rotation about the world `z` axis.
    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw))
    }

    /// Builds a transform from a rotation matrix whose columns are the
    /// images of the unit axes. The matrix is re-orthonormalized.
    pub fn from_matrix_and_translation(m: &Matrix3<f64>, translation: Vector3) -> Self {
        let rot = Rotation3::from_matrix(m);
        Self {
            rotation: UnitQuaternion::from_rotation_matrix(&rot),
            translation,
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }

    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    /// Position of the frame origin, i.e. the translation as a point.
    pub fn origin(&self) -> Point3 {
        Point3::from(self.translation)
    }
}

/// Applies `t` to every point, preserving order.
pub fn transform_cloud(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| t.transform_point(p)).collect(),
    }
}

/// Plane `normal · x = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Unit<Vector3>,
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: Vector3, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n.is_finite() && n > 1e-12) || !offset.is_finite() {
            return Err(Error::DegenerateInput("plane normal has zero length".into()));
        }
        Ok(Self {
            normal: Unit::new_unchecked(normal / n),
            offset: offset / n,
        })
    }

    pub fn from_point_normal(point: &Point3, normal: Vector3) -> Result<Self> {
        let n = normal.try_normalize(1e-12).ok_or_else(|| Error::DegenerateInput("plane normal has zero length".into()))?;
        Ok(Self {
            normal: Unit::new_unchecked(n),
            offset: n.dot(&point.coords),
        })
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    pub fn flipped(&self) -> Plane {
        Plane {
            normal: -self.normal,
            offset: -self.offset,
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Self {
        Self { min, max }
    }

    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points(points: impl IntoIterator<Item = Point3>) -> Option<Self> {
        let mut b = Self::empty();
        let mut any = false;
        for p in points {
            b.grow(&p);
            any = true;
        }
        any.then_some(b)
    }

    pub fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vector3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn largest_axis(&self) -> usize {
        self.extent().imax()
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Point3) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Slab test. Returns the parametric interval `[t_enter, t_exit]` of the
    /// ray inside the box, clipped to `[t_min, t_max]`.
    pub fn ray_interval(&self, origin: &Point3, inv_dir: &Vector3, t_min: f64, t_max: f64) -> Option<(f64, f64)> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for i in 0..3 {
            let mut near = (self.min[i] - origin[i]) * inv_dir[i];
            let mut far = (self.max[i] - origin[i]) * inv_dir[i];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN arises from 0 * inf when the origin lies on a slab plane of
            // an axis-parallel ray; such slabs do not constrain the interval.
            if !near.is_nan() {
                t0 = t0.max(near);
            }
            if !far.is_nan() {
                t1 = t1.min(far);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn rotation_matrix_about_z(angle: f64) -> Matrix3<f64> {
        let (s, c) = angle.sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn identity_transform_leaves_cloud_unchanged() {
        let cloud = PointCloud::new(vec![Point3::new(1.0, -2.0, 3.5), Point3::new(0.0, 0.25, -7.0)]).unwrap();
        assert_eq!(transform_cloud(&cloud, &RigidTransform::identity()), cloud);
    }

    #[test]
    fn pure_translation_moves_origin() {
        let cloud = PointCloud::new(vec![Point3::origin()]).unwrap();
        let t = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(transform_cloud(&cloud, &t).points()[0], Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn quarter_yaw_matches_rotation_matrix() {
        let t = RigidTransform::from_yaw(FRAC_PI_2);
        let p = Point3::new(1.0, 0.0, 0.0);
        let got = t.transform_point(&p);
        let expected = rotation_matrix_about_z(FRAC_PI_2) * p.coords;
        assert!((got.coords - expected).norm() < 1e-9);
        assert!((got - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn non_finite_points_rejected() {
        assert!(PointCloud::new(vec![Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
        assert!(PointCloud::new(vec![]).unwrap().is_empty());
    }

    #[test]
    fn transform_serializes_scalar_last() {
        let t = RigidTransform::from_yaw(FRAC_PI_2);
        let json = serde_json::to_value(t).unwrap();
        let rot = json["rotation"].as_array().unwrap();
        assert!((rot[3].as_f64().unwrap() - (FRAC_PI_2 / 2.0).cos()).abs() < 1e-12);
        let back: RigidTransform = serde_json::from_value(json).unwrap();
        assert!(back.rotation.angle_to(&t.rotation) < 1e-12);
    }

    #[test]
    fn non_unit_quaternion_rejected_on_deserialize() {
        let json = r#"{"rotation":[0,0,0,2],"translation":[0,0,0]}"#;
        assert!(serde_json::from_str::<RigidTransform>(json).is_err());
    }

    #[test]
    fn plane_normalizes() {
        let p = Plane::new(Vector3::new(0.0, 0.0, 2.0), 1.4).unwrap();
        assert!((p.offset - 0.7).abs() < 1e-12);
        assert!((p.signed_distance(&Point3::new(3.0, 1.0, 0.75)) - 0.05).abs() < 1e-12);
        assert!(Plane::new(Vector3::zeros(), 1.0).is_err());
    }

    #[test]
    fn ray_interval_through_unit_box() {
        let b = Aabb::new(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let dir = Vector3::new(1.0, 0.0, 0.0);
        let inv = dir.map(|c| 1.0 / c);
        let (t0, t1) = b.ray_interval(&Point3::new(-1.0, 0.5, 0.5), &inv, 0.0, f64::INFINITY).unwrap();
        assert!((t0 - 1.0).abs() < 1e-12 && (t1 - 2.0).abs() < 1e-12);
        assert!(b.ray_interval(&Point3::new(-1.0, 2.0, 0.5), &inv, 0.0, f64::INFINITY).is_none());
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            -3.2f64..3.2,
            prop::array::uniform3(-5.0f64..5.0),
        )
            .prop_filter_map("zero axis", |(axis, angle, t)| {
                let axis = Vector3::from(axis).try_normalize(1e-3)?;
                Some(RigidTransform::new(
                    UnitQuaternion::from_axis_angle(&Unit::new_unchecked(axis), angle),
                    Vector3::from(t),
                ))
            })
    }

    proptest! {
        #[test]
        fn inverse_round_trips_clouds(t in arb_transform(), pts in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 0..20)) {
            let cloud = PointCloud::new(pts.into_iter().map(Point3::from).collect()).unwrap();
            let back = transform_cloud(&transform_cloud(&cloud, &t), &t.inverse());
            for (a, b) in cloud.points().iter().zip(back.points()) {
                prop_assert!((a - b).amax() < 1e-7);
            }
        }

        #[test]
        fn composition_is_associative(a in arb_transform(), b in arb_transform(), c in arb_transform()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(left.rotation.angle_to(&right.rotation) < 1e-9);
            prop_assert!((left.translation - right.translation).amax() < 1e-9);
            let id = a.inverse().compose(&a);
            prop_assert!(id.rotation.angle() < 1e-9);
            prop_assert!(id.translation.amax() < 1e-9);
            prop_assert!((a.rotation.quaternion().norm() - 1.0).abs() < 1e-9);
        }
    }
}
