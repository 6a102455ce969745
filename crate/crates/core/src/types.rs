//! Foundational geometric types and sensor-frame reconciliation.
//!
//! The LiDAR frame is the canonical body frame for all downstream math.
//! IMU samples are mapped into it immediately at ingestion through
//! [`imu_vector_to_lidar`] and [`imu_attitude_to_lidar`], so no other
//! module ever deals with the raw IMU axes.
//!
//! Conventions: right-handed, radians internally, degrees only at I/O
//! boundaries. Timestamps are integer nanoseconds; time differences are
//! computed in `f64` seconds.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

/// 3-vector in meters (or rad/s, m/s² depending on context).
pub type Vec3 = nalgebra::Vector3<f64>;

/// Nanosecond timestamp on a monotonic epoch.
pub type StampNs = i64;

pub const NANOS_PER_SEC: f64 = 1e9;

/// Convert a nanosecond interval to seconds.
pub fn ns_to_sec(ns: i64) -> f64 {
    ns as f64 / NANOS_PER_SEC
}

/// Convert a second interval to whole nanoseconds (round to nearest).
pub fn sec_to_ns(sec: f64) -> i64 {
    (sec * NANOS_PER_SEC).round() as i64
}

/// Map an IMU-frame vector (angular rate, acceleration) onto the LiDAR
/// axes: `(x, y, z) ↦ (−x, y, −z)`. The mapping is an involution.
pub fn imu_vector_to_lidar(v: Vec3) -> Vec3 {
    Vec3::new(-v.x, v.y, -v.z)
}

/// Map an IMU attitude triple `(roll, pitch, yaw)` in radians onto the
/// LiDAR axes: `(R, P, Y) ↦ (−P, R, Y)`.
///
/// The mapping is applied to the angle triple directly, exactly as the
/// sensor-frame relation states it. For large angles this is not the same
/// as conjugating the corresponding rotation matrix; the triple form is
/// used deliberately.
pub fn imu_attitude_to_lidar(rpy: Vec3) -> Vec3 {
    Vec3::new(-rpy.y, rpy.x, rpy.z)
}

/// A 3-D rotation stored as a unit quaternion and exposed as an
/// orthonormal matrix (`RᵀR = I`, `det R = +1`).
///
/// Every multiplicative update renormalizes the quaternion, which is the
/// nearest-unit-norm projection in quaternion space; long chains of
/// compositions therefore stay orthonormal to ~1e-15.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation(UnitQuaternion<f64>);

/// Below this rotation-vector norm the exponential map switches to its
/// truncated series to avoid 0/0.
const SMALL_ANGLE: f64 = 1e-8;

impl Rotation {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    /// Exponential map: rotation vector (axis × angle, radians) to rotation.
    ///
    /// Closed-form Rodrigues in quaternion form, with the small-angle
    /// series below `‖θ‖ < 1e-8`.
    pub fn exp(theta: Vec3) -> Self {
        let angle = theta.norm();
        let q = if angle < SMALL_ANGLE {
            let a2 = angle * angle;
            // cos(a/2) and sin(a/2)/a expanded to O(a⁴)
            let w = 1.0 - a2 / 8.0 + a2 * a2 / 384.0;
            let s = 0.5 - a2 / 48.0;
            Quaternion::new(w, theta.x * s, theta.y * s, theta.z * s)
        } else {
            let (sin_h, cos_h) = (0.5 * angle).sin_cos();
            let s = sin_h / angle;
            Quaternion::new(cos_h, theta.x * s, theta.y * s, theta.z * s)
        };
        Rotation(UnitQuaternion::from_quaternion(q))
    }

    /// Logarithm map: rotation to rotation vector.
    pub fn log(&self) -> Vec3 {
        self.0.scaled_axis()
    }

    /// Nearest rotation to an arbitrary (approximately orthonormal) matrix.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Rotation(UnitQuaternion::from_matrix(m))
    }

    /// From quaternion components `(w, x, y, z)`; renormalized.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        Rotation(UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)))
    }

    /// Rotation about +z by `yaw` radians. Convenience for tests and scenes.
    pub fn from_yaw(yaw: f64) -> Self {
        Self::exp(Vec3::new(0.0, 0.0, yaw))
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    /// Quaternion components `(w, x, y, z)`, unit norm, `w ≥ 0`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        if q.w < 0.0 {
            [-q.w, -q.i, -q.j, -q.k]
        } else {
            [q.w, q.i, q.j, q.k]
        }
    }

    /// Composition `self · other`, renormalized.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(UnitQuaternion::new_normalize((self.0 * other.0).into_inner()))
    }

    pub fn inverse(&self) -> Rotation {
        Rotation(self.0.inverse())
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        self.0 * v
    }

    /// Frobenius departure from orthonormality, `‖RᵀR − I‖`.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.matrix();
        (m.transpose() * m - Matrix3::identity()).norm()
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

/// Rigid transform: `p ↦ R·p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Pose { rotation: Rotation::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Pose { rotation, translation }
    }

    /// Apply the transform: `R·p + t`.
    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// Rotate a direction without translating.
    pub fn transform_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }

    pub fn inverse(&self) -> Pose {
        let rot_inv = self.rotation.inverse();
        Pose { rotation: rot_inv, translation: -rot_inv.rotate(self.translation) }
    }

    /// Composition: `(self ∘ other)(p) = self(other(p))`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.rotate(other.translation) + self.translation,
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Free-function form of [`Pose::transform_point`].
pub fn transform_point(pose: &Pose, p: Vec3) -> Vec3 {
    pose.transform_point(p)
}

/// Which rail of the pair; left is the one with smaller lateral
/// coordinate in the frame at hand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RailSide {
    Left,
    Right,
}

impl RailSide {
    pub fn sign(self) -> f64 {
        match self {
            RailSide::Left => -1.0,
            RailSide::Right => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RailSide::Left => "left",
            RailSide::Right => "right",
        }
    }
}

/// One range return in the sensor frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LidarPoint {
    /// Position in the sensor frame, meters.
    pub position: Vec3,
    /// Reflection intensity, unitless, ≥ 0.
    pub intensity: f64,
    /// Laser ring index, `0 ..= 127`.
    pub channel: u16,
    /// Nanoseconds since the frame stamp.
    pub time_offset_ns: i64,
}

/// One LiDAR sweep: a stamped set of points grouped by channel, points
/// within a channel ordered by azimuth.
#[derive(Clone, Debug, Default)]
pub struct LidarFrame {
    pub stamp_ns: StampNs,
    pub points: Vec<LidarPoint>,
}

impl LidarFrame {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Iterate over maximal runs of consecutive points sharing a channel.
    pub fn channel_runs(&self) -> ChannelRuns<'_> {
        ChannelRuns { points: &self.points, start: 0 }
    }
}

pub struct ChannelRuns<'a> {
    points: &'a [LidarPoint],
    start: usize,
}

impl<'a> Iterator for ChannelRuns<'a> {
    type Item = (u16, &'a [LidarPoint]);

    fn next(&mut self) -> Option<Self::Item> {
        if self.start >= self.points.len() {
            return None;
        }
        let channel = self.points[self.start].channel;
        let mut end = self.start + 1;
        while end < self.points.len() && self.points[end].channel == channel {
            end += 1;
        }
        let run = &self.points[self.start..end];
        self.start = end;
        Some((channel, run))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn imu_vector_mapping_matches_axis_matrix() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(imu_vector_to_lidar(v), Vec3::new(-1.0, 2.0, -3.0));
        assert_eq!(imu_vector_to_lidar(Vec3::zeros()), Vec3::zeros());
        // The axis matrix is an involution.
        assert_eq!(imu_vector_to_lidar(imu_vector_to_lidar(v)), v);
    }

    #[test]
    fn imu_attitude_mapping_swaps_roll_pitch() {
        let rpy = Vec3::new(0.1, 0.2, 0.3);
        let mapped = imu_attitude_to_lidar(rpy);
        assert_relative_eq!(mapped, Vec3::new(-0.2, 0.1, 0.3), epsilon = 0.0);
        assert_eq!(imu_attitude_to_lidar(Vec3::zeros()), Vec3::zeros());
        // Yaw passes through.
        assert_eq!(imu_attitude_to_lidar(Vec3::new(0.0, 0.0, PI)), Vec3::new(0.0, 0.0, PI));
    }

    #[test]
    fn transform_point_basics() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(Pose::identity().transform_point(p), p);

        let shift = Pose::new(Rotation::identity(), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(shift.transform_point(Vec3::zeros()), Vec3::new(1.0, 0.0, 0.0));

        // 90° yaw sends +x to +y (hand rotation-matrix evaluation).
        let yaw = Pose::new(Rotation::from_yaw(FRAC_PI_2), Vec3::zeros());
        let out = yaw.transform_point(Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(out, Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn exp_log_round_trip_and_small_angle_series() {
        let theta = Vec3::new(0.3, -0.2, 0.9);
        assert_relative_eq!(Rotation::exp(theta).log(), theta, epsilon = 1e-12);

        let tiny = Vec3::new(3e-9, -2e-9, 1e-9);
        assert_relative_eq!(Rotation::exp(tiny).log(), tiny, max_relative = 1e-6);
        assert_eq!(Rotation::exp(Vec3::zeros()).matrix(), Matrix3::identity());
    }

    #[test]
    fn composition_keeps_orthonormality_over_many_updates() {
        // 10⁶-composition drift check from the rotation contract.
        let mut r = Rotation::identity();
        let step = Rotation::exp(Vec3::new(1e-3, 2e-3, -0.5e-3));
        for _ in 0..1_000_000 {
            r = r.compose(&step);
        }
        assert!(r.orthonormality_error() < 1e-9);
        assert_relative_eq!(r.matrix().determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn channel_runs_group_consecutive_points() {
        let mk = |c: u16| LidarPoint {
            position: Vec3::zeros(),
            intensity: 0.0,
            channel: c,
            time_offset_ns: 0,
        };
        let frame = LidarFrame { stamp_ns: 0, points: vec![mk(0), mk(0), mk(1), mk(3), mk(3)] };
        let runs: Vec<(u16, usize)> =
            frame.channel_runs().map(|(c, pts)| (c, pts.len())).collect();
        assert_eq!(runs, vec![(0, 2), (1, 1), (3, 2)]);
    }

    proptest! {
        #[test]
        fn transform_inverse_round_trip(
            px in -100.0..100.0f64, py in -100.0..100.0f64, pz in -100.0..100.0f64,
            ax in -3.0..3.0f64, ay in -3.0..3.0f64, az in -3.0..3.0f64,
            tx in -50.0..50.0f64, ty in -50.0..50.0f64, tz in -50.0..50.0f64,
        ) {
            let pose = Pose::new(Rotation::exp(Vec3::new(ax, ay, az)), Vec3::new(tx, ty, tz));
            let p = Vec3::new(px, py, pz);
            let back = pose.transform_point(pose.inverse().transform_point(p));
            prop_assert!((back - p).norm() < 1e-12 * (1.0 + p.norm()));
        }

        #[test]
        fn imu_vector_mapping_preserves_norm(
            x in -100.0..100.0f64, y in -100.0..100.0f64, z in -100.0..100.0f64,
        ) {
            let v = Vec3::new(x, y, z);
            prop_assert!((imu_vector_to_lidar(v).norm() - v.norm()).abs() < 1e-12);
        }
    }
}
