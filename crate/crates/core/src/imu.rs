//! IMU measurement model, dead-reckoning propagation, and preintegrated
//! motion increments between keyframes.
//!
//! The estimator side is deterministic: measurement noise is treated as
//! zero and biases are constant per recording. Noise injection lives in
//! the synthetic generator only.
//!
//! A reading at time `t` is interpreted as integrating the interval
//! `[t, t + dt]` (delta-angle / delta-velocity convention divided by the
//! sample period), which is what the synthetic generator emits.

use crate::types::{ns_to_sec, Rotation, StampNs, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest tolerated integration step, seconds. Larger gaps are rejected.
pub const MAX_STEP_SEC: f64 = 0.1;

/// One gyroscope + accelerometer reading, already mapped to the LiDAR
/// body frame at ingestion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub stamp_ns: StampNs,
    /// ŵ, rad/s.
    pub angular_velocity: Vec3,
    /// â, m/s².
    pub linear_acceleration: Vec3,
}

/// Constant sensor biases.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BiasState {
    /// b^w, rad/s.
    pub gyro_bias: Vec3,
    /// b^a, m/s².
    pub accel_bias: Vec3,
}

/// Body pose-velocity state in the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// World ← body.
    pub rotation: Rotation,
    pub stamp_ns: StampNs,
}

impl NavState {
    pub fn at_rest(stamp_ns: StampNs) -> Self {
        NavState {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            rotation: Rotation::identity(),
            stamp_ns,
        }
    }
}

/// Relative body motion between two timestamps, independent of the global
/// state at the first:
///
/// ```text
/// Δv = R_iᵀ (v_j − v_i − g Δt)
/// Δp = R_iᵀ (p_j − p_i − v_i Δt − ½ g Δt²)
/// ΔR = R_iᵀ R_j
/// ```
#[derive(Clone, Copy, Debug)]
pub struct PreintegratedDelta {
    pub delta_v: Vec3,
    pub delta_p: Vec3,
    pub delta_r: Rotation,
    /// Δt, seconds, > 0.
    pub delta_t: f64,
}

impl PreintegratedDelta {
    /// Predict the state at `j` given the state at `i` and gravity.
    pub fn predict(&self, start: &NavState, gravity: &GravityModel) -> NavState {
        let dt = self.delta_t;
        let r_i = start.rotation;
        NavState {
            position: start.position
                + start.velocity * dt
                + 0.5 * gravity.g * dt * dt
                + r_i.rotate(self.delta_p),
            velocity: start.velocity + gravity.g * dt + r_i.rotate(self.delta_v),
            rotation: r_i.compose(&self.delta_r),
            stamp_ns: start.stamp_ns + crate::types::sec_to_ns(dt),
        }
    }
}

/// Fixed world-frame gravity vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GravityModel {
    pub g: Vec3,
}

impl GravityModel {
    /// Standard gravity, pointing down the world −z axis.
    pub fn standard() -> Self {
        GravityModel { g: Vec3::new(0.0, 0.0, -9.80665) }
    }

    pub fn new(g: Vec3) -> Self {
        GravityModel { g }
    }
}

impl Default for GravityModel {
    fn default() -> Self {
        Self::standard()
    }
}

/// How raw readings are turned into per-step increments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationScheme {
    /// Each interval uses the reading at its start (the kinematic update
    /// in its printed form). Default.
    #[default]
    ForwardEuler,
    /// Each interval uses the mean of the readings at its ends.
    Midpoint,
}

#[derive(Debug, Error, PartialEq)]
pub enum ImuError {
    #[error("IMU sample at {sample_ns} ns precedes state at {state_ns} ns")]
    NonMonotonicTime { state_ns: StampNs, sample_ns: StampNs },
    #[error("integration step of {dt} s exceeds the {MAX_STEP_SEC} s limit")]
    ExcessiveGap { dt: f64 },
    #[error("empty IMU stream")]
    EmptyStream,
    #[error("integration step must be positive, got {dt} s")]
    NonPositiveStep { dt: f64 },
}

/// Advance `state` by one step `dt` using `sample`:
///
/// ```text
/// v' = v + g·dt + R(â − b^a)·dt
/// p' = p + v·dt + ½g·dt² + ½R(â − b^a)·dt²
/// R' = R · exp((ŵ − b^w)·dt)
/// ```
///
/// Noise terms are zero on the estimator side.
pub fn propagate(
    state: &NavState,
    sample: &ImuSample,
    bias: &BiasState,
    gravity: &GravityModel,
    dt: f64,
) -> Result<NavState, ImuError> {
    if dt <= 0.0 {
        return Err(ImuError::NonPositiveStep { dt });
    }
    if dt > MAX_STEP_SEC {
        return Err(ImuError::ExcessiveGap { dt });
    }
    if sample.stamp_ns < state.stamp_ns {
        return Err(ImuError::NonMonotonicTime {
            state_ns: state.stamp_ns,
            sample_ns: sample.stamp_ns,
        });
    }
    let accel_body = sample.linear_acceleration - bias.accel_bias;
    let omega = sample.angular_velocity - bias.gyro_bias;
    let accel_world = state.rotation.rotate(accel_body);
    Ok(NavState {
        velocity: state.velocity + gravity.g * dt + accel_world * dt,
        position: state.position
            + state.velocity * dt
            + 0.5 * gravity.g * dt * dt
            + 0.5 * accel_world * dt * dt,
        rotation: state.rotation.compose(&Rotation::exp(omega * dt)),
        stamp_ns: state.stamp_ns + crate::types::sec_to_ns(dt),
    })
}

/// Chain [`propagate`] over an ordered sample stream.
///
/// Sample `k` integrates `[t_k, t_{k+1}]`; the final sample marks the end
/// of the stream and its reading is unused unless the stream starts after
/// `state` (then the first interval `[state.stamp, t_0]` uses sample 0).
/// With [`IntegrationScheme::Midpoint`] each interior interval instead
/// uses the mean of the readings at its ends.
pub fn propagate_stream(
    state: &NavState,
    samples: &[ImuSample],
    bias: &BiasState,
    gravity: &GravityModel,
    scheme: IntegrationScheme,
) -> Result<NavState, ImuError> {
    if samples.is_empty() {
        return Err(ImuError::EmptyStream);
    }
    let mut cur = *state;
    if samples[0].stamp_ns < cur.stamp_ns {
        return Err(ImuError::NonMonotonicTime {
            state_ns: cur.stamp_ns,
            sample_ns: samples[0].stamp_ns,
        });
    }
    if samples[0].stamp_ns > cur.stamp_ns {
        let dt = ns_to_sec(samples[0].stamp_ns - cur.stamp_ns);
        cur = propagate(&cur, &samples[0], bias, gravity, dt)?;
    }
    for pair in samples.windows(2) {
        let (s0, s1) = (&pair[0], &pair[1]);
        if s1.stamp_ns <= s0.stamp_ns {
            return Err(ImuError::NonMonotonicTime {
                state_ns: s0.stamp_ns,
                sample_ns: s1.stamp_ns,
            });
        }
        let dt = ns_to_sec(s1.stamp_ns - s0.stamp_ns);
        let step = match scheme {
            IntegrationScheme::ForwardEuler => *s0,
            IntegrationScheme::Midpoint => ImuSample {
                stamp_ns: s0.stamp_ns,
                angular_velocity: 0.5 * (s0.angular_velocity + s1.angular_velocity),
                linear_acceleration: 0.5 * (s0.linear_acceleration + s1.linear_acceleration),
            },
        };
        cur = propagate(&cur, &step, bias, gravity, dt)?;
    }
    Ok(cur)
}

/// Summarize a sample stream into a relative motion increment.
///
/// States are obtained by chained [`propagate`] from `start_state`, then
/// reduced through the increment identities, which makes the result
/// independent of the start pose, velocity, and gravity.
pub fn preintegrate(
    samples: &[ImuSample],
    bias: &BiasState,
    gravity: &GravityModel,
    start_state: &NavState,
) -> Result<PreintegratedDelta, ImuError> {
    preintegrate_with(samples, bias, gravity, start_state, IntegrationScheme::ForwardEuler)
}

pub fn preintegrate_with(
    samples: &[ImuSample],
    bias: &BiasState,
    gravity: &GravityModel,
    start_state: &NavState,
    scheme: IntegrationScheme,
) -> Result<PreintegratedDelta, ImuError> {
    let end = propagate_stream(start_state, samples, bias, gravity, scheme)?;
    Ok(delta_between(start_state, &end, gravity))
}

/// The increment identities evaluated between two explicit states.
pub fn delta_between(
    start: &NavState,
    end: &NavState,
    gravity: &GravityModel,
) -> PreintegratedDelta {
    let dt = ns_to_sec(end.stamp_ns - start.stamp_ns);
    let r_i_inv = start.rotation.inverse();
    PreintegratedDelta {
        delta_v: r_i_inv.rotate(end.velocity - start.velocity - gravity.g * dt),
        delta_p: r_i_inv.rotate(
            end.position - start.position - start.velocity * dt - 0.5 * gravity.g * dt * dt,
        ),
        delta_r: r_i_inv.compose(&end.rotation),
        delta_t: dt,
    }
}
