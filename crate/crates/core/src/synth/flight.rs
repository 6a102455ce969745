//! Prescribed flight trajectories and IMU trace generation.
//!
//! The flight path is a natural cubic spline through timed waypoints with
//! a fixed heading. Readings are emitted as interval means (the
//! delta-angle / delta-velocity convention), so forward integration of a
//! noiseless stream reproduces the path to second order in the sample
//! period.

use super::spline::CubicSpline;
use super::{gauss, SynthError};
use crate::imu::{GravityModel, ImuSample, NavState};
use crate::types::{sec_to_ns, Pose, Rotation, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_s: f64,
    pub position: [f64; 3],
}

/// White-noise densities (per √Hz) and constant biases. The estimator
/// side never sees these; they only shape the generated stream.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct ImuNoiseSpec {
    pub gyro_noise_density: f64,
    pub accel_noise_density: f64,
    pub gyro_bias: [f64; 3],
    pub accel_bias: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlightSpec {
    pub waypoints: Vec<Waypoint>,
    /// Constant heading, radians about world +z.
    #[serde(default)]
    pub yaw_rad: f64,
    pub imu_rate_hz: f64,
    #[serde(default)]
    pub noise: ImuNoiseSpec,
}

/// Spline-resolved flight path.
pub struct FlightPath {
    splines: [CubicSpline; 3],
    rotation: Rotation,
    t0: f64,
    t1: f64,
}

impl FlightSpec {
    pub fn resolve(&self) -> Result<FlightPath, SynthError> {
        if self.waypoints.len() < 2 {
            return Err(SynthError::InvalidSpec("flight needs ≥ 2 waypoints".into()));
        }
        if self.imu_rate_hz < 100.0 {
            return Err(SynthError::InvalidSpec(format!(
                "imu rate {} Hz below the 100 Hz minimum",
                self.imu_rate_hz
            )));
        }
        let ts: Vec<f64> = self.waypoints.iter().map(|w| w.t_s).collect();
        if !ts.windows(2).all(|w| w[1] > w[0]) {
            return Err(SynthError::InvalidSpec("waypoint times must increase".into()));
        }
        let axis = |k: usize| {
            let ys: Vec<f64> = self.waypoints.iter().map(|w| w.position[k]).collect();
            CubicSpline::new(&ts, &ys)
        };
        Ok(FlightPath {
            splines: [axis(0), axis(1), axis(2)],
            rotation: Rotation::from_yaw(self.yaw_rad),
            t0: ts[0],
            t1: *ts.last().unwrap(),
        })
    }
}

impl FlightPath {
    pub fn time_span(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn position(&self, t: f64) -> Vec3 {
        Vec3::new(
            self.splines[0].value(t),
            self.splines[1].value(t),
            self.splines[2].value(t),
        )
    }

    pub fn velocity(&self, t: f64) -> Vec3 {
        Vec3::new(self.splines[0].eval(t).1, self.splines[1].eval(t).1, self.splines[2].eval(t).1)
    }

    pub fn acceleration(&self, t: f64) -> Vec3 {
        Vec3::new(self.splines[0].eval(t).2, self.splines[1].eval(t).2, self.splines[2].eval(t).2)
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    pub fn pose_at(&self, t: f64) -> Pose {
        Pose::new(self.rotation, self.position(t))
    }

    pub fn nav_state_at(&self, t: f64) -> NavState {
        NavState {
            position: self.position(t),
            velocity: self.velocity(t),
            rotation: self.rotation,
            stamp_ns: sec_to_ns(t),
        }
    }
}

/// Generate the IMU stream for a flight: analytic kinematics from the
/// spline, mapped to the body frame, gravity subtracted, plus the
/// configured bias and white noise. Samples are in the LiDAR body frame
/// (the raw-axis conversion happens at the CSV boundary).
///
/// Sample `k` carries the mean specific force over `[t_k, t_{k+1}]`, so a
/// noiseless stream round-trips through forward propagation with error
/// O(dt²).
pub fn simulate_imu(
    flight: &FlightSpec,
    gravity: &GravityModel,
    seed: u64,
) -> Result<Vec<ImuSample>, SynthError> {
    let path = flight.resolve()?;
    let (t0, t1) = path.time_span();
    let dt = 1.0 / flight.imu_rate_hz;
    let n = ((t1 - t0) / dt).round() as usize;
    let r_inv = path.rotation().inverse();
    let gyro_bias = Vec3::from(flight.noise.gyro_bias);
    let accel_bias = Vec3::from(flight.noise.accel_bias);
    let gyro_sigma = flight.noise.gyro_noise_density * flight.imu_rate_hz.sqrt();
    let accel_sigma = flight.noise.accel_noise_density * flight.imu_rate_hz.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = t0 + k as f64 * dt;
        let specific_force = if k < n {
            // Interval mean: (Δv/dt − g) in the body frame.
            let dv = path.velocity(t + dt) - path.velocity(t);
            r_inv.rotate(dv / dt - gravity.g)
        } else {
            // End marker; instantaneous reading, unused by integrators.
            r_inv.rotate(path.acceleration(t) - gravity.g)
        };
        let noise3 = |rng: &mut ChaCha8Rng, sigma: f64| {
            if sigma > 0.0 {
                Vec3::new(gauss(rng) * sigma, gauss(rng) * sigma, gauss(rng) * sigma)
            } else {
                Vec3::zeros()
            }
        };
        samples.push(ImuSample {
            stamp_ns: sec_to_ns(t),
            angular_velocity: gyro_bias + noise3(&mut rng, gyro_sigma),
            linear_acceleration: specific_force + accel_bias + noise3(&mut rng, accel_sigma),
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imu::{propagate_stream, BiasState, IntegrationScheme};
    use approx::assert_relative_eq;

    fn cruise_flight(rate: f64) -> FlightSpec {
        // Ramp up from rest, cruise, ramp down; smooth by construction.
        let mut waypoints = Vec::new();
        for k in 0..=20 {
            let t = k as f64 * 0.5;
            // Smoothstep-eased distance along x.
            let u = t / 10.0;
            let eased = u * u * (3.0 - 2.0 * u);
            waypoints.push(Waypoint { t_s: t, position: [40.0 * eased, 0.5 * u, 6.0] });
        }
        FlightSpec { waypoints, yaw_rad: 0.3, imu_rate_hz: rate, noise: ImuNoiseSpec::default() }
    }

    #[test]
    fn hover_reads_bias_and_gravity_reaction() {
        let noise = ImuNoiseSpec {
            gyro_bias: [0.01, -0.02, 0.005],
            accel_bias: [0.1, 0.0, -0.05],
            ..Default::default()
        };
        let flight = FlightSpec {
            waypoints: vec![
                Waypoint { t_s: 0.0, position: [1.0, 2.0, 5.0] },
                Waypoint { t_s: 1.0, position: [1.0, 2.0, 5.0] },
                Waypoint { t_s: 2.0, position: [1.0, 2.0, 5.0] },
            ],
            yaw_rad: 0.7,
            imu_rate_hz: 100.0,
            noise,
        };
        let g = GravityModel::standard();
        let samples = simulate_imu(&flight, &g, 5).unwrap();
        let r_inv = Rotation::from_yaw(0.7).inverse();
        let expected_accel = r_inv.rotate(-g.g) + Vec3::new(0.1, 0.0, -0.05);
        for s in &samples {
            assert_relative_eq!(s.angular_velocity, Vec3::new(0.01, -0.02, 0.005), epsilon = 1e-12);
            assert_relative_eq!(s.linear_acceleration, expected_accel, epsilon = 1e-9);
        }
    }

    #[test]
    fn noiseless_round_trip_recovers_endpoint() {
        let flight = cruise_flight(200.0);
        let path = flight.resolve().unwrap();
        let g = GravityModel::standard();
        let samples = simulate_imu(&flight, &g, 0).unwrap();
        let start = path.nav_state_at(0.0);
        let end = propagate_stream(
            &start,
            &samples,
            &BiasState::default(),
            &g,
            IntegrationScheme::ForwardEuler,
        )
        .unwrap();
        let truth = path.nav_state_at(10.0);
        let path_len = 40.0;
        let err = (end.position - truth.position).norm();
        assert!(err < 1e-4 * path_len, "endpoint error {err} m");
        assert!((end.velocity - truth.velocity).norm() < 1e-4);
    }

    #[test]
    fn doubling_the_rate_quarters_the_error() {
        // Peak trajectory error is O(dt²); the endpoint alone telescopes
        // to float noise under natural-spline boundary conditions.
        let g = GravityModel::standard();
        let err_at = |rate: f64| {
            let flight = cruise_flight(rate);
            let path = flight.resolve().unwrap();
            let samples = simulate_imu(&flight, &g, 0).unwrap();
            let mut state = path.nav_state_at(0.0);
            let mut max_err: f64 = 0.0;
            for pair in samples.windows(2) {
                let dt = crate::types::ns_to_sec(pair[1].stamp_ns - pair[0].stamp_ns);
                state = crate::imu::propagate(&state, &pair[0], &BiasState::default(), &g, dt)
                    .unwrap();
                let t = crate::types::ns_to_sec(state.stamp_ns);
                max_err = max_err.max((state.position - path.position(t)).norm());
            }
            max_err
        };
        let coarse = err_at(100.0);
        let fine = err_at(200.0);
        assert!(coarse > 1e-9, "coarse error {coarse} too small to measure");
        assert!(coarse / fine >= 4.0 * 0.85, "ratio {}", coarse / fine);
    }

    #[test]
    fn fixed_seed_reproduces_noisy_stream() {
        let mut flight = cruise_flight(150.0);
        flight.noise.gyro_noise_density = 2e-4;
        flight.noise.accel_noise_density = 2e-3;
        let g = GravityModel::standard();
        let a = simulate_imu(&flight, &g, 42).unwrap();
        let b = simulate_imu(&flight, &g, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_imu(&flight, &g, 43).unwrap();
        assert_ne!(a, c);
    }
}
