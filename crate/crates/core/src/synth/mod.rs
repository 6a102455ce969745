//! Synthetic ground-truth oracle: parametric track models with known
//! gauge/curvature/profile, an analytic ray-casting LiDAR simulator, and
//! IMU trace generation for prescribed flight trajectories.
//!
//! Everything here is seeded and bit-reproducible: identical spec + seed
//! produce identical clouds and streams, independent of thread schedule.

mod flight;
mod scan;
mod spline;

pub use flight::{simulate_imu, FlightPath, FlightSpec, ImuNoiseSpec, Waypoint};
pub use scan::{ClutterSpec, Scene, SimulatedFrame};
pub use spline::CubicSpline;

use crate::types::Vec3;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("position {s} m outside track [0, {length}] m")]
    OutOfRange { s: f64, length: f64 },
    #[error("chord of {chord} m centered at {s} m does not fit the track")]
    ChordOutOfRange { s: f64, chord: f64 },
    #[error("invalid track spec: {0}")]
    InvalidSpec(String),
}

/// One centerline piece. Arcs turn left for positive `angle_rad`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentSpec {
    Straight { length: f64 },
    Arc { radius: f64, angle_rad: f64 },
}

/// Smooth local perturbation of gauge or profile:
/// `amplitude · cos²(π(s − center) / (2·half_width))` within
/// `|s − center| < half_width`, zero outside.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
}

impl Bump {
    fn eval(&self, s: f64) -> f64 {
        let u = (s - self.center) / self.half_width;
        if u.abs() >= 1.0 {
            0.0
        } else {
            let c = (std::f64::consts::FRAC_PI_2 * u).cos();
            self.amplitude * c * c
        }
    }
}

/// Rectangular railhead cross-section on a thin web.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RailheadSpec {
    /// Head width, meters.
    pub width: f64,
    /// Head height, meters.
    pub height: f64,
    /// Height of the rail top above the ground plane, meters.
    pub top_height: f64,
}

impl Default for RailheadSpec {
    fn default() -> Self {
        RailheadSpec { width: 0.07, height: 0.04, top_height: 0.2 }
    }
}

/// Parametric track: segment chain + gauge and vertical-profile functions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackSpec {
    pub segments: Vec<SegmentSpec>,
    /// Nominal gauge (inner-face distance), meters.
    pub gauge_m: f64,
    #[serde(default)]
    pub gauge_bumps: Vec<Bump>,
    /// Vertical rail-top deviations from the nominal height.
    #[serde(default)]
    pub profile_bumps: Vec<Bump>,
    #[serde(default)]
    pub railhead: RailheadSpec,
}

pub use crate::types::RailSide;

/// Resolved centerline sample.
#[derive(Clone, Copy, Debug)]
pub struct CenterlinePoint {
    pub position: Vector2<f64>,
    pub tangent: Vector2<f64>,
    /// Unit normal 90° left of the tangent.
    pub left_normal: Vector2<f64>,
}

#[derive(Clone, Copy, Debug)]
enum SegmentGeom {
    Straight { p0: Vector2<f64>, dir: Vector2<f64> },
    Arc { center: Vector2<f64>, radius: f64, theta0: f64, turn: f64 },
}

/// Track with the segment chain resolved into world geometry. The chain
/// starts at the origin heading +x.
#[derive(Clone, Debug)]
pub struct Track {
    spec: TrackSpec,
    geoms: Vec<SegmentGeom>,
    /// Cumulative start arc length per segment, plus the total at the end.
    s_bounds: Vec<f64>,
}

impl Track {
    pub fn new(spec: TrackSpec) -> Result<Self, SynthError> {
        if spec.segments.is_empty() {
            return Err(SynthError::InvalidSpec("track has no segments".into()));
        }
        if !(1.0..=2.0).contains(&spec.gauge_m) {
            return Err(SynthError::InvalidSpec(format!(
                "gauge {} m outside [1, 2] m",
                spec.gauge_m
            )));
        }
        let mut p = Vector2::zeros();
        let mut heading: f64 = 0.0;
        let mut geoms = Vec::new();
        let mut s_bounds = vec![0.0];
        for seg in &spec.segments {
            match *seg {
                SegmentSpec::Straight { length } => {
                    if length <= 0.0 {
                        return Err(SynthError::InvalidSpec("segment length must be > 0".into()));
                    }
                    let dir = Vector2::new(heading.cos(), heading.sin());
                    geoms.push(SegmentGeom::Straight { p0: p, dir });
                    p += dir * length;
                    s_bounds.push(s_bounds.last().unwrap() + length);
                }
                SegmentSpec::Arc { radius, angle_rad } => {
                    if radius < 50.0 {
                        return Err(SynthError::InvalidSpec(format!(
                            "arc radius {radius} m below the 50 m minimum"
                        )));
                    }
                    if angle_rad == 0.0 {
                        return Err(SynthError::InvalidSpec("arc angle must be nonzero".into()));
                    }
                    let turn = angle_rad.signum();
                    let left = Vector2::new(-heading.sin(), heading.cos());
                    let center = p + left * radius * turn;
                    let theta0 = f64::atan2(p.y - center.y, p.x - center.x);
                    geoms.push(SegmentGeom::Arc { center, radius, theta0, turn });
                    let length = radius * angle_rad.abs();
                    heading += angle_rad;
                    let theta1 = theta0 + angle_rad;
                    p = center + radius * Vector2::new(theta1.cos(), theta1.sin());
                    s_bounds.push(s_bounds.last().unwrap() + length);
                }
            }
        }
        Ok(Track { spec, geoms, s_bounds })
    }

    pub fn spec(&self) -> &TrackSpec {
        &self.spec
    }

    pub fn length(&self) -> f64 {
        *self.s_bounds.last().unwrap()
    }

    fn segment_index(&self, s: f64) -> usize {
        // Right-closed at the final bound so s = length resolves.
        match self.s_bounds.binary_search_by(|b| b.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.geoms.len() - 1),
            Err(i) => (i - 1).min(self.geoms.len() - 1),
        }
    }

    pub fn centerline_at(&self, s: f64) -> Result<CenterlinePoint, SynthError> {
        if !(0.0..=self.length()).contains(&s) {
            return Err(SynthError::OutOfRange { s, length: self.length() });
        }
        let i = self.segment_index(s);
        let local = s - self.s_bounds[i];
        let (position, tangent) = match self.geoms[i] {
            SegmentGeom::Straight { p0, dir } => (p0 + dir * local, dir),
            SegmentGeom::Arc { center, radius, theta0, turn } => {
                let theta = theta0 + turn * local / radius;
                let radial = Vector2::new(theta.cos(), theta.sin());
                let tangent = turn * Vector2::new(-radial.y, radial.x);
                (center + radius * radial, tangent)
            }
        };
        let left_normal = Vector2::new(-tangent.y, tangent.x);
        Ok(CenterlinePoint { position, tangent, left_normal })
    }

    /// Gauge (inner-face separation) at `s`.
    pub fn analytic_gauge(&self, s: f64) -> Result<f64, SynthError> {
        if !(0.0..=self.length()).contains(&s) {
            return Err(SynthError::OutOfRange { s, length: self.length() });
        }
        Ok(self.gauge_fn(s))
    }

    fn gauge_fn(&self, s: f64) -> f64 {
        self.spec.gauge_m + self.spec.gauge_bumps.iter().map(|b| b.eval(s)).sum::<f64>()
    }

    /// Rail-top height above ground at `s` (nominal + profile deviation).
    pub fn rail_top_z(&self, s: f64) -> f64 {
        self.spec.railhead.top_height + self.profile_fn(s)
    }

    fn profile_fn(&self, s: f64) -> f64 {
        self.spec.profile_bumps.iter().map(|b| b.eval(s)).sum::<f64>()
    }

    /// Signed lateral offset of a rail's head center from the centerline.
    pub fn rail_center_offset(&self, side: RailSide, s: f64) -> f64 {
        side.sign() * (self.gauge_fn(s) / 2.0 + self.spec.railhead.width / 2.0)
    }

    /// World position of a rail's head-top center at `s`.
    pub fn rail_top_center(&self, side: RailSide, s: f64) -> Result<Vec3, SynthError> {
        let c = self.centerline_at(s)?;
        let o = self.rail_center_offset(side, s);
        let p = c.position + c.left_normal * o;
        Ok(Vec3::new(p.x, p.y, self.rail_top_z(s)))
    }

    /// Mid-ordinate of a `chord`-long chord centered at `s`.
    ///
    /// Horizontal plane: exactly `R − √(R² − (chord/2)²)` on a single arc
    /// and `0` on a single straight (centerline geometry). Vertical plane:
    /// the profile's sagitta from exact evaluation at the three chord
    /// points. When the chord spans a segment join, the horizontal value
    /// is computed numerically from centerline samples and flagged.
    pub fn analytic_midordinate(
        &self,
        s: f64,
        chord: f64,
        plane: MeasurePlane,
    ) -> Result<MidOrdinate, SynthError> {
        let h = chord / 2.0;
        if s - h < 0.0 || s + h > self.length() {
            return Err(SynthError::ChordOutOfRange { s, chord });
        }
        match plane {
            MeasurePlane::Vertical => {
                let z0 = self.profile_fn(s - h);
                let z1 = self.profile_fn(s);
                let z2 = self.profile_fn(s + h);
                Ok(MidOrdinate { value: (z1 - 0.5 * (z0 + z2)).abs(), spans_join: false })
            }
            MeasurePlane::Horizontal => {
                let i0 = self.segment_index(s - h);
                let i1 = self.segment_index(s + h);
                if i0 == i1 {
                    let value = match self.geoms[i0] {
                        SegmentGeom::Straight { .. } => 0.0,
                        SegmentGeom::Arc { radius, .. } => {
                            radius - (radius * radius - h * h).sqrt()
                        }
                    };
                    Ok(MidOrdinate { value, spans_join: false })
                } else {
                    let a = self.centerline_at(s - h)?.position;
                    let b = self.centerline_at(s + h)?.position;
                    let m = self.centerline_at(s)?.position;
                    let chord_dir = (b - a).normalize();
                    let rel = m - a;
                    let along = rel.dot(&chord_dir);
                    let value = (rel - chord_dir * along).norm();
                    Ok(MidOrdinate { value, spans_join: true })
                }
            }
        }
    }

    /// Directly sampled rail-surface points in world coordinates, bypassing
    /// the LiDAR model. Used as a dense, controllable input for the
    /// geometry stage. Face points get uniformly random heights so every
    /// depth band below the head is populated.
    pub fn sample_rail_cloud(&self, sampler: &RailSampler) -> Vec<(Vec3, RailSide)> {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(sampler.seed);
        let mut out = Vec::new();
        let head = self.spec.railhead;
        let mut s = 0.0;
        while s <= self.length() {
            for side in [RailSide::Left, RailSide::Right] {
                let c = self.centerline_at(s).unwrap();
                let top_z = self.rail_top_z(s);
                let center_off = self.rail_center_offset(side, s);
                let lateral = |off: f64| {
                    let p = c.position + c.left_normal * off;
                    Vector2::new(p.x, p.y)
                };
                let noise = |rng: &mut rand_chacha::ChaCha8Rng| {
                    if sampler.noise_sigma > 0.0 {
                        Vec3::new(
                            gauss(rng) * sampler.noise_sigma,
                            gauss(rng) * sampler.noise_sigma,
                            gauss(rng) * sampler.noise_sigma,
                        )
                    } else {
                        Vec3::zeros()
                    }
                };
                // Top face: evenly across the head width.
                for i in 0..sampler.top_points_per_station {
                    let frac = (i as f64 + 0.5) / sampler.top_points_per_station as f64;
                    let off = center_off + (frac - 0.5) * head.width;
                    let p = lateral(off);
                    out.push((Vec3::new(p.x, p.y, top_z) + noise(&mut rng), side));
                }
                // Inner and outer faces: random depth within the head height.
                let inner_off = side.sign() * self.gauge_fn(s) / 2.0;
                let outer_off = side.sign() * (self.gauge_fn(s) / 2.0 + head.width);
                for &off in &[inner_off, outer_off] {
                    for _ in 0..sampler.face_points_per_station {
                        let depth: f64 = rng.gen_range(0.0..head.height);
                        let p = lateral(off);
                        out.push((Vec3::new(p.x, p.y, top_z - depth) + noise(&mut rng), side));
                    }
                }
            }
            s += sampler.station_spacing;
        }
        out
    }
}

/// Measurement plane selector shared with the geometry module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurePlane {
    /// x-y: curvature.
    Horizontal,
    /// x-z: profile.
    Vertical,
}

#[derive(Clone, Copy, Debug)]
pub struct MidOrdinate {
    pub value: f64,
    pub spans_join: bool,
}

/// Density controls for [`Track::sample_rail_cloud`].
#[derive(Clone, Copy, Debug)]
pub struct RailSampler {
    pub station_spacing: f64,
    pub top_points_per_station: usize,
    pub face_points_per_station: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for RailSampler {
    fn default() -> Self {
        RailSampler {
            station_spacing: 0.02,
            top_points_per_station: 4,
            face_points_per_station: 3,
            noise_sigma: 0.0,
            seed: 1,
        }
    }
}

pub(crate) fn gauss<R: rand::Rng>(rng: &mut R) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream layout simple.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Full scene description consumed by the `synth` CLI stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneSpec {
    pub track: TrackSpec,
    pub sensor: SensorSpec,
    pub flight: FlightSpec,
    #[serde(default)]
    pub clutter: ClutterSpec,
    pub seed: u64,
}

/// Spinning LiDAR model: 360° azimuth sweep, evenly spaced channels over
/// the vertical field of view around a boresight elevation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SensorSpec {
    pub channels: u16,
    pub vertical_fov_deg: f64,
    /// Boresight elevation; negative looks down. Models the mount tilt.
    #[serde(default)]
    pub elevation_center_deg: f64,
    pub azimuth_resolution_deg: f64,
    pub max_range_m: f64,
    pub range_sigma_m: f64,
    /// Sweep period; points get azimuth-linear time offsets within it.
    #[serde(default = "default_frame_period")]
    pub frame_period_s: f64,
}

fn default_frame_period() -> f64 {
    0.1
}

impl SensorSpec {
    /// Reduced desk-scale analog of a 128-channel, 45° street sensor.
    pub fn desk_default() -> Self {
        SensorSpec {
            channels: 32,
            vertical_fov_deg: 45.0,
            elevation_center_deg: -52.5,
            azimuth_resolution_deg: 0.5,
            max_range_m: 60.0,
            range_sigma_m: 0.0,
            frame_period_s: 0.1,
        }
    }
}
