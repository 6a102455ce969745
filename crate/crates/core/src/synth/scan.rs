//! Analytic ray-casting LiDAR simulator.
//!
//! Scenes are built from exact primitives (ground plane, oriented boxes,
//! vertical cylinders); arcs are approximated by short chord boxes well
//! below measurement tolerances. Rays march a 2-D acceleration grid over
//! the scene footprint. Each ray consumes its own seeded RNG stream, so
//! clouds are identical regardless of thread schedule.

use super::{RailSide, SceneSpec, SynthError, Track};
use crate::exec;
use crate::types::{sec_to_ns, LidarFrame, LidarPoint, Pose, Rotation, StampNs, Vec3};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Background clutter layout. Deterministic given the scene seed; the
/// boxes and poles give scan matching along-track observability and give
/// segmentation a non-trivial background class.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClutterSpec {
    /// Spacing of pole/box pairs along the track, meters. ≤ 0 disables.
    pub spacing: f64,
    /// Lateral offset range from the centerline, meters.
    pub lateral_min: f64,
    pub lateral_max: f64,
    /// Include sleepers (ties) under the rails.
    pub sleepers: bool,
}

impl Default for ClutterSpec {
    fn default() -> Self {
        ClutterSpec { spacing: 9.0, lateral_min: 3.5, lateral_max: 9.0, sleepers: true }
    }
}

#[derive(Clone, Copy, Debug)]
struct Material {
    intensity: f64,
    rail: bool,
}

const GROUND: Material = Material { intensity: 0.35, rail: false };
const RAIL_HEAD: Material = Material { intensity: 0.55, rail: true };
const RAIL_WEB: Material = Material { intensity: 0.50, rail: false };
const SLEEPER: Material = Material { intensity: 0.45, rail: false };
const BOX_CLUTTER: Material = Material { intensity: 0.45, rail: false };
const POLE: Material = Material { intensity: 0.40, rail: false };

#[derive(Clone, Debug)]
enum Primitive {
    /// Oriented box: `world_from_box` columns are the box axes.
    Obb { center: Vec3, axes: Matrix3<f64>, half: Vec3, material: Material },
    /// Vertical cylinder with a top cap.
    CylinderZ { cx: f64, cy: f64, radius: f64, z0: f64, z1: f64, material: Material },
}

impl Primitive {
    fn material(&self) -> Material {
        match self {
            Primitive::Obb { material, .. } => *material,
            Primitive::CylinderZ { material, .. } => *material,
        }
    }

    /// World-frame AABB in the horizontal plane, `(min_x, min_y, max_x, max_y)`.
    fn footprint(&self) -> (f64, f64, f64, f64) {
        match self {
            Primitive::Obb { center, axes, half, .. } => {
                let ext_x = axes.row(0).map(f64::abs).dot(&half.transpose());
                let ext_y = axes.row(1).map(f64::abs).dot(&half.transpose());
                (center.x - ext_x, center.y - ext_y, center.x + ext_x, center.y + ext_y)
            }
            Primitive::CylinderZ { cx, cy, radius, .. } => {
                (cx - radius, cy - radius, cx + radius, cy + radius)
            }
        }
    }

    /// Smallest `t > eps` where the ray `o + t·d` hits the primitive.
    fn intersect(&self, o: Vec3, d: Vec3) -> Option<f64> {
        const EPS: f64 = 1e-9;
        match self {
            Primitive::Obb { center, axes, half, .. } => {
                let ro = axes.transpose() * (o - center);
                let rd = axes.transpose() * d;
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                for k in 0..3 {
                    if rd[k].abs() < 1e-14 {
                        if ro[k].abs() > half[k] {
                            return None;
                        }
                    } else {
                        let inv = 1.0 / rd[k];
                        let mut a = (-half[k] - ro[k]) * inv;
                        let mut b = (half[k] - ro[k]) * inv;
                        if a > b {
                            std::mem::swap(&mut a, &mut b);
                        }
                        t0 = t0.max(a);
                        t1 = t1.min(b);
                        if t0 > t1 {
                            return None;
                        }
                    }
                }
                if t0 > EPS {
                    Some(t0)
                } else if t1 > EPS {
                    // Origin inside the box.
                    Some(t1)
                } else {
                    None
                }
            }
            Primitive::CylinderZ { cx, cy, radius, z0, z1, .. } => {
                let ox = o.x - cx;
                let oy = o.y - cy;
                let a = d.x * d.x + d.y * d.y;
                let mut best: Option<f64> = None;
                if a > 1e-14 {
                    let b = 2.0 * (ox * d.x + oy * d.y);
                    let c = ox * ox + oy * oy - radius * radius;
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                            if t > EPS {
                                let z = o.z + t * d.z;
                                if (*z0..=*z1).contains(&z) {
                                    best = Some(best.map_or(t, |b: f64| b.min(t)));
                                }
                            }
                        }
                    }
                }
                // Top cap.
                if d.z.abs() > 1e-14 {
                    let t = (z1 - o.z) / d.z;
                    if t > EPS {
                        let x = o.x + t * d.x - cx;
                        let y = o.y + t * d.y - cy;
                        if x * x + y * y <= radius * radius {
                            best = Some(best.map_or(t, |b: f64| b.min(t)));
                        }
                    }
                }
                best
            }
        }
    }
}

/// One simulated sweep with its ground truth.
#[derive(Clone, Debug)]
pub struct SimulatedFrame {
    pub frame: LidarFrame,
    /// Per-point class, rail = 1, background = 0.
    pub labels: Vec<u8>,
    /// World pose of the sensor at the frame stamp.
    pub truth_pose: Pose,
}

struct Grid {
    min_x: f64,
    min_y: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl Grid {
    fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let i = ((x - self.min_x) / self.cell).floor();
        let j = ((y - self.min_y) / self.cell).floor();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            None
        } else {
            Some((i as usize, j as usize))
        }
    }
}

/// A resolved scene: track, flight, primitives, and the ray grid.
pub struct Scene {
    spec: SceneSpec,
    track: Track,
    primitives: Vec<Primitive>,
    ground_z: f64,
    grid: Grid,
}

impl Scene {
    pub fn build(spec: SceneSpec) -> Result<Self, SynthError> {
        let track = Track::new(spec.track.clone())?;
        let head = spec.track.railhead;
        for w in &spec.flight.waypoints {
            if w.position[2] <= head.top_height + 0.5 {
                return Err(SynthError::InvalidSpec(format!(
                    "flight altitude {} m too low over {} m railhead",
                    w.position[2], head.top_height
                )));
            }
        }
        spec.flight.resolve()?;

        let mut primitives = Vec::new();
        build_rails(&track, &mut primitives);
        if spec.clutter.sleepers {
            build_sleepers(&track, &mut primitives);
        }
        build_clutter(&track, &spec.clutter, spec.seed, &mut primitives);
        let grid = build_grid(&primitives);
        Ok(Scene { spec, track, primitives, ground_z: 0.0, grid })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn track(&self) -> &Track {
        &self.track
    }

    /// Frame stamps over the flight span at the sensor frame period.
    pub fn frame_times(&self) -> Vec<f64> {
        let path = self.spec.flight.resolve().expect("validated in build");
        let (t0, t1) = path.time_span();
        let period = self.spec.sensor.frame_period_s;
        let n = ((t1 - t0) / period).floor() as usize;
        (0..=n).map(|k| t0 + k as f64 * period).collect()
    }

    /// Simulate every frame of the flight; parallel across frames.
    pub fn simulate_all(&self) -> Vec<SimulatedFrame> {
        let path = self.spec.flight.resolve().expect("validated in build");
        let times = self.frame_times();
        exec::map_indexed(times.len(), |k| {
            let t = times[k];
            let pose = path.pose_at(t);
            self.simulate_scan(&pose, sec_to_ns(t), frame_seed(self.spec.seed, k as u64))
        })
    }

    /// Cast the full sweep from `pose`; points are in the sensor frame.
    pub fn simulate_scan(&self, pose: &Pose, stamp_ns: StampNs, seed: u64) -> SimulatedFrame {
        let sensor = &self.spec.sensor;
        let az_count = (360.0 / sensor.azimuth_resolution_deg).round() as usize;
        let channels = sensor.channels as usize;
        let origin = pose.translation;
        let period_ns = (sensor.frame_period_s * 1e9) as i64;

        let mut points = Vec::new();
        let mut labels = Vec::new();
        for c in 0..channels {
            let elev_deg = if channels == 1 {
                sensor.elevation_center_deg
            } else {
                sensor.elevation_center_deg - sensor.vertical_fov_deg / 2.0
                    + c as f64 * sensor.vertical_fov_deg / (channels - 1) as f64
            };
            let elev = elev_deg.to_radians();
            let (sin_e, cos_e) = elev.sin_cos();
            for a in 0..az_count {
                let az = (a as f64 * sensor.azimuth_resolution_deg).to_radians();
                let dir_sensor = Vec3::new(cos_e * az.cos(), cos_e * az.sin(), sin_e);
                let dir_world = pose.transform_vector(dir_sensor);
                let Some((t, material)) = self.cast(origin, dir_world, sensor.max_range_m)
                else {
                    continue;
                };
                let ray_index = (c * az_count + a) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(ray_index);
                let range = if sensor.range_sigma_m > 0.0 {
                    t + sensor.range_sigma_m * super::gauss(&mut rng)
                } else {
                    t
                };
                let intensity = (material.intensity + 0.1 * super::gauss(&mut rng)).max(0.0);
                points.push(LidarPoint {
                    position: dir_sensor * range,
                    intensity,
                    channel: c as u16,
                    time_offset_ns: (a as i64 * period_ns) / az_count as i64,
                });
                labels.push(u8::from(material.rail));
            }
        }
        SimulatedFrame {
            frame: LidarFrame { stamp_ns, points },
            labels,
            truth_pose: *pose,
        }
    }

    /// Closest hit along the ray within `max_range`.
    fn cast(&self, o: Vec3, d: Vec3, max_range: f64) -> Option<(f64, Material)> {
        let mut best_t = max_range;
        let mut best: Option<Material> = None;
        // Ground plane, tested outside the grid.
        if d.z < -1e-14 {
            let t = (self.ground_z - o.z) / d.z;
            if t > 1e-9 && t < best_t {
                best_t = t;
                best = Some(GROUND);
            }
        }
        self.march(o, d, &mut best_t, &mut best);
        best.map(|m| (best_t, m))
    }

    /// 2-D DDA over the grid footprint, testing cell prims until the cell
    /// entry distance exceeds the best hit.
    fn march(&self, o: Vec3, d: Vec3, best_t: &mut f64, best: &mut Option<Material>) {
        let g = &self.grid;
        let hx = d.x;
        let hy = d.y;
        let horiz = (hx * hx + hy * hy).sqrt();
        if horiz < 1e-12 {
            if let Some((i, j)) = g.cell_of(o.x, o.y) {
                self.test_cell(i, j, o, d, best_t, best);
            }
            return;
        }
        // Clip the ray to the grid AABB in the horizontal plane.
        let (mut t_enter, mut t_exit) = (0.0f64, *best_t);
        for (oc, dc, lo, hi) in [
            (o.x, hx, g.min_x, g.min_x + g.cell * g.nx as f64),
            (o.y, hy, g.min_y, g.min_y + g.cell * g.ny as f64),
        ] {
            if dc.abs() < 1e-14 {
                if oc < lo || oc > hi {
                    return;
                }
            } else {
                let mut a = (lo - oc) / dc;
                let mut b = (hi - oc) / dc;
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                t_enter = t_enter.max(a);
                t_exit = t_exit.min(b);
                if t_enter > t_exit {
                    return;
                }
            }
        }
        let start = o + d * (t_enter + 1e-9);
        let Some((mut i, mut j)) = g.cell_of(start.x, start.y) else { return };
        let step_i: i64 = if hx > 0.0 { 1 } else { -1 };
        let step_j: i64 = if hy > 0.0 { 1 } else { -1 };
        let next_boundary = |idx: usize, step: i64, min: f64| {
            min + g.cell * (idx as f64 + if step > 0 { 1.0 } else { 0.0 })
        };
        let mut t_max_x = if hx.abs() < 1e-14 {
            f64::INFINITY
        } else {
            (next_boundary(i, step_i, g.min_x) - o.x) / hx
        };
        let mut t_max_y = if hy.abs() < 1e-14 {
            f64::INFINITY
        } else {
            (next_boundary(j, step_j, g.min_y) - o.y) / hy
        };
        let dt_x = if hx.abs() < 1e-14 { f64::INFINITY } else { g.cell / hx.abs() };
        let dt_y = if hy.abs() < 1e-14 { f64::INFINITY } else { g.cell / hy.abs() };
        let mut cell_entry = t_enter;
        loop {
            if cell_entry > *best_t {
                return;
            }
            self.test_cell(i, j, o, d, best_t, best);
            if t_max_x < t_max_y {
                cell_entry = t_max_x;
                t_max_x += dt_x;
                let ni = i as i64 + step_i;
                if ni < 0 || ni >= g.nx as i64 {
                    return;
                }
                i = ni as usize;
            } else {
                cell_entry = t_max_y;
                t_max_y += dt_y;
                let nj = j as i64 + step_j;
                if nj < 0 || nj >= g.ny as i64 {
                    return;
                }
                j = nj as usize;
            }
        }
    }

    fn test_cell(
        &self,
        i: usize,
        j: usize,
        o: Vec3,
        d: Vec3,
        best_t: &mut f64,
        best: &mut Option<Material>,
    ) {
        for &pi in &self.grid.cells[j * self.grid.nx + i] {
            let prim = &self.primitives[pi as usize];
            if let Some(t) = prim.intersect(o, d) {
                if t < *best_t {
                    *best_t = t;
                    *best = Some(prim.material());
                }
            }
        }
    }

    /// Brute-force reference caster for tests.
    #[cfg(test)]
    fn cast_brute(&self, o: Vec3, d: Vec3, max_range: f64) -> Option<(f64, Material)> {
        let mut best_t = max_range;
        let mut best = None;
        if d.z < -1e-14 {
            let t = (self.ground_z - o.z) / d.z;
            if t > 1e-9 && t < best_t {
                best_t = t;
                best = Some(GROUND);
            }
        }
        for prim in &self.primitives {
            if let Some(t) = prim.intersect(o, d) {
                if t < best_t {
                    best_t = t;
                    best = Some(prim.material());
                }
            }
        }
        best.map(|m| (best_t, m))
    }
}

fn frame_seed(scene_seed: u64, frame_index: u64) -> u64 {
    // splitmix64 step keeps per-frame streams decorrelated.
    let mut z = scene_seed ^ frame_index.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Rails as chains of short chord boxes (head + web). 0.5 m chords keep
/// the chordal sagitta below 0.1 mm at the 50 m minimum radius.
fn build_rails(track: &Track, out: &mut Vec<Primitive>) {
    const CHORD: f64 = 0.5;
    let head = track.spec().railhead;
    for side in [RailSide::Left, RailSide::Right] {
        let mut s = 0.0;
        while s < track.length() {
            let s1 = (s + CHORD).min(track.length());
            let p0 = track.rail_top_center(side, s).unwrap();
            let p1 = track.rail_top_center(side, s1).unwrap();
            let dir = (p1 - p0).normalize();
            let lateral = Vec3::new(0.0, 0.0, 1.0).cross(&dir).normalize();
            let up = dir.cross(&lateral);
            let axes = Matrix3::from_columns(&[dir, lateral, up]);
            let len = (p1 - p0).norm();
            let mid = 0.5 * (p0 + p1);
            out.push(Primitive::Obb {
                center: mid - up * (head.height / 2.0),
                axes,
                half: Vec3::new(len / 2.0 + 0.005, head.width / 2.0, head.height / 2.0),
                material: RAIL_HEAD,
            });
            let web_top = mid.z - head.height;
            out.push(Primitive::Obb {
                center: Vec3::new(mid.x, mid.y, web_top / 2.0) ,
                axes,
                half: Vec3::new(len / 2.0 + 0.005, 0.012, web_top / 2.0),
                material: RAIL_WEB,
            });
            s = s1;
        }
    }
}

fn build_sleepers(track: &Track, out: &mut Vec<Primitive>) {
    const SPACING: f64 = 0.6;
    let mut s = SPACING / 2.0;
    while s < track.length() {
        let c = track.centerline_at(s).unwrap();
        let dir = Vec3::new(c.tangent.x, c.tangent.y, 0.0);
        let lateral = Vec3::new(c.left_normal.x, c.left_normal.y, 0.0);
        let axes = Matrix3::from_columns(&[dir, lateral, Vec3::new(0.0, 0.0, 1.0)]);
        out.push(Primitive::Obb {
            center: Vec3::new(c.position.x, c.position.y, 0.06),
            axes,
            half: Vec3::new(0.1, 1.3, 0.06),
            material: SLEEPER,
        });
        s += SPACING;
    }
}

fn build_clutter(track: &Track, clutter: &ClutterSpec, seed: u64, out: &mut Vec<Primitive>) {
    if clutter.spacing <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC1077E12);
    let mut s = clutter.spacing / 2.0;
    let mut side = 1.0;
    while s < track.length() {
        let c = track.centerline_at(s).unwrap();
        let place = |off: f64, c: &super::CenterlinePoint| {
            let p = c.position + c.left_normal * off;
            (p.x, p.y)
        };
        let lat: f64 = rng.gen_range(clutter.lateral_min..clutter.lateral_max);
        let (px, py) = place(side * lat, &c);
        let radius = rng.gen_range(0.05..0.12);
        let height = rng.gen_range(1.5..5.0);
        out.push(Primitive::CylinderZ { cx: px, cy: py, radius, z0: 0.0, z1: height, material: POLE });

        let lat2: f64 = rng.gen_range(clutter.lateral_min..clutter.lateral_max);
        let (bx, by) = place(-side * lat2, &c);
        let hx = rng.gen_range(0.3..1.0);
        let hy = rng.gen_range(0.3..1.0);
        let hz = rng.gen_range(0.3..1.2);
        let yaw = rng.gen_range(0.0..std::f64::consts::TAU);
        let axes = Rotation::from_yaw(yaw).matrix();
        out.push(Primitive::Obb {
            center: Vec3::new(bx, by, hz),
            axes,
            half: Vec3::new(hx, hy, hz),
            material: BOX_CLUTTER,
        });
        side = -side;
        s += clutter.spacing;
    }
}

fn build_grid(primitives: &[Primitive]) -> Grid {
    const CELL: f64 = 4.0;
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for p in primitives {
        let (x0, y0, x1, y1) = p.footprint();
        min_x = min_x.min(x0);
        min_y = min_y.min(y0);
        max_x = max_x.max(x1);
        max_y = max_y.max(y1);
    }
    if primitives.is_empty() {
        return Grid { min_x: 0.0, min_y: 0.0, cell: CELL, nx: 1, ny: 1, cells: vec![vec![]] };
    }
    min_x -= 0.5;
    min_y -= 0.5;
    let nx = ((max_x + 0.5 - min_x) / CELL).ceil().max(1.0) as usize;
    let ny = ((max_y + 0.5 - min_y) / CELL).ceil().max(1.0) as usize;
    let mut cells = vec![Vec::new(); nx * ny];
    for (pi, p) in primitives.iter().enumerate() {
        let (x0, y0, x1, y1) = p.footprint();
        let i0 = (((x0 - min_x) / CELL).floor().max(0.0)) as usize;
        let j0 = (((y0 - min_y) / CELL).floor().max(0.0)) as usize;
        let i1 = (((x1 - min_x) / CELL).floor() as usize).min(nx - 1);
        let j1 = (((y1 - min_y) / CELL).floor() as usize).min(ny - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                cells[j * nx + i].push(pi as u32);
            }
        }
    }
    Grid { min_x, min_y, cell: CELL, nx, ny, cells }
}

#[cfg(test)]
mod tests {
    use super::super::{
        Bump, FlightSpec, ImuNoiseSpec, RailheadSpec, SceneSpec, SegmentSpec, SensorSpec,
        TrackSpec, Waypoint,
    };
    use super::*;

    fn basic_spec(range_sigma: f64) -> SceneSpec {
        SceneSpec {
            track: TrackSpec {
                segments: vec![SegmentSpec::Straight { length: 40.0 }],
                gauge_m: 1.435,
                gauge_bumps: vec![],
                profile_bumps: vec![Bump { center: 20.0, half_width: 8.0, amplitude: 0.01 }],
                railhead: RailheadSpec::default(),
            },
            sensor: SensorSpec { range_sigma_m: range_sigma, ..SensorSpec::desk_default() },
            flight: FlightSpec {
                waypoints: vec![
                    Waypoint { t_s: 0.0, position: [0.0, -3.0, 6.0] },
                    Waypoint { t_s: 5.0, position: [20.0, -3.0, 6.0] },
                    Waypoint { t_s: 10.0, position: [40.0, -3.0, 6.0] },
                ],
                yaw_rad: 0.0,
                imu_rate_hz: 200.0,
                noise: ImuNoiseSpec::default(),
            },
            clutter: ClutterSpec::default(),
            seed: 11,
        }
    }

    #[test]
    fn ground_only_scene_hits_ground_exactly() {
        let mut spec = basic_spec(0.0);
        spec.clutter = ClutterSpec { spacing: 0.0, sleepers: false, ..ClutterSpec::default() };
        // Push the track far away so nadir rays see bare ground.
        spec.flight.waypoints.iter_mut().for_each(|w| w.position[1] = -30.0);
        let scene = Scene::build(spec).unwrap();
        let pose = Pose::new(Rotation::identity(), Vec3::new(0.0, -30.0, 10.0));
        let out = scene.simulate_scan(&pose, 0, 1);
        assert!(!out.frame.points.is_empty());
        for (p, &l) in out.frame.points.iter().zip(&out.labels) {
            let world = pose.transform_point(p.position);
            assert!(world.z.abs() < 1e-9, "ground hit at z = {}", world.z);
            assert_eq!(l, 0);
        }
    }

    #[test]
    fn straight_down_ray_hits_below_sensor() {
        let mut spec = basic_spec(0.0);
        spec.sensor = SensorSpec {
            channels: 1,
            vertical_fov_deg: 0.0,
            elevation_center_deg: -90.0,
            azimuth_resolution_deg: 360.0,
            max_range_m: 60.0,
            range_sigma_m: 0.0,
            frame_period_s: 0.1,
        };
        spec.clutter = ClutterSpec { spacing: 0.0, sleepers: false, ..ClutterSpec::default() };
        spec.flight.waypoints.iter_mut().for_each(|w| w.position[1] = -30.0);
        let scene = Scene::build(spec).unwrap();
        let pose = Pose::new(Rotation::identity(), Vec3::new(5.0, -30.0, 10.0));
        let out = scene.simulate_scan(&pose, 0, 1);
        assert_eq!(out.frame.points.len(), 1);
        let world = pose.transform_point(out.frame.points[0].position);
        assert!((world - Vec3::new(5.0, -30.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn rail_labels_sit_on_railhead() {
        let scene = Scene::build(basic_spec(0.0)).unwrap();
        let pose = Pose::new(Rotation::identity(), Vec3::new(10.0, -3.0, 6.0));
        let out = scene.simulate_scan(&pose, 0, 1);
        let rail_count = out.labels.iter().filter(|&&l| l == 1).count();
        assert!(rail_count > 50, "rail hits {rail_count}");
        let head = RailheadSpec::default();
        for (p, &l) in out.frame.points.iter().zip(&out.labels) {
            if l == 1 {
                let w = pose.transform_point(p.position);
                // Rail-labeled points lie within the head solid (top is
                // nominal + profile bump ≤ 10 mm here).
                assert!(
                    w.z > head.top_height - head.height - 1e-6
                        && w.z < head.top_height + 0.011,
                    "rail point at z = {}",
                    w.z
                );
                assert!(w.y.abs() > 0.6 && w.y.abs() < 0.85, "rail point at y = {}", w.y);
            }
        }
    }

    #[test]
    fn grid_march_matches_brute_force() {
        let scene = Scene::build(basic_spec(0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let origin = Vec3::new(12.0, -4.0, 7.0);
        for _ in 0..500 {
            let dir = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..-0.05),
            )
            .normalize();
            let fast = scene.cast(origin, dir, 60.0);
            let brute = scene.cast_brute(origin, dir, 60.0);
            match (fast, brute) {
                (Some((tf, mf)), Some((tb, mb))) => {
                    assert!((tf - tb).abs() < 1e-9, "t mismatch {tf} vs {tb}");
                    assert_eq!(mf.rail, mb.rail);
                }
                (None, None) => {}
                other => panic!("hit mismatch {other:?}"),
            }
        }
    }

    #[test]
    fn range_noise_has_configured_sigma() {
        let mut spec = basic_spec(0.01);
        spec.clutter = ClutterSpec { spacing: 0.0, sleepers: false, ..ClutterSpec::default() };
        spec.flight.waypoints.iter_mut().for_each(|w| w.position[1] = -30.0);
        let noisy_scene = Scene::build(spec.clone()).unwrap();
        spec.sensor.range_sigma_m = 0.0;
        let clean_scene = Scene::build(spec).unwrap();
        let pose = Pose::new(Rotation::identity(), Vec3::new(0.0, -30.0, 10.0));
        let noisy = noisy_scene.simulate_scan(&pose, 0, 7);
        let clean = clean_scene.simulate_scan(&pose, 0, 7);
        assert_eq!(noisy.frame.points.len(), clean.frame.points.len());
        let resid: Vec<f64> = noisy
            .frame
            .points
            .iter()
            .zip(&clean.frame.points)
            .map(|(a, b)| a.position.norm() - b.position.norm())
            .collect();
        let n = resid.len() as f64;
        assert!(n > 1e4, "want ≥ 10⁴ ground hits, got {n}");
        let mean = resid.iter().sum::<f64>() / n;
        let var = resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
        let sigma = var.sqrt();
        assert!((0.009..=0.011).contains(&sigma), "sample σ = {sigma}");
    }

    #[test]
    fn identical_seed_is_bit_reproducible() {
        let spec = basic_spec(0.01);
        let scene = Scene::build(spec.clone()).unwrap();
        let pose = Pose::new(Rotation::identity(), Vec3::new(3.0, -3.0, 6.0));
        let a = scene.simulate_scan(&pose, 5, 21);
        let b = scene.simulate_scan(&pose, 5, 21);
        assert_eq!(a.frame.points, b.frame.points);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn channel_points_are_azimuth_ordered() {
        let scene = Scene::build(basic_spec(0.0)).unwrap();
        let pose = Pose::new(Rotation::identity(), Vec3::new(10.0, -3.0, 6.0));
        let out = scene.simulate_scan(&pose, 0, 1);
        for (_, run) in out.frame.channel_runs() {
            for pair in run.windows(2) {
                assert!(pair[0].time_offset_ns <= pair[1].time_offset_ns);
            }
        }
    }
}
