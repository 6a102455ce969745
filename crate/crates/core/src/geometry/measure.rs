//! Sliding-window gauge, curvature, and profile measurement.
//!
//! Windows advance along the aligned map's x axis by a fixed stride. Each
//! window is re-aligned in the horizontal plane about its own centroid
//! and trimmed to the exact window length in local coordinates, so the
//! measured values are rigid-motion invariant and stay correct on curved
//! corridors where global x under-counts arc length.

use super::{fit_line, fit_quadratic_xw, split_rails_by_y, FitPlane, RailMap, YawFrame};
use crate::exec;
use crate::types::{RailSide, Vec3};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    Gauge,
    Curvature,
    Profile,
}

impl MeasurementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasurementKind::Gauge => "gauge",
            MeasurementKind::Curvature => "curvature",
            MeasurementKind::Profile => "profile",
        }
    }
}

/// One window's value; `position` is the window-start x in the aligned map.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub position: f64,
    pub rail: Option<RailSide>,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkippedWindow {
    pub position: f64,
    pub reason: String,
}

/// Ordered series of per-window values plus the windows that were skipped.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasurementSeries {
    pub kind: MeasurementKind,
    pub samples: Vec<MeasurementSample>,
    pub skipped: Vec<SkippedWindow>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GaugeParams {
    pub window: f64,
    pub stride: f64,
    /// Fraction of window points (by z, from the top) taken as rail head.
    pub head_fraction: f64,
    /// Gauge-point band below the head top, meters: [low, high].
    pub band_below_head: (f64, f64),
    /// Fraction of band points kept nearest the track center.
    pub inner_fraction: f64,
    pub min_band_points: usize,
}

impl Default for GaugeParams {
    fn default() -> Self {
        GaugeParams {
            window: 5.0,
            stride: 0.5,
            head_fraction: 0.1,
            band_below_head: (0.01575, 0.016),
            inner_fraction: 0.1,
            min_band_points: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MidOrdinateParams {
    pub window: f64,
    pub stride: f64,
    pub head_fraction: f64,
    /// Chord-end sets: first and last fraction of the window length.
    pub end_fraction: f64,
    pub min_head_points: usize,
}

impl Default for MidOrdinateParams {
    fn default() -> Self {
        MidOrdinateParams {
            window: 18.89,
            stride: 3.0,
            head_fraction: 0.1,
            end_fraction: 0.1,
            min_head_points: 10,
        }
    }
}

/// `max(min_count, ceil(frac·n))`, clamped to `n`.
fn fraction_count(n: usize, frac: f64, min_count: usize) -> usize {
    (((n as f64) * frac).ceil() as usize).max(min_count).min(n)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Indices of the `k` largest values of `key` (ties by lower index).
fn top_k_by<F: Fn(usize) -> f64>(indices: &[usize], k: usize, key: F) -> Vec<usize> {
    let mut sorted: Vec<usize> = indices.to_vec();
    sorted.sort_by(|&a, &b| key(b).partial_cmp(&key(a)).unwrap().then(a.cmp(&b)));
    sorted.truncate(k);
    sorted
}

struct Window {
    start: f64,
    /// Window points in local (yaw-realigned, trimmed) coordinates.
    local: Vec<Vec3>,
    lo: f64,
    hi: f64,
}

/// Extract, re-align, and trim one window; `None` if it holds < 2 points.
fn extract_window(map: &RailMap, start: f64, length: f64) -> Option<Window> {
    let sel: Vec<Vec3> = map
        .points
        .iter()
        .filter(|p| p.x >= start && p.x <= start + length)
        .copied()
        .collect();
    if sel.len() < 2 {
        return None;
    }
    let frame = YawFrame::fit(sel.iter().copied());
    let local: Vec<Vec3> = sel.iter().map(|&p| frame.local(p)).collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &local {
        lo = lo.min(p.x);
        hi = hi.max(p.x);
    }
    // The global-x window covers ≥ `length` of arc; trim symmetrically to
    // the exact window length in local coordinates.
    let mid = 0.5 * (lo + hi);
    let (lo, hi) = (mid - length / 2.0, mid + length / 2.0);
    let local: Vec<Vec3> = local.into_iter().filter(|p| p.x >= lo && p.x <= hi).collect();
    Some(Window { start, local, lo, hi })
}

fn window_starts(map: &RailMap, window: f64, stride: f64) -> Vec<f64> {
    let (x_lo, x_hi) = map.x_extent();
    let mut starts = Vec::new();
    let mut k = 0usize;
    loop {
        let s = x_lo + k as f64 * stride;
        if s + window > x_hi + 1e-9 {
            break;
        }
        starts.push(s);
        k += 1;
    }
    starts
}

enum WindowOutcome {
    Values(Vec<MeasurementSample>),
    Skipped(SkippedWindow),
}

fn collect_series(
    kind: MeasurementKind,
    outcomes: Vec<WindowOutcome>,
) -> MeasurementSeries {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            WindowOutcome::Values(v) => samples.extend(v),
            WindowOutcome::Skipped(s) => skipped.push(s),
        }
    }
    MeasurementSeries { kind, samples, skipped }
}

/// Sliding-window gauge: per window and rail, the rail head is the median
/// z of the top head-fraction of points; gauge points are those
/// 15.75–16 mm below it, thinned to the innermost fraction by distance to
/// the track center; a line per rail is evaluated at the window ends and
/// the value is the planar distance between the two line-segment
/// midpoints.
pub fn measure_gauge(map: &RailMap, params: &GaugeParams) -> MeasurementSeries {
    let starts = window_starts(map, params.window, params.stride);
    let outcomes = exec::map_ordered(&starts, |&start| match gauge_window(map, start, params) {
        Ok(value) => WindowOutcome::Values(vec![MeasurementSample {
            position: start,
            rail: None,
            value,
        }]),
        Err(reason) => WindowOutcome::Skipped(SkippedWindow { position: start, reason }),
    });
    collect_series(MeasurementKind::Gauge, outcomes)
}

fn gauge_window(map: &RailMap, start: f64, params: &GaugeParams) -> Result<f64, String> {
    let win = extract_window(map, start, params.window).ok_or("empty window")?;
    let all: Vec<usize> = (0..win.local.len()).collect();
    let ys: Vec<f64> = win.local.iter().map(|p| p.y).collect();
    let pair = split_rails_by_y(&ys, &all).map_err(|e| e.to_string())?;
    let rail_mean_y = |idx: &[usize]| idx.iter().map(|&i| ys[i]).sum::<f64>() / idx.len() as f64;
    let track_center = 0.5 * (rail_mean_y(&pair.left) + rail_mean_y(&pair.right));
    let mut midpoints = Vec::with_capacity(2);
    for rail in [&pair.left, &pair.right] {
        if rail.len() < 4 {
            return Err(format!("rail has {} points; need ≥ 4", rail.len()));
        }
        // Rail head: median z of the top fraction.
        let k_head = fraction_count(rail.len(), params.head_fraction, 4);
        let head_idx = top_k_by(rail, k_head, |i| win.local[i].z);
        let head_z = median(head_idx.iter().map(|&i| win.local[i].z).collect());
        // Gauge-point band below the head.
        let (lo_off, hi_off) = params.band_below_head;
        let band: Vec<usize> = rail
            .iter()
            .copied()
            .filter(|&i| {
                let z = win.local[i].z;
                z >= head_z - hi_off && z <= head_z - lo_off
            })
            .collect();
        if band.len() < params.min_band_points {
            return Err(format!(
                "{} gauge-band points; need ≥ {}",
                band.len(),
                params.min_band_points
            ));
        }
        // Innermost fraction by lateral distance to the track center.
        let k_inner = fraction_count(band.len(), params.inner_fraction, params.min_band_points);
        let inner = top_k_by(&band, k_inner, |i| -(win.local[i].y - track_center).abs());
        let pts: Vec<(f64, f64)> =
            inner.iter().map(|&i| (win.local[i].x, win.local[i].y)).collect();
        let (slope, intercept) = fit_line(&pts).ok_or("gauge line fit degenerate")?;
        let y_lo = slope * win.lo + intercept;
        let y_hi = slope * win.hi + intercept;
        midpoints.push((0.5 * (win.lo + win.hi), 0.5 * (y_lo + y_hi)));
    }
    let (x1, y1) = midpoints[0];
    let (x2, y2) = midpoints[1];
    Ok(((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt())
}

/// Sliding-window mid-ordinate for one rail: quadratic through the top
/// head-fraction points in the requested plane, chord through per-end
/// line fits evaluated at the window ends, value = |quadratic − chord| at
/// the window midpoint.
pub fn measure_midordinate(
    map: &RailMap,
    rail: RailSide,
    plane: FitPlane,
    params: &MidOrdinateParams,
) -> MeasurementSeries {
    let starts = window_starts(map, params.window, params.stride);
    let outcomes = exec::map_ordered(&starts, |&start| {
        match midordinate_window(map, rail, plane, start, params) {
            Ok(value) => WindowOutcome::Values(vec![MeasurementSample {
                position: start,
                rail: Some(rail),
                value,
            }]),
            Err(reason) => WindowOutcome::Skipped(SkippedWindow { position: start, reason }),
        }
    });
    collect_series(
        match plane {
            FitPlane::Xy => MeasurementKind::Curvature,
            FitPlane::Xz => MeasurementKind::Profile,
        },
        outcomes,
    )
}

fn midordinate_window(
    map: &RailMap,
    rail: RailSide,
    plane: FitPlane,
    start: f64,
    params: &MidOrdinateParams,
) -> Result<f64, String> {
    let win = extract_window(map, start, params.window).ok_or("empty window")?;
    let all: Vec<usize> = (0..win.local.len()).collect();
    let ys: Vec<f64> = win.local.iter().map(|p| p.y).collect();
    let pair = split_rails_by_y(&ys, &all).map_err(|e| e.to_string())?;
    let rail_idx = pair.side(rail);
    if rail_idx.is_empty() {
        return Err("rail empty in window".into());
    }
    // Rail-head points: top fraction by z.
    let k_head = fraction_count(rail_idx.len(), params.head_fraction, params.min_head_points);
    if rail_idx.len() < params.min_head_points {
        return Err(format!(
            "{} rail points; need ≥ {}",
            rail_idx.len(),
            params.min_head_points
        ));
    }
    let head_idx = top_k_by(rail_idx, k_head, |i| win.local[i].z);
    if head_idx.len() < params.min_head_points {
        return Err(format!(
            "{} head points; need ≥ {}",
            head_idx.len(),
            params.min_head_points
        ));
    }
    let ordinate = |i: usize| match plane {
        FitPlane::Xy => win.local[i].y,
        FitPlane::Xz => win.local[i].z,
    };
    let pts: Vec<(f64, f64)> = head_idx.iter().map(|&i| (win.local[i].x, ordinate(i))).collect();
    let quad = fit_quadratic_xw(&pts, plane).map_err(|e| e.to_string())?;
    // Chord: per-end line fits evaluated at the exact window ends.
    let end_len = params.end_fraction * params.window;
    let mut chord_ends = Vec::with_capacity(2);
    for (a, b, eval_x) in [(win.lo, win.lo + end_len, win.lo), (win.hi - end_len, win.hi, win.hi)]
    {
        let seg: Vec<(f64, f64)> =
            pts.iter().copied().filter(|&(x, _)| x >= a && x <= b).collect();
        if seg.len() < 3 {
            return Err(format!("{} chord-end points; need ≥ 3", seg.len()));
        }
        let (slope, intercept) = fit_line(&seg).ok_or("chord-end fit degenerate")?;
        chord_ends.push((eval_x, slope * eval_x + intercept));
    }
    let (x0, w0) = chord_ends[0];
    let (x1, w1) = chord_ends[1];
    let x_mid = 0.5 * (win.lo + win.hi);
    let chord_mid = w0 + (w1 - w0) * (x_mid - x0) / (x1 - x0);
    Ok((quad.eval(x_mid) - chord_mid).abs())
}

/// Per-series statistics against matched reference values.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct SeriesSummary {
    /// Mean of the measured values, meters.
    pub mean: f64,
    /// Sample standard deviation of the measured values, meters.
    pub std: f64,
    /// Root-mean-square of (measured − reference), meters.
    pub rmse: f64,
    /// 100 · mean(|measured − reference| / |reference|); absent when every
    /// reference is zero.
    pub arep_percent: Option<f64>,
    pub count: usize,
}

/// References below this magnitude are excluded from the relative error.
const ZERO_REFERENCE_EPS: f64 = 1e-12;

/// Summarize matched (measurement, reference) pairs.
pub fn summarize(pairs: &[(f64, f64)]) -> Option<SeriesSummary> {
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let var = if pairs.len() > 1 {
        pairs.iter().map(|p| (p.0 - mean) * (p.0 - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let rmse = (pairs.iter().map(|p| (p.0 - p.1) * (p.0 - p.1)).sum::<f64>() / n).sqrt();
    let rel: Vec<f64> = pairs
        .iter()
        .filter(|p| p.1.abs() > ZERO_REFERENCE_EPS)
        .map(|p| (p.0 - p.1).abs() / p.1.abs())
        .collect();
    let arep_percent = if rel.is_empty() {
        None
    } else {
        Some(100.0 * rel.iter().sum::<f64>() / rel.len() as f64)
    };
    Some(SeriesSummary { mean, std: var.sqrt(), rmse, arep_percent, count: pairs.len() })
}

#[cfg(test)]
mod tests {
    use super::super::{pca_align, AlignmentTransform};
    use super::*;
    use crate::synth::{RailSampler, SegmentSpec, Track, TrackSpec};
    use crate::types::Rotation;
    use approx::assert_relative_eq;

    fn track(segments: Vec<SegmentSpec>) -> Track {
        Track::new(TrackSpec {
            segments,
            gauge_m: 1.435,
            gauge_bumps: vec![],
            profile_bumps: vec![],
            railhead: Default::default(),
        })
        .unwrap()
    }

    fn rail_map(track: &Track, noise: f64, seed: u64) -> RailMap {
        let pts: Vec<Vec3> = track
            .sample_rail_cloud(&RailSampler { noise_sigma: noise, seed, ..Default::default() })
            .into_iter()
            .map(|(p, _)| p)
            .collect();
        pca_align(&pts).unwrap()
    }

    #[test]
    fn gauge_on_ideal_straight_track_is_exact() {
        let t = track(vec![SegmentSpec::Straight { length: 40.0 }]);
        let map = rail_map(&t, 0.0, 2);
        let series = measure_gauge(&map, &GaugeParams::default());
        assert!(series.samples.len() > 50, "{} windows", series.samples.len());
        for s in &series.samples {
            assert!(
                (s.value - 1.435).abs() < 2e-3,
                "gauge {} at window {}",
                s.value,
                s.position
            );
        }
        // Noiseless inner faces are exact planes: expect far under 2 mm.
        let worst =
            series.samples.iter().map(|s| (s.value - 1.435).abs()).fold(0.0f64, f64::max);
        assert!(worst < 1e-6, "worst gauge deviation {worst}");
    }

    #[test]
    fn gauge_of_two_parallel_lines_is_their_spacing() {
        // Hand-built degenerate "rails": two parallel point rows with a
        // thin vertical band structure so head/band selection works.
        let mut pts = Vec::new();
        for k in 0..2000 {
            let x = k as f64 * 0.02;
            for (side, y) in [(0, 0.0f64), (1, 1.435)] {
                let _ = side;
                pts.push(Vec3::new(x, y, 0.2));
                // Band points exactly 15.8 mm below the head line.
                pts.push(Vec3::new(x, y, 0.2 - 0.0158));
            }
        }
        let map = RailMap { points: pts, alignment: AlignmentTransform::identity() };
        let series = measure_gauge(&map, &GaugeParams::default());
        assert!(!series.samples.is_empty());
        for s in &series.samples {
            assert_relative_eq!(s.value, 1.435, epsilon = 1e-9);
        }
    }

    #[test]
    fn gauge_is_rigid_motion_invariant() {
        let t = track(vec![SegmentSpec::Straight { length: 30.0 }]);
        let pts: Vec<Vec3> = t
            .sample_rail_cloud(&RailSampler { noise_sigma: 0.001, seed: 5, ..Default::default() })
            .into_iter()
            .map(|(p, _)| p)
            .collect();
        let base = measure_gauge(&pca_align(&pts).unwrap(), &GaugeParams::default());
        let q = Rotation::from_yaw(1.1).compose(&Rotation::exp(Vec3::new(0.02, -0.015, 0.0)));
        let moved: Vec<Vec3> =
            pts.iter().map(|&p| q.rotate(p) + Vec3::new(100.0, -40.0, 12.0)).collect();
        let rotated = measure_gauge(&pca_align(&moved).unwrap(), &GaugeParams::default());
        assert_eq!(base.samples.len(), rotated.samples.len());
        for (a, b) in base.samples.iter().zip(&rotated.samples) {
            assert!((a.value - b.value).abs() < 1e-9, "{} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn gauge_track_with_widening_bump() {
        let t = Track::new(TrackSpec {
            segments: vec![SegmentSpec::Straight { length: 60.0 }],
            gauge_m: 1.435,
            gauge_bumps: vec![crate::synth::Bump {
                center: 30.0,
                half_width: 8.0,
                amplitude: 0.01,
            }],
            profile_bumps: vec![],
            railhead: Default::default(),
        })
        .unwrap();
        let map = rail_map(&t, 0.0, 3);
        let series = measure_gauge(&map, &GaugeParams::default());
        let (x_lo, _) = map.x_extent();
        // Window centered on the bump (window start = bump center − w/2).
        let center_pos = 30.0 - 2.5;
        let at_bump = series
            .samples
            .iter()
            .min_by(|a, b| {
                ((a.position - x_lo) - center_pos)
                    .abs()
                    .partial_cmp(&((b.position - x_lo) - center_pos).abs())
                    .unwrap()
            })
            .unwrap();
        assert!(
            (at_bump.value - 1.445).abs() < 2.5e-3,
            "bump gauge {} (expected ≈ 1.445)",
            at_bump.value
        );
        let at_start = &series.samples[0];
        assert!((at_start.value - 1.435).abs() < 2e-3);
    }

    #[test]
    fn midordinate_zero_on_straight_track() {
        let t = track(vec![SegmentSpec::Straight { length: 60.0 }]);
        let map = rail_map(&t, 0.0, 4);
        for plane in [FitPlane::Xy, FitPlane::Xz] {
            for side in [RailSide::Left, RailSide::Right] {
                let series =
                    measure_midordinate(&map, side, plane, &MidOrdinateParams::default());
                assert!(!series.samples.is_empty());
                for s in &series.samples {
                    assert!(s.value < 2e-3, "mid-ordinate {} on straight", s.value);
                }
            }
        }
    }

    #[test]
    fn midordinate_matches_circle_chord_oracle() {
        // R − √(R² − (c/2)²) closed form, 5% tolerance; strictly
        // decreasing in R.
        let chord = 18.89;
        let mut last = f64::INFINITY;
        for radius in [300.0, 500.0, 1000.0] {
            let t = track(vec![SegmentSpec::Arc { radius, angle_rad: 80.0 / radius }]);
            let map = rail_map(&t, 0.0, 6);
            let series = measure_midordinate(
                &map,
                RailSide::Left,
                FitPlane::Xy,
                &MidOrdinateParams::default(),
            );
            assert!(series.samples.len() >= 5, "{} windows", series.samples.len());
            let mean = series.samples.iter().map(|s| s.value).sum::<f64>()
                / series.samples.len() as f64;
            let expected = radius - (radius * radius - (chord / 2.0) * (chord / 2.0)).sqrt();
            assert!(
                (mean - expected).abs() / expected < 0.05,
                "R={radius}: measured {mean}, expected {expected}"
            );
            assert!(mean < last);
            last = mean;
        }
    }

    #[test]
    fn profile_sag_matches_parabola_sagitta() {
        // Rail z = 1e-4·x² over the window: the mid-ordinate of a
        // parabola over chord c is a·(c/2)².
        let a = 1e-4;
        let mut pts = Vec::new();
        for k in 0..6000 {
            let x = k as f64 * 0.01;
            let z = 0.2 + a * (x - 30.0) * (x - 30.0);
            for y in [0.0, 1.435] {
                pts.push(Vec3::new(x, y, z));
                pts.push(Vec3::new(x, y + 0.001, z - 0.001));
            }
        }
        let map = RailMap { points: pts, alignment: AlignmentTransform::identity() };
        let params = MidOrdinateParams::default();
        let series = measure_midordinate(&map, RailSide::Left, FitPlane::Xz, &params);
        let expected = a * (params.window / 2.0) * (params.window / 2.0);
        assert!(!series.samples.is_empty());
        for s in &series.samples {
            assert!(
                (s.value - expected).abs() < 1e-3,
                "sagitta {} vs {expected}",
                s.value
            );
        }
    }

    #[test]
    fn series_positions_advance_by_stride() {
        let t = track(vec![SegmentSpec::Straight { length: 30.0 }]);
        let map = rail_map(&t, 0.0, 8);
        let params = GaugeParams::default();
        let series = measure_gauge(&map, &params);
        for pair in series.samples.windows(2) {
            let dx = pair[1].position - pair[0].position;
            // Gaps from skipped windows are whole multiples of the stride.
            let steps = dx / params.stride;
            assert!((steps - steps.round()).abs() < 1e-9);
            assert!(steps >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn summarize_matches_hand_arithmetic() {
        let s = summarize(&[(0.01, 0.0)]).unwrap();
        assert_relative_eq!(s.rmse, 0.01, epsilon = 1e-15);
        assert!(s.arep_percent.is_none());

        // 144.5 cm measured vs 143.5 cm reference → 0.6969% relative.
        let s = summarize(&[(1.445, 1.435)]).unwrap();
        assert_relative_eq!(s.arep_percent.unwrap(), 100.0 * 0.01 / 1.435, epsilon = 1e-9);
        assert_relative_eq!(s.arep_percent.unwrap(), 0.6969, epsilon = 1e-4);

        let s = summarize(&[(1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert_eq!(s.rmse, 0.0);
        assert_eq!(s.arep_percent, Some(0.0));
        assert!(summarize(&[]).is_none());
    }
}
