//! Corridor geometry: PCA alignment, rail splitting, quadratic fits, and
//! outlier rejection over the registered rail cloud.
//!
//! The aligned frame puts the longitudinal direction on x, the lateral on
//! y, and the vertical on z. Every measurement re-aligns its own window
//! in the horizontal plane, so results are rigid-motion invariant.

mod measure;

pub use measure::{
    measure_gauge, measure_midordinate, summarize, GaugeParams, MeasurementKind,
    MeasurementSample, MeasurementSeries, MidOrdinateParams, SeriesSummary, SkippedWindow,
};

use crate::types::{RailSide, Rotation, Vec3};
use nalgebra::{Matrix3, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("cloud rank < 2: cannot orient axes")]
    DegenerateCloud,
    #[error("lateral clusters {separation:.3} m apart; expected two rails ≥ 0.5 m apart")]
    SingleRailDetected { separation: f64 },
    #[error("quadratic fit needs ≥ 3 distinct abscissae")]
    RankDeficient,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

/// World → aligned rigid transform: `aligned = R · (world − centroid)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTransform {
    pub rotation: Rotation,
    pub centroid: Vec3,
}

impl AlignmentTransform {
    pub fn identity() -> Self {
        AlignmentTransform { rotation: Rotation::identity(), centroid: Vec3::zeros() }
    }

    pub fn world_to_aligned(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p - self.centroid)
    }

    pub fn aligned_to_world(&self, p: Vec3) -> Vec3 {
        self.rotation.inverse().rotate(p) + self.centroid
    }
}

/// PCA-aligned rail corridor cloud: x longitudinal, y lateral, z vertical
/// by descending variance. The alignment transform is retained.
#[derive(Clone, Debug)]
pub struct RailMap {
    pub points: Vec<Vec3>,
    pub alignment: AlignmentTransform,
}

impl RailMap {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn x_extent(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.points {
            lo = lo.min(p.x);
            hi = hi.max(p.x);
        }
        (lo, hi)
    }
}

/// Rotate a cloud about its centroid so the principal variance axes map
/// to (x, y, z) in descending order. Signs are fixed so the point with
/// the smallest original x stays at the small-x end and +z keeps a
/// non-negative dot with world up.
pub fn pca_align(points: &[Vec3]) -> Result<RailMap, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::TooFewPoints { needed: 3, got: points.len() });
    }
    let n = points.len() as f64;
    let centroid: Vec3 = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let lambda = [
        eig.eigenvalues[order[0]].max(0.0),
        eig.eigenvalues[order[1]].max(0.0),
        eig.eigenvalues[order[2]].max(0.0),
    ];
    if lambda[0] <= 0.0 || lambda[1] <= lambda[0] * 1e-12 {
        return Err(GeometryError::DegenerateCloud);
    }
    let mut x_axis: Vec3 = eig.eigenvectors.column(order[0]).into();
    let mut z_axis: Vec3 = eig.eigenvectors.column(order[2]).into();
    if z_axis.z < 0.0 {
        z_axis = -z_axis;
    }
    // Smallest-original-x point maps to the small end of aligned x.
    let (mut min_i, mut max_i) = (0, 0);
    for (i, p) in points.iter().enumerate() {
        if p.x < points[min_i].x {
            min_i = i;
        }
        if p.x > points[max_i].x {
            max_i = i;
        }
    }
    if (points[min_i] - centroid).dot(&x_axis) > (points[max_i] - centroid).dot(&x_axis) {
        x_axis = -x_axis;
    }
    // Orthogonality to ~1e-15 comes from the symmetric eigendecomposition;
    // the cross product pins handedness.
    let y_axis = z_axis.cross(&x_axis);
    let rot_aligned_from_world =
        Matrix3::from_rows(&[x_axis.transpose(), y_axis.transpose(), z_axis.transpose()]);
    let alignment = AlignmentTransform {
        rotation: Rotation::from_matrix(&rot_aligned_from_world),
        centroid,
    };
    let points = points.iter().map(|&p| alignment.world_to_aligned(p)).collect();
    Ok(RailMap { points, alignment })
}

/// Indices of the two lateral clusters; `left` has the smaller mean y.
#[derive(Clone, Debug, Default)]
pub struct RailPair {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl RailPair {
    pub fn side(&self, side: RailSide) -> &[usize] {
        match side {
            RailSide::Left => &self.left,
            RailSide::Right => &self.right,
        }
    }
}

/// Minimum lateral separation of the two cluster centers, meters.
const MIN_RAIL_SEPARATION: f64 = 0.5;

/// 1-D 2-means on the lateral coordinate of the selected points.
/// `indices` refer to `ys`' owner; returned indices are the same ones.
pub fn split_rails_by_y(
    ys: &[f64],
    indices: &[usize],
) -> Result<RailPair, GeometryError> {
    if indices.len() < 2 {
        return Err(GeometryError::TooFewPoints { needed: 2, got: indices.len() });
    }
    let mut c_low = f64::INFINITY;
    let mut c_high = f64::NEG_INFINITY;
    for &i in indices {
        c_low = c_low.min(ys[i]);
        c_high = c_high.max(ys[i]);
    }
    let mut assign_low: Vec<bool> = vec![false; indices.len()];
    for _ in 0..64 {
        let mut changed = false;
        let (mut sum_l, mut n_l, mut sum_h, mut n_h) = (0.0, 0usize, 0.0, 0usize);
        for (k, &i) in indices.iter().enumerate() {
            let to_low = (ys[i] - c_low).abs() <= (ys[i] - c_high).abs();
            if to_low != assign_low[k] {
                changed = true;
                assign_low[k] = to_low;
            }
            if to_low {
                sum_l += ys[i];
                n_l += 1;
            } else {
                sum_h += ys[i];
                n_h += 1;
            }
        }
        if n_l > 0 {
            c_low = sum_l / n_l as f64;
        }
        if n_h > 0 {
            c_high = sum_h / n_h as f64;
        }
        if !changed {
            break;
        }
    }
    let separation = c_high - c_low;
    if !separation.is_finite() || separation < MIN_RAIL_SEPARATION {
        return Err(GeometryError::SingleRailDetected { separation });
    }
    let mut pair = RailPair::default();
    for (k, &i) in indices.iter().enumerate() {
        if assign_low[k] {
            pair.left.push(i);
        } else {
            pair.right.push(i);
        }
    }
    if pair.left.is_empty() || pair.right.is_empty() {
        return Err(GeometryError::SingleRailDetected { separation });
    }
    Ok(pair)
}

/// Split a map's points whose x lies in `[x0, x1]` into the two rails.
pub fn split_rails(map: &RailMap, x0: f64, x1: f64) -> Result<RailPair, GeometryError> {
    let indices: Vec<usize> = map
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.x >= x0 && p.x <= x1)
        .map(|(i, _)| i)
        .collect();
    let ys: Vec<f64> = map.points.iter().map(|p| p.y).collect();
    split_rails_by_y(&ys, &indices)
}

/// Which ordinate a planar fit regresses on x.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitPlane {
    /// x-y: lateral ordinate.
    Xy,
    /// x-z: vertical ordinate.
    Xz,
}

impl FitPlane {
    fn ordinate(self, p: &Vec3) -> f64 {
        match self {
            FitPlane::Xy => p.y,
            FitPlane::Xz => p.z,
        }
    }
}

/// Least-squares `w = a·u² + b·u + c` with `u = x − center`, the center
/// being the domain midpoint (coefficients are reported in centered
/// coordinates; the domain is retained).
#[derive(Clone, Copy, Debug)]
pub struct QuadraticFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub plane: FitPlane,
    pub x_min: f64,
    pub x_max: f64,
    pub center: f64,
}

impl QuadraticFit {
    pub fn eval(&self, x: f64) -> f64 {
        let u = x - self.center;
        self.a * u * u + self.b * u + self.c
    }

    /// Coefficients of the equivalent uncentered polynomial in x.
    pub fn uncentered(&self) -> (f64, f64, f64) {
        let m = self.center;
        (self.a, self.b - 2.0 * self.a * m, self.a * m * m - self.b * m + self.c)
    }
}

pub fn fit_quadratic(points: &[Vec3], plane: FitPlane) -> Result<QuadraticFit, GeometryError> {
    fit_quadratic_xw(
        &points.iter().map(|p| (p.x, plane.ordinate(p))).collect::<Vec<_>>(),
        plane,
    )
}

pub fn fit_quadratic_xw(
    pts: &[(f64, f64)],
    plane: FitPlane,
) -> Result<QuadraticFit, GeometryError> {
    if pts.len() < 3 {
        return Err(GeometryError::TooFewPoints { needed: 3, got: pts.len() });
    }
    let mut distinct: Vec<f64> = pts.iter().map(|p| p.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(GeometryError::RankDeficient);
    }
    let x_min = distinct[0];
    let x_max = *distinct.last().unwrap();
    let center = 0.5 * (x_min + x_max);
    // Normal equations on centered abscissae; conditioning is fine for
    // window-sized domains in f64.
    let (mut s0, mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0);
    for &(x, w) in pts {
        let u = x - center;
        let u2 = u * u;
        s0 += 1.0;
        s1 += u;
        s2 += u2;
        s3 += u2 * u;
        s4 += u2 * u2;
        t0 += w;
        t1 += u * w;
        t2 += u2 * w;
    }
    let m = Matrix3::new(s4, s3, s2, s3, s2, s1, s2, s1, s0);
    let rhs = Vec3::new(t2, t1, t0);
    let sol = m.lu().solve(&rhs).ok_or(GeometryError::RankDeficient)?;
    Ok(QuadraticFit { a: sol.x, b: sol.y, c: sol.z, plane, x_min, x_max, center })
}

/// Least-squares line `w = slope·x + intercept`. Returns `None` when the
/// abscissae are (numerically) all equal.
pub(crate) fn fit_line(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_w = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxw = 0.0;
    for &(x, w) in pts {
        sxx += (x - mean_x) * (x - mean_x);
        sxw += (x - mean_x) * (w - mean_w);
    }
    if sxx < 1e-12 {
        return None;
    }
    let slope = sxw / sxx;
    Some((slope, mean_w - slope * mean_x))
}

/// In-plane (yaw) re-alignment of a point subset: rotates about z so the
/// principal horizontal direction maps to +x. Centroid-centered.
pub(crate) struct YawFrame {
    cos: f64,
    sin: f64,
    center: Vector2<f64>,
}

impl YawFrame {
    pub fn fit(points: impl Iterator<Item = Vec3> + Clone) -> Self {
        let mut n = 0.0;
        let mut mean = Vector2::zeros();
        for p in points.clone() {
            mean += Vector2::new(p.x, p.y);
            n += 1.0;
        }
        mean /= n;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for p in points {
            let dx = p.x - mean.x;
            let dy = p.y - mean.y;
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        let theta = 0.5 * f64::atan2(2.0 * sxy, sxx - syy);
        let (mut sin, mut cos) = theta.sin_cos();
        if cos < 0.0 {
            cos = -cos;
            sin = -sin;
        }
        YawFrame { cos, sin, center: mean }
    }

    /// (x', y', z) local coordinates.
    pub fn local(&self, p: Vec3) -> Vec3 {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        Vec3::new(self.cos * dx + self.sin * dy, -self.sin * dx + self.cos * dy, p.z)
    }
}

/// Outlier rejection controls; thresholds are the published ones.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RejectParams {
    pub segment_len: f64,
    /// Lateral distance-to-curve removal threshold (strict >), meters.
    pub xy_threshold: f64,
    /// Vertical removal threshold (strict >), meters.
    pub xz_threshold: f64,
    /// Segments with fewer rail points pass through untouched.
    pub min_segment_points: usize,
}

impl Default for RejectParams {
    fn default() -> Self {
        RejectParams {
            segment_len: 5.0,
            xy_threshold: 0.07,
            xz_threshold: 0.08,
            min_segment_points: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OutlierReport {
    pub map: RailMap,
    pub removed: usize,
    /// Segments passed through untouched (too sparse or unfittable).
    pub skipped_segments: usize,
}

/// Per 5 m longitudinal segment and per rail: re-align via PCA in the
/// horizontal plane, fit quadratics in x-y and x-z, and remove points
/// whose distance to either curve exceeds its threshold (union of the two
/// filters; strictly greater, so a point exactly at the threshold stays).
pub fn reject_outliers(map: &RailMap, params: &RejectParams) -> OutlierReport {
    let mut keep = vec![true; map.points.len()];
    let mut removed = 0usize;
    let mut skipped = 0usize;
    if map.points.is_empty() {
        return OutlierReport { map: map.clone(), removed, skipped_segments: 0 };
    }
    let (x_lo, x_hi) = map.x_extent();
    let n_segments = ((x_hi - x_lo) / params.segment_len).ceil().max(1.0) as usize;
    let ys: Vec<f64> = map.points.iter().map(|p| p.y).collect();
    for seg in 0..n_segments {
        let s0 = x_lo + seg as f64 * params.segment_len;
        let s1 = s0 + params.segment_len;
        let in_seg: Vec<usize> = map
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.x >= s0 && (p.x < s1 || (seg == n_segments - 1 && p.x <= s1)))
            .map(|(i, _)| i)
            .collect();
        if in_seg.len() < params.min_segment_points {
            skipped += 1;
            continue;
        }
        let rails: Vec<Vec<usize>> = match split_rails_by_y(&ys, &in_seg) {
            Ok(pair) => vec![pair.left, pair.right],
            // One lateral cluster: treat the segment as a single rail.
            Err(_) => vec![in_seg.clone()],
        };
        for rail in rails {
            if rail.len() < params.min_segment_points {
                skipped += 1;
                continue;
            }
            let frame = YawFrame::fit(rail.iter().map(|&i| map.points[i]));
            let local: Vec<Vec3> = rail.iter().map(|&i| frame.local(map.points[i])).collect();
            let fit_xy = fit_quadratic(&local, FitPlane::Xy);
            let fit_xz = fit_quadratic(&local, FitPlane::Xz);
            let (Ok(fit_xy), Ok(fit_xz)) = (fit_xy, fit_xz) else {
                skipped += 1;
                continue;
            };
            for (k, &i) in rail.iter().enumerate() {
                let p = local[k];
                let dy = (p.y - fit_xy.eval(p.x)).abs();
                let dz = (p.z - fit_xz.eval(p.x)).abs();
                if dy > params.xy_threshold || dz > params.xz_threshold {
                    if keep[i] {
                        keep[i] = false;
                        removed += 1;
                    }
                }
            }
        }
    }
    let points: Vec<Vec3> =
        map.points.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
    OutlierReport {
        map: RailMap { points, alignment: map.alignment },
        removed,
        skipped_segments: skipped,
    }
}
