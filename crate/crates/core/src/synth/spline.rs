//! Natural cubic spline interpolation with analytic derivatives.

/// Natural cubic spline through `(t, value)` knots; C² on the knot range.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    ts: Vec<f64>,
    /// Per-interval coefficients of `a + b·u + c·u² + d·u³`, `u = t − t_k`.
    coeffs: Vec<[f64; 4]>,
}

impl CubicSpline {
    /// Knot times must be strictly increasing; at least two knots.
    pub fn new(ts: &[f64], ys: &[f64]) -> Self {
        assert!(ts.len() == ys.len() && ts.len() >= 2, "need ≥ 2 matching knots");
        assert!(ts.windows(2).all(|w| w[1] > w[0]), "knot times must increase");
        let n = ts.len();
        let m = second_derivatives(ts, ys);
        let mut coeffs = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let h = ts[i + 1] - ts[i];
            let a = ys[i];
            let b = (ys[i + 1] - ys[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
            let c = m[i] / 2.0;
            let d = (m[i + 1] - m[i]) / (6.0 * h);
            coeffs.push([a, b, c, d]);
        }
        CubicSpline { ts: ts.to_vec(), coeffs }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.ts[0], *self.ts.last().unwrap())
    }

    fn interval(&self, t: f64) -> usize {
        match self.ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.coeffs.len() - 1),
            Err(i) => i.saturating_sub(1).min(self.coeffs.len() - 1),
        }
    }

    /// Value, first, and second derivative at `t` (clamped to the domain).
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let (lo, hi) = self.domain();
        let t = t.clamp(lo, hi);
        let i = self.interval(t);
        let [a, b, c, d] = self.coeffs[i];
        let u = t - self.ts[i];
        (
            a + u * (b + u * (c + u * d)),
            b + u * (2.0 * c + u * 3.0 * d),
            2.0 * c + 6.0 * d * u,
        )
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }
}

/// Natural boundary conditions: zero second derivative at the ends.
/// Tridiagonal (Thomas) solve.
fn second_derivatives(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = ts.len();
    let mut m = vec![0.0; n];
    if n == 2 {
        return m;
    }
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = ts[i] - ts[i - 1];
        let h1 = ts[i + 1] - ts[i];
        sub[i] = h0;
        diag[i] = 2.0 * (h0 + h1);
        sup[i] = h1;
        rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    // Forward sweep over the interior rows.
    for i in 2..n - 1 {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    for i in (1..n - 1).rev() {
        m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
    }
    m
}
