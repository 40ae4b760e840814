//! The Van der Pol family `D^2 g + mu (g^2 - 1) Dg + g = 0`, residual
//! diagnostics and the empirical iteration and cost models.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::collocation::{LinearizedCoefficients, OdeProblem, SecondOrderOde};
use crate::drivers::{sample_grid, PiecewiseSolution};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VdpParams {
    pub mu: f64,
    pub g0: f64,
    pub dg0: f64,
}

impl VdpParams {
    /// `g(0) = 1`, `Dg(0) = 0`.
    pub fn new(mu: f64) -> Self {
        Self {
            mu,
            g0: 1.0,
            dg0: 0.0,
        }
    }

    pub fn with_initial_state(mut self, g0: f64, dg0: f64) -> Self {
        self.g0 = g0;
        self.dg0 = dg0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(invalid(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }
}

/// `F(x, g, Dg) = mu (1 - g^2) Dg - g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanDerPol {
    pub mu: f64,
}

impl SecondOrderOde for VanDerPol {
    fn f(&self, _x: f64, g: f64, dg: f64) -> f64 {
        self.mu * (1.0 - g * g) * dg - g
    }

    fn df_dg(&self, _x: f64, g: f64, dg: f64) -> f64 {
        -2.0 * self.mu * g * dg - 1.0
    }

    fn df_ddg(&self, _x: f64, g: f64, _dg: f64) -> f64 {
        self.mu * (1.0 - g * g)
    }

    fn partials(&self, _x: f64, g: f64, dg: f64) -> [f64; 3] {
        let damping = self.mu * (1.0 - g * g);
        [damping * dg - g, -2.0 * self.mu * g * dg - 1.0, damping]
    }

    fn name(&self) -> String {
        format!("van-der-pol(mu={})", self.mu)
    }
}

pub fn vdp_problem(p: &VdpParams) -> Result<OdeProblem> {
    p.validate()?;
    OdeProblem::with_initial_state(Arc::new(VanDerPol { mu: p.mu }), p.g0, p.dg0)
}

/// Closed-form Newton coefficients about `(g, Dg)`:
/// `p = -mu (1 - g^2)`, `q = 1 + 2 mu g Dg`, `s = 2 mu g^2 Dg`.
pub fn vdp_linearization(mu: f64, g: f64, dg: f64) -> LinearizedCoefficients {
    LinearizedCoefficients {
        p: -mu * (1.0 - g * g),
        q: 1.0 + 2.0 * mu * g * dg,
        s: 2.0 * mu * g * g * dg,
    }
}

/// `err(x) = D^2 f + mu (f^2 - 1) Df + f`.
pub fn residual(s: &PiecewiseSolution, p: &VdpParams, x: f64) -> Result<f64> {
    let [f, df, d2f] = s.eval3(x)?;
    Ok(d2f + p.mu * (f * f - 1.0) * df + f)
}

/// `C (h^{k-2} + h^k + mu (3 h^{k-1} + h^{3k-1} / 4)) + 4 mu^2 h^k`.
///
/// Derived for boundary-value collocation; for initial-value runs it is a
/// scale indicator only.
pub fn residual_bound(k: usize, mesh: f64, mu: f64, c: f64) -> Result<f64> {
    if k < 4 {
        return Err(invalid(format!("residual bound needs k >= 4, got {k}")));
    }
    if !(mesh > 0.0) {
        return Err(invalid(format!("mesh size must be positive, got {mesh}")));
    }
    let k = k as i32;
    let h = |e: i32| mesh.powi(e);
    Ok(c * (h(k - 2) + h(k) + mu * (3.0 * h(k - 1) + 0.25 * h(3 * k - 1))) + 4.0 * mu * mu * h(k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSamples {
    pub points: Vec<(f64, f64)>,
    pub max_g_dg: f64,
}

/// The sampling grid of every piece, joins listed once.
fn solution_grid(s: &PiecewiseSolution, spi: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = Vec::new();
    for piece in s.pieces() {
        for x in sample_grid(piece.spline.knots().breaks(), spi) {
            if xs.last().is_none_or(|&last| x > last) {
                xs.push(x);
            }
        }
    }
    xs
}

/// `(f, Df)` over the sampling grid, with `max |f Df|`.
pub fn phase_samples(s: &PiecewiseSolution, spi: usize) -> Result<PhaseSamples> {
    let mut points = Vec::new();
    let mut max_g_dg: f64 = 0.0;
    for x in solution_grid(s, spi) {
        let [f, df, _] = s.eval3(x)?;
        max_g_dg = max_g_dg.max((f * df).abs());
        points.push((f, df));
    }
    Ok(PhaseSamples { points, max_g_dg })
}

/// Interior extrema `(x, f(x))`: sign changes of `Df` on the grid, located
/// by bisection.
pub fn turning_points(s: &PiecewiseSolution, spi: usize) -> Result<Vec<(f64, f64)>> {
    let xs = solution_grid(s, spi);
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &x in &xs {
        let d = s.eval(x, 1)?;
        if let Some((x0, d0)) = prev {
            if d0 != 0.0 && d != 0.0 && (d0 < 0.0) != (d < 0.0) {
                let (mut lo, mut hi, mut dlo) = (x0, x, d0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let dm = s.eval(mid, 1)?;
                    if (dm < 0.0) == (dlo < 0.0) {
                        lo = mid;
                        dlo = dm;
                    } else {
                        hi = mid;
                    }
                }
                let xr = 0.5 * (lo + hi);
                out.push((xr, s.eval(xr, 0)?));
            }
        }
        if d != 0.0 {
            prev = Some((x, d));
        }
    }
    Ok(out)
}

/// Extrema of `|f|` after the first period (the first two interior turning
/// points are discarded).
pub fn post_transient_amplitudes(s: &PiecewiseSolution, spi: usize) -> Result<Vec<f64>> {
    Ok(turning_points(s, spi)?
        .into_iter()
        .skip(2)
        .map(|(_, g)| g.abs())
        .collect())
}

/// `N_seg(w) = N_ori / w^lambda + N_min w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationModel {
    pub n_ori: f64,
    pub n_min: f64,
    pub lambda: f64,
    /// Sum of squared residuals of the log-log regression.
    pub fit_residual: f64,
    /// Points discarded because `w` or `N_seg` was not positive.
    pub dropped: usize,
}

impl IterationModel {
    pub fn predict(&self, w: f64) -> f64 {
        self.n_ori / w.powf(self.lambda) + self.n_min * w
    }
}

/// Least-squares slope through the origin and its residual.
fn origin_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let slope = sxy / sxx;
    let ssr = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    (slope, ssr)
}

/// Fits `log((N_seg - w N_min) / N_ori) = -lambda log w`, searching `N_min`
/// on a 2000-point grid over `(0, min N_seg / w)` and refining the best cell
/// by golden-section search.
pub fn fit_iteration_model(points: &[(f64, f64)], n_ori: f64) -> Result<IterationModel> {
    if !(n_ori > 0.0) {
        return Err(invalid(format!("N_ori must be positive, got {n_ori}")));
    }
    fit_model(points, Some(n_ori))
}

/// [`fit_iteration_model`] with `N_ori` estimated as well, from the
/// intercept of `log(N_seg - w N_min) = log N_ori - lambda log w`. Useful
/// when the whole-range run itself cannot be measured.
pub fn estimate_iteration_model(points: &[(f64, f64)]) -> Result<IterationModel> {
    fit_model(points, None)
}

fn fit_model(points: &[(f64, f64)], n_ori: Option<f64>) -> Result<IterationModel> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(w, n)| w > 0.0 && n > 0.0 && w.is_finite() && n.is_finite())
        .collect();
    let dropped = points.len() - usable.len();
    let mut ws: Vec<f64> = usable.iter().map(|p| p.0).collect();
    ws.sort_by(f64::total_cmp);
    if ws.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("iteration-model points must have distinct w"));
    }
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "iteration-model fit needs at least 3 usable points, got {}",
            usable.len()
        )));
    }
    if usable.iter().all(|&(w, _)| w == 1.0) {
        return Err(Error::InsufficientData("no point with w != 1".to_string()));
    }
    let x: Vec<f64> = usable.iter().map(|&(w, _)| w.ln()).collect();
    // (slope, log N_ori, residual) for a candidate N_min
    let fit = |c: f64| -> (f64, f64, f64) {
        match n_ori {
            Some(n_ori) => {
                let y: Vec<f64> = usable.iter().map(|&(w, n)| ((n - w * c) / n_ori).ln()).collect();
                let (slope, ssr) = origin_fit(&x, &y);
                (slope, n_ori.ln(), ssr)
            }
            None => {
                let y: Vec<f64> = usable.iter().map(|&(w, n)| (n - w * c).ln()).collect();
                let (slope, intercept, ssr) = linear_fit(&x, &y).expect("distinct w");
                (slope, intercept, ssr)
            }
        }
    };
    let upper = usable.iter().map(|&(w, n)| n / w).fold(f64::INFINITY, f64::min);
    const GRID: usize = 2000;
    let cell = upper / (GRID + 1) as f64;
    let mut best = (1, f64::INFINITY);
    for i in 1..=GRID {
        let ssr = fit(cell * i as f64).2;
        if ssr < best.1 {
            best = (i, ssr);
        }
    }
    let (mut lo, mut hi) = (cell * (best.0 - 1) as f64, cell * (best.0 + 1) as f64);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c1 = hi - phi * (hi - lo);
    let mut c2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (fit(c1).2, fit(c2).2);
    for _ in 0..200 {
        if hi - lo <= 1e-14 * upper {
            break;
        }
        if f1 <= f2 {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - phi * (hi - lo);
            f1 = fit(c1).2;
        } else {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + phi * (hi - lo);
            f2 = fit(c2).2;
        }
    }
    let refined = if f1 <= f2 { c1 } else { c2 };
    let grid_best = cell * best.0 as f64;
    let n_min = if fit(refined).2 <= best.1 { refined } else { grid_best };
    let (slope, log_n_ori, ssr) = fit(n_min);
    Ok(IterationModel {
        n_ori: n_ori.unwrap_or_else(|| log_n_ori.exp()),
        n_min,
        lambda: -slope,
        fit_residual: ssr,
        dropped,
    })
}

/// `w = (lambda N_ori / N_min)^{1 / (1 + lambda)}`, the minimiser of the
/// iteration model.
pub fn optimal_w(lambda: f64, n_ori: f64, n_min: f64) -> f64 {
    (lambda * n_ori / n_min).powf(1.0 / (1.0 + lambda))
}

/// `y = intercept + slope x` by ordinary least squares.
fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Some((slope, intercept, ssr))
}

/// `cost = A mu^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuCostFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub fit_residual: f64,
}

pub fn fit_mu_cost(points: &[(f64, f64)]) -> Result<MuCostFit> {
    if let Some(&(mu, c)) = points.iter().find(|&&(mu, c)| !(mu > 0.0 && c > 0.0)) {
        return Err(invalid(format!(
            "mu and cost must be positive, got ({mu}, {c})"
        )));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    if points.len() >= 2 && x.iter().all(|&v| v == x[0]) {
        return Err(invalid("all mu values are equal; the regression is degenerate"));
    }
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "mu-cost fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let (m, b, ssr) = linear_fit(&x, &y).expect("distinct abscissae");
    Ok(MuCostFit {
        exponent: m,
        prefactor: b.exp(),
        fit_residual: ssr,
    })
}

/// Least-squares slope of `log err` against `log mesh`.
pub fn convergence_order(errors: &[(f64, f64)]) -> Result<f64> {
    if errors.len() < 2 {
        return Err(invalid("convergence order needs at least two points"));
    }
    if errors.iter().any(|&(h, e)| !(h > 0.0 && e > 0.0)) {
        return Err(invalid("mesh sizes and errors must be positive"));
    }
    let x: Vec<f64> = errors.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|p| p.1.ln()).collect();
    linear_fit(&x, &y)
        .map(|(m, _, _)| m)
        .ok_or_else(|| invalid("mesh sizes must be distinct"))
}
