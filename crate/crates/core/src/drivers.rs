//! Whole-range, expanding-range and segmented solution strategies.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bspline::{BreakSequence, KnotVector, Spline};
use crate::collocation::{
    build_datasites, initial_guess_cached, legendre_pattern, newton_iterate, BasisCache,
    DatasiteSet, NewtonOptions, NewtonRun, OdeProblem, DIVERGENCE_BOUND, MAX_ORDER,
};
use crate::error::{invalid, Error, Result};
use crate::flops::FlopCounter;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Original,
    Expanding,
    Segmented,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Original => "original",
            Method::Expanding => "expanding",
            Method::Segmented => "segmented",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Method::Original),
            "expanding" => Ok(Method::Expanding),
            "segmented" => Ok(Method::Segmented),
            _ => Err(invalid(format!(
                "unknown method '{s}' (expected original, expanding or segmented)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub k: usize,
    pub l: usize,
    pub a: f64,
    pub b: f64,
    pub tol: f64,
    /// Newton cap applied to each stage or segment separately.
    pub iter_max: usize,
    pub w: usize,
    pub method: Method,
    pub samples_per_interval: usize,
    /// Run exactly `iter_max` iterations per stage (cost measurements).
    pub fixed_iterations: bool,
    /// `|f_r(b*)|` treated as divergence; `inf` keeps only the NaN/Inf test.
    pub divergence_bound: f64,
}

impl SolverConfig {
    pub const DEFAULT_TOL: f64 = 1e-4;
    pub const DEFAULT_ITER_MAX: usize = 10_000;
    pub const DEFAULT_SAMPLES_PER_INTERVAL: usize = 16;

    pub fn new(k: usize, l: usize, a: f64, b: f64) -> Self {
        Self {
            k,
            l,
            a,
            b,
            tol: Self::DEFAULT_TOL,
            iter_max: Self::DEFAULT_ITER_MAX,
            w: 1,
            method: Method::Original,
            samples_per_interval: Self::DEFAULT_SAMPLES_PER_INTERVAL,
            fixed_iterations: false,
            divergence_bound: DIVERGENCE_BOUND,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_w(mut self, w: usize) -> Self {
        self.w = w;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_iter_max(mut self, iter_max: usize) -> Self {
        self.iter_max = iter_max;
        self
    }

    pub fn with_samples_per_interval(mut self, spi: usize) -> Self {
        self.samples_per_interval = spi;
        self
    }

    pub fn with_fixed_iterations(mut self, fixed: bool) -> Self {
        self.fixed_iterations = fixed;
        self
    }

    pub fn with_divergence_bound(mut self, bound: f64) -> Self {
        self.divergence_bound = bound;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(3..=MAX_ORDER).contains(&self.k) {
            return Err(invalid(format!("k must satisfy 3 <= k <= {MAX_ORDER}, got {}", self.k)));
        }
        if self.l == 0 {
            return Err(invalid("l must be at least 1"));
        }
        if !(self.a < self.b) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(invalid(format!(
                "range requires a < b, got [{}, {}]",
                self.a, self.b
            )));
        }
        if !(self.tol > 0.0) {
            return Err(invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(invalid("divergence_bound must be positive"));
        }
        if self.iter_max == 0 {
            return Err(invalid("iter_max must be at least 1"));
        }
        if self.w == 0 || !self.l.is_multiple_of(self.w) {
            return Err(invalid(format!(
                "w must divide l and be >= 1 (w = {}, l = {})",
                self.w, self.l
            )));
        }
        if self.method == Method::Original && self.w != 1 {
            return Err(invalid("method original requires w = 1"));
        }
        Ok(())
    }
}

/// One spline of a piecewise solution, valid on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub spline: Spline,
}

/// Consecutive pieces sharing their endpoints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PiecewiseSolution {
    pieces: Vec<Piece>,
}

impl PiecewiseSolution {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.windows(2).any(|w| w[0].b != w[1].a) {
            return Err(invalid("solution pieces must share their endpoints"));
        }
        Ok(Self { pieces })
    }

    pub fn single(spline: Spline) -> Self {
        Self {
            pieces: vec![Piece {
                a: spline.start(),
                b: spline.end(),
                spline,
            }],
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn start(&self) -> Option<f64> {
        self.pieces.first().map(|p| p.a)
    }

    pub fn end(&self) -> Option<f64> {
        self.pieces.last().map(|p| p.b)
    }

    /// Piece holding `x`; at a join the later piece is used.
    pub fn piece_at(&self, x: f64) -> Result<&Piece> {
        let (lo, hi) = match (self.start(), self.end()) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Err(invalid("empty solution")),
        };
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfRange { x, lo, hi });
        }
        let i = self.pieces.partition_point(|p| p.b <= x);
        Ok(&self.pieces[i.min(self.pieces.len() - 1)])
    }

    pub fn eval(&self, x: f64, deriv: usize) -> Result<f64> {
        self.piece_at(x)?.spline.eval(x, deriv)
    }

    /// `[f, Df, D^2 f]` at `x`.
    pub fn eval3(&self, x: f64) -> Result<[f64; 3]> {
        let d = self.piece_at(x)?.spline.eval_derivs(x, 3)?;
        Ok([d[0], d[1], d[2]])
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub method: Method,
    pub k: usize,
    pub l: usize,
    pub w: usize,
    pub solution: PiecewiseSolution,
    pub iterations_per_segment: Vec<usize>,
    pub wall_seconds: f64,
    pub flop_estimate: f64,
    /// Operations tallied during assembly and elimination.
    pub counted_flops: u64,
    pub err_inf: f64,
    pub err_samples: Vec<(f64, f64)>,
    pub converged: bool,
    /// Why the run stopped early, if it did.
    pub failure: Option<String>,
}

impl SolveReport {
    /// Total Newton iterations `N`.
    pub fn iterations(&self) -> usize {
        self.iterations_per_segment.iter().sum()
    }
}

/// `(k^3 + k^2 + k) N l`.
pub fn flop_estimate(k: usize, n_iters: usize, l: usize) -> f64 {
    let k = k as f64;
    (k * k * k + k * k + k) * n_iters as f64 * l as f64
}

/// Every break plus `spi` equally spaced interior points per interval.
pub fn sample_grid(breaks: &BreakSequence, spi: usize) -> Vec<f64> {
    let xi = breaks.as_slice();
    let mut xs = Vec::with_capacity(breaks.intervals() * (spi + 1) + 1);
    for w in xi.windows(2) {
        xs.push(w[0]);
        let h = w[1] - w[0];
        for j in 1..=spi {
            xs.push(w[0] + h * j as f64 / (spi + 1) as f64);
        }
    }
    xs.push(breaks.end());
    xs
}

/// Dispatches on `cfg.method`.
pub fn solve(problem: &OdeProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    match cfg.method {
        Method::Original => solve_original(problem, cfg),
        Method::Expanding => solve_expanding(problem, cfg),
        Method::Segmented => solve_segmented(problem, cfg),
    }
}

struct Stage {
    spline: Spline,
    iterations: usize,
    intervals: usize,
    flops: FlopCounter,
    failure: Option<String>,
}

fn run_stage(
    problem: &OdeProblem,
    cfg: &SolverConfig,
    breaks: BreakSequence,
    start: impl FnOnce(&BasisCache, &DatasiteSet) -> Result<Spline>,
) -> Result<Stage> {
    let intervals = breaks.intervals();
    let sites = build_datasites(&breaks, &legendre_pattern(cfg.k - 2))?;
    let knots = Arc::new(KnotVector::for_ode(breaks, cfg.k)?);
    let cache = BasisCache::new(&knots, &sites)?;
    let start = start(&cache, &sites)?;
    let opts = NewtonOptions::new(cfg.tol, cfg.iter_max, knots.end())
        .fixed(cfg.fixed_iterations)
        .with_divergence_bound(cfg.divergence_bound);
    let NewtonRun {
        spline,
        state,
        failure,
        flops,
    } = newton_iterate(problem, &sites, &cache, start, &opts)?;
    let failure = match failure {
        Some(e) => Some(e.to_string()),
        None if !state.converged => Some(format!(
            "no convergence within {} iterations on [{}, {}]",
            cfg.iter_max,
            knots.start(),
            knots.end()
        )),
        None => None,
    };
    Ok(Stage {
        spline,
        iterations: state.iteration,
        intervals,
        flops,
        failure,
    })
}

struct Outcome {
    pieces: Vec<Piece>,
    stages: Vec<Stage>,
    seconds: f64,
}

fn finish(problem: &OdeProblem, cfg: &SolverConfig, breaks: &BreakSequence, out: Outcome) -> Result<SolveReport> {
    let Outcome {
        pieces,
        stages,
        seconds,
    } = out;
    let solution = PiecewiseSolution::new(pieces)?;
    let covered = solution.end().unwrap_or(cfg.a);
    let mut err_samples = Vec::new();
    if !solution.is_empty() {
        for x in sample_grid(breaks, cfg.samples_per_interval) {
            if x > covered {
                break;
            }
            let [f, df, d2f] = solution.eval3(x)?;
            err_samples.push((x, problem.residual(x, f, df, d2f)));
        }
    }
    let err_inf = err_samples.iter().map(|&(_, e)| e.abs()).fold(0.0, f64::max);
    let failure = stages.iter().find_map(|s| s.failure.clone());
    let flop_estimate = stages
        .iter()
        .map(|s| flop_estimate(cfg.k, s.iterations, s.intervals))
        .sum();
    let counted_flops = stages.iter().map(|s| s.flops.count()).sum();
    Ok(SolveReport {
        method: cfg.method,
        k: cfg.k,
        l: cfg.l,
        w: cfg.w,
        solution,
        iterations_per_segment: stages.iter().map(|s| s.iterations).collect(),
        wall_seconds: seconds,
        flop_estimate,
        counted_flops,
        err_inf,
        err_samples,
        converged: failure.is_none(),
        failure,
    })
}

/// One Newton solve over the whole range.
pub fn solve_original(problem: &OdeProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if cfg.method != Method::Original {
        return Err(invalid("solve_original requires method original"));
    }
    let breaks = BreakSequence::uniform(cfg.a, cfg.b, cfg.l)?;
    let clock = Instant::now();
    let (g0, dg0) = problem.initial_state();
    let stage = run_stage(problem, cfg, breaks.clone(), |cache, sites| {
        initial_guess_cached(cache, sites, cfg.a, g0, dg0)
    })?;
    let seconds = clock.elapsed().as_secs_f64();
    let pieces = vec![Piece {
        a: cfg.a,
        b: stage.spline.end(),
        spline: stage.spline.clone(),
    }];
    finish(
        problem,
        cfg,
        &breaks,
        Outcome {
            pieces,
            stages: vec![stage],
            seconds,
        },
    )
}

/// Solves on `[a, xi_{i l / w}]` for `i = 1..w`, seeding each stage with the
/// previous stage's coefficients and zeros for the new ones.
pub fn solve_expanding(problem: &OdeProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let breaks = BreakSequence::uniform(cfg.a, cfg.b, cfg.l)?;
    let step = cfg.l / cfg.w;
    let clock = Instant::now();
    let (g0, dg0) = problem.initial_state();
    let mut stages: Vec<Stage> = Vec::with_capacity(cfg.w);
    for i in 1..=cfg.w {
        let stage_breaks = breaks.slice(0, i * step)?;
        let prev = stages.last().map(|s| s.spline.coeffs().to_vec());
        let stage = run_stage(problem, cfg, stage_breaks, |cache, sites| match prev {
            None => initial_guess_cached(cache, sites, cfg.a, g0, dg0),
            Some(mut c) => {
                let knots = cache.knots();
                c.resize(knots.dimension(), 0.0);
                Spline::new(knots.clone(), c)
            }
        })?;
        let failed = stage.failure.is_some();
        stages.push(stage);
        if failed {
            break;
        }
    }
    let seconds = clock.elapsed().as_secs_f64();
    let last = &stages[stages.len() - 1].spline;
    let pieces = vec![Piece {
        a: cfg.a,
        b: last.end(),
        spline: last.clone(),
    }];
    finish(
        problem,
        cfg,
        &breaks,
        Outcome {
            pieces,
            stages,
            seconds,
        },
    )
}

/// Solves `w` consecutive segments of `l / w` intervals, each starting from
/// the value and slope of its predecessor at the shared break.
pub fn solve_segmented(problem: &OdeProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let breaks = BreakSequence::uniform(cfg.a, cfg.b, cfg.l)?;
    let step = cfg.l / cfg.w;
    let clock = Instant::now();
    let mut stages: Vec<Stage> = Vec::with_capacity(cfg.w);
    let mut pieces = Vec::with_capacity(cfg.w);
    for i in 0..cfg.w {
        let seg_breaks = breaks.slice(i * step, (i + 1) * step)?;
        let left = seg_breaks.start();
        let seg_problem = match stages.last() {
            None => problem.clone(),
            Some(prev) => {
                let d = prev.spline.eval_derivs(left, 2)?;
                problem.restarted(d[0], d[1])?
            }
        };
        let (g0, dg0) = seg_problem.initial_state();
        let stage = run_stage(&seg_problem, cfg, seg_breaks, |cache, sites| {
            initial_guess_cached(cache, sites, left, g0, dg0)
        })?;
        let failed = stage.failure.is_some();
        pieces.push(Piece {
            a: left,
            b: stage.spline.end(),
            spline: stage.spline.clone(),
        });
        stages.push(stage);
        if failed {
            break;
        }
    }
    let seconds = clock.elapsed().as_secs_f64();
    finish(
        problem,
        cfg,
        &breaks,
        Outcome {
            pieces,
            stages,
            seconds,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collocation::{FnOde, Harmonic};

    fn harmonic() -> OdeProblem {
        OdeProblem::with_initial_state(Arc::new(Harmonic), 1.0, 0.0).unwrap()
    }

    fn vdp(mu: f64) -> OdeProblem {
        let eq = FnOde {
            f: move |_x: f64, g: f64, dg: f64| mu * (1.0 - g * g) * dg - g,
            df_dg: move |_x: f64, g: f64, dg: f64| -2.0 * mu * g * dg - 1.0,
            df_ddg: move |_x: f64, g: f64, _dg: f64| mu * (1.0 - g * g),
        };
        OdeProblem::with_initial_state(Arc::new(eq), 1.0, 0.0).unwrap()
    }

    fn tau() -> f64 {
        std::f64::consts::TAU
    }

    #[test]
    fn flop_model_arithmetic() {
        assert_eq!(flop_estimate(5, 100, 40), 620000.0);
        assert_eq!(flop_estimate(5, 0, 40), 0.0);
        assert_eq!(flop_estimate(6, 7, 80), 2.0 * flop_estimate(6, 7, 40));
    }

    #[test]
    fn sample_grid_size() {
        let b = BreakSequence::uniform(0.0, 40.0, 80).unwrap();
        let g = sample_grid(&b, 16);
        assert_eq!(g.len(), 16 * 80 + 81);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*g.last().unwrap(), 40.0);
    }

    #[test]
    fn validation_messages() {
        let c = SolverConfig::new(5, 20, 0.0, 40.0).with_method(Method::Segmented).with_w(0);
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("w must divide l and be >= 1"), "{e}");
        assert!(SolverConfig::new(5, 20, 0.0, 40.0).with_method(Method::Segmented).with_w(3).validate().is_err());
        assert!(SolverConfig::new(2, 20, 0.0, 40.0).validate().is_err());
        assert!(SolverConfig::new(5, 20, 1.0, 1.0).validate().is_err());
        assert!(SolverConfig::new(5, 20, 0.0, 1.0).with_w(2).validate().is_err());
        assert_eq!("segmented".parse::<Method>().unwrap(), Method::Segmented);
        assert!("rk4".parse::<Method>().is_err());
    }

    #[test]
    fn original_on_linear_problem() {
        let cfg = SolverConfig::new(6, 32, 0.0, tau());
        let r = solve_original(&harmonic(), &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations(), 3);
        assert!(r.err_inf < 1e-6, "err_inf = {}", r.err_inf);
        for x in [0.3, 2.0, 5.5] {
            assert!((r.solution.eval(x, 0).unwrap() - f64::cos(x)).abs() < 1e-7);
        }
    }

    #[test]
    fn iteration_cap_gives_unconverged_report() {
        let cfg = SolverConfig::new(5, 20, 0.0, 40.0).with_iter_max(1);
        let r = solve_original(&vdp(0.05), &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.solution.pieces().len(), 1);
        assert!(!r.err_samples.is_empty());
    }

    #[test]
    fn single_window_reduces_to_original() {
        let p = vdp(0.25);
        let base = SolverConfig::new(5, 20, 0.0, 20.0);
        let o = solve(&p, &base).unwrap();
        for m in [Method::Expanding, Method::Segmented] {
            let r = solve(&p, &base.clone().with_method(m)).unwrap();
            assert_eq!(r.iterations_per_segment, o.iterations_per_segment);
            assert_eq!(r.solution, o.solution);
        }
    }

    #[test]
    fn expanding_matches_original_on_linear_problem() {
        let base = SolverConfig::new(5, 16, 0.0, tau());
        let o = solve(&harmonic(), &base).unwrap();
        let e = solve(&harmonic(), &base.clone().with_method(Method::Expanding).with_w(2)).unwrap();
        assert!(e.converged);
        assert_eq!(e.iterations_per_segment.len(), 2);
        for i in 0..=200 {
            let x = tau() * i as f64 / 200.0;
            let d = (e.solution.eval(x, 0).unwrap() - o.solution.eval(x, 0).unwrap()).abs();
            assert!(d < 1e-8, "x = {x}: {d}");
        }
    }

    #[test]
    fn segmented_pieces_join_continuously() {
        let cfg = SolverConfig::new(5, 40, 0.0, 20.0).with_method(Method::Segmented).with_w(8);
        let r = solve(&vdp(1.0), &cfg).unwrap();
        assert!(r.converged);
        let pieces = r.solution.pieces();
        assert_eq!(pieces.len(), 8);
        for w in pieces.windows(2) {
            let x = w[0].b;
            assert_eq!(w[0].b, w[1].a);
            let left = w[0].spline.eval_derivs(x, 2).unwrap();
            let right = w[1].spline.eval_derivs(x, 2).unwrap();
            assert_eq!(left[0], right[0]);
            assert!((left[1] - right[1]).abs() <= 1e-12 * left[1].abs().max(1.0));
        }
    }

    #[test]
    fn methods_agree_on_easy_problem() {
        let p = vdp(0.25);
        let base = SolverConfig::new(5, 40, 0.0, 40.0);
        let o = solve(&p, &base).unwrap();
        let e = solve(&p, &base.clone().with_method(Method::Expanding).with_w(4)).unwrap();
        let s = solve(&p, &base.clone().with_method(Method::Segmented).with_w(4)).unwrap();
        assert!(o.converged && e.converged && s.converged);
        for r in [&e, &s] {
            let ratio = r.err_inf / o.err_inf;
            assert!((0.5..=2.0).contains(&ratio), "{} vs {}", r.err_inf, o.err_inf);
        }
        assert!((e.err_inf - o.err_inf).abs() <= 0.1 * o.err_inf);
    }

    #[test]
    fn piecewise_lookup() {
        let cfg = SolverConfig::new(4, 4, 0.0, 4.0).with_method(Method::Segmented).with_w(2);
        let r = solve(&harmonic(), &cfg).unwrap();
        let s = &r.solution;
        assert_eq!(s.piece_at(2.0).unwrap().a, 2.0);
        assert_eq!(s.piece_at(4.0).unwrap().a, 2.0);
        assert_eq!(s.piece_at(0.0).unwrap().a, 0.0);
        assert!(s.eval(4.5, 0).is_err());
    }

    #[test]
    fn fixed_iteration_mode_runs_full_count() {
        let cfg = SolverConfig::new(4, 10, 0.0, 10.0).with_iter_max(7).with_fixed_iterations(true);
        let r = solve(&vdp(0.5), &cfg).unwrap();
        assert_eq!(r.iterations(), 7);
        assert!(r.counted_flops > 0);
    }
}
