use std::sync::Arc;

use crate::abd::{solve_finite, AbdMatrix, RhsVector};
use crate::bspline::{eval_basis, KnotVector, Spline};
use crate::collocation::{assemble_into, BasisCache, DatasiteSet, OdeProblem};
use crate::error::{invalid, Error, Result};
use crate::flops::FlopCounter;

/// Default `|f_r(b*)|` beyond which the iteration is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub iter_max: usize,
    /// Abscissa at which successive iterates are compared.
    pub b_star: f64,
    /// Run exactly `iter_max` iterations, ignoring the stopping test.
    pub fixed_iterations: bool,
    /// `|f_r(b*)|` above which the run is declared divergent.
    pub divergence_bound: f64,
}

impl NewtonOptions {
    pub fn new(tol: f64, iter_max: usize, b_star: f64) -> Self {
        Self {
            tol,
            iter_max,
            b_star,
            fixed_iterations: false,
            divergence_bound: DIVERGENCE_BOUND,
        }
    }

    pub fn with_divergence_bound(mut self, bound: f64) -> Self {
        self.divergence_bound = bound;
        self
    }

    pub fn fixed(mut self, fixed: bool) -> Self {
        self.fixed_iterations = fixed;
        self
    }
}

/// The last three right-end values, newest first; slots start unset.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RightEndHistory {
    slots: [Option<f64>; 3],
}

impl RightEndHistory {
    pub fn push(&mut self, v: f64) {
        self.slots = [Some(v), self.slots[0], self.slots[1]];
    }

    /// `f_{r-age}(b*)`, if recorded.
    pub fn get(&self, age: usize) -> Option<f64> {
        self.slots.get(age).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.slots[0].is_none()
    }

    /// `|f_r - f_{r-1}| < tol` and `|f_r - f_{r-2}| < tol`.
    pub fn is_settled(&self, tol: f64) -> bool {
        match self.slots {
            [Some(f0), Some(f1), Some(f2)] => (f0 - f1).abs() < tol && (f0 - f2).abs() < tol,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonState {
    pub iteration: usize,
    pub history: RightEndHistory,
    pub converged: bool,
    /// `f_r(b*)` for every completed iteration.
    pub trace: Vec<f64>,
}

/// Outcome of a Newton run that may have stopped early.
#[derive(Debug, Clone)]
pub struct NewtonRun {
    /// Last iterate with finite coefficients.
    pub spline: Spline,
    pub state: NewtonState,
    pub failure: Option<Error>,
    pub flops: FlopCounter,
}

/// Newton quasilinearization from `start` until the right-end value settles.
///
/// Divergence and singular systems are returned as errors.
pub fn newton_solve(
    problem: &OdeProblem,
    knots: &Arc<KnotVector>,
    sites: &DatasiteSet,
    start: Spline,
    opts: &NewtonOptions,
) -> Result<(Spline, NewtonState)> {
    let cache = BasisCache::new(knots, sites)?;
    let run = newton_iterate(problem, sites, &cache, start, opts)?;
    match run.failure {
        Some(e) => Err(e),
        None => Ok((run.spline, run.state)),
    }
}

/// Like [`newton_solve`] but keeps the partial result when the iteration
/// fails; only setup errors are returned as `Err`.
pub fn newton_iterate(
    problem: &OdeProblem,
    sites: &DatasiteSet,
    cache: &BasisCache,
    start: Spline,
    opts: &NewtonOptions,
) -> Result<NewtonRun> {
    if !(opts.tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if opts.iter_max == 0 {
        return Err(invalid("iteration cap must be at least 1"));
    }
    let knots = cache.knots().clone();
    if start.knots() != knots.as_ref() {
        return Err(invalid("starting spline is defined on a different knot vector"));
    }
    let at_bstar = eval_basis(&knots, opts.b_star, 1)?;

    let mut current = start;
    let mut state = NewtonState::default();
    let mut flops = FlopCounter::new();
    let mut failure = None;
    let mut a = AbdMatrix::zeros(knots.order(), knots.breaks().intervals())?;
    let mut rhs = RhsVector::zeros(a.n());
    for r in 1..=opts.iter_max {
        assemble_into(problem, sites, &current, cache, &mut a, &mut rhs, &mut flops)?;
        if !a.is_finite() || !rhs.is_finite() {
            // the linearization overflowed about an extreme iterate
            failure = Some(Error::Divergence {
                iteration: r,
                value: f64::INFINITY,
            });
            break;
        }
        let alpha = match solve_finite(&a, &rhs, &mut flops) {
            Ok(alpha) => alpha,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        if alpha.iter().any(|c| !c.is_finite()) {
            failure = Some(Error::Divergence {
                iteration: r,
                value: f64::NAN,
            });
            break;
        }
        let next = Spline::new(knots.clone(), alpha)?;
        let v = next.eval_with_table(&at_bstar, 0);
        if !v.is_finite() || v.abs() > opts.divergence_bound {
            failure = Some(Error::Divergence {
                iteration: r,
                value: v,
            });
            break;
        }
        current = next;
        state.iteration = r;
        state.history.push(v);
        state.trace.push(v);
        if !opts.fixed_iterations && state.history.is_settled(opts.tol) {
            state.converged = true;
            break;
        }
    }
    if opts.fixed_iterations && failure.is_none() {
        state.converged = state.history.is_settled(opts.tol);
    }
    Ok(NewtonRun {
        spline: current,
        state,
        failure,
        flops,
    })
}
