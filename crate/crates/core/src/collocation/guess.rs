use std::sync::Arc;

use crate::bspline::{check_schoenberg_whitney, interpolate, solve_from_tables, KnotVector, Spline};
use crate::collocation::{BasisCache, DatasiteSet};
use crate::error::Result;

/// `f0(x) = (g_a + Dg_a (x - a)) (1 - tanh(x - a - 3)) / 2`: the tangent line
/// at `a`, switched off smoothly a few units to the right.
pub fn supposed_solution(x: f64, a: f64, g_a: f64, dg_a: f64) -> f64 {
    (g_a + dg_a * (x - a)) * (1.0 - (x - a - 3.0).tanh()) / 2.0
}

/// Spline interpolating [`supposed_solution`] at the left end, every
/// datasite and the right end (`n` conditions in all).
pub fn initial_guess(
    knots: &Arc<KnotVector>,
    sites: &DatasiteSet,
    a: f64,
    g_a: f64,
    dg_a: f64,
) -> Result<Spline> {
    interpolate(knots.clone(), &guess_sites(knots, sites), &guess_values(knots, sites, a, g_a, dg_a))
}

/// [`initial_guess`] reusing the basis tables of a collocation cache.
pub(crate) fn initial_guess_cached(
    cache: &BasisCache,
    sites: &DatasiteSet,
    a: f64,
    g_a: f64,
    dg_a: f64,
) -> Result<Spline> {
    let knots = cache.knots();
    check_schoenberg_whitney(knots, &guess_sites(knots, sites))?;
    solve_from_tables(knots.clone(), cache.all_tables(), &guess_values(knots, sites, a, g_a, dg_a))
}

fn guess_sites(knots: &KnotVector, sites: &DatasiteSet) -> Vec<f64> {
    let mut x = Vec::with_capacity(sites.len() + 2);
    x.push(knots.start());
    x.extend_from_slice(sites.as_slice());
    x.push(knots.end());
    x
}

fn guess_values(knots: &KnotVector, sites: &DatasiteSet, a: f64, g_a: f64, dg_a: f64) -> Vec<f64> {
    guess_sites(knots, sites)
        .iter()
        .map(|&x| supposed_solution(x, a, g_a, dg_a))
        .collect()
}
