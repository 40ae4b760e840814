use std::sync::Arc;

use crate::bspline::{eval_basis, BandedLu, BasisTable, KnotVector, Spline};
use crate::error::{invalid, Error, Result};

/// Checks `t_i < tau_i < t_{i+k}` for every site, allowing `tau_0 = t_0` and
/// `tau_{n-1} = t_{n+k-1}`. Returns the first offending (zero-based) index.
pub fn check_schoenberg_whitney(knots: &KnotVector, sites: &[f64]) -> Result<()> {
    let n = knots.dimension();
    let k = knots.order();
    let t = knots.knots();
    if sites.len() != n {
        return Err(invalid(format!(
            "interpolation needs n = {n} sites, got {}",
            sites.len()
        )));
    }
    for (i, &tau) in sites.iter().enumerate() {
        let lower_ok = t[i] < tau || (i == 0 && tau == t[0]);
        let upper_ok = tau < t[i + k] || (i == n - 1 && tau == t[n + k - 1]);
        if !(lower_ok && upper_ok) {
            return Err(Error::SchoenbergWhitney { index: i });
        }
    }
    Ok(())
}

/// Spline in `$_{k,t}` matching `values` at `sites`.
///
/// The collocation matrix `B(tau)` has at most `k` nonzeros per row inside a
/// band of half-width `k - 1`, and is solved by banded LU.
pub fn interpolate(knots: Arc<KnotVector>, sites: &[f64], values: &[f64]) -> Result<Spline> {
    let n = knots.dimension();
    if values.len() != n {
        return Err(invalid(format!(
            "interpolation needs n = {n} values, got {}",
            values.len()
        )));
    }
    if let Some(i) = sites.windows(2).position(|w| w[0] >= w[1]) {
        return Err(invalid(format!(
            "interpolation sites must be strictly increasing (index {})",
            i + 1
        )));
    }
    check_schoenberg_whitney(&knots, sites)?;

    let tables = sites
        .iter()
        .map(|&tau| eval_basis(&knots, tau, 1))
        .collect::<Result<Vec<_>>>()?;
    solve_from_tables(knots, tables.iter().map(BasisTable::view), values)
}

/// Solves `B(tau) alpha = values` given the basis table of each site in
/// order; the caller has already checked the sites.
pub(crate) fn solve_from_tables<'a>(
    knots: Arc<KnotVector>,
    tables: impl Iterator<Item = BasisTable<&'a [f64]>>,
    values: &[f64],
) -> Result<Spline> {
    let n = knots.dimension();
    let band = knots.order() - 1;
    let mut lu = BandedLu::zeros(n, band, band);
    let mut rows = 0;
    for (row, table) in tables.enumerate() {
        if row >= n {
            return Err(invalid(format!("interpolation needs n = {n} sites and values")));
        }
        let first = table.first_index();
        // site `row` must lie in the support of B_row
        if first > row || first + band < row {
            return Err(Error::SchoenbergWhitney { index: row });
        }
        lu.set_row(row, first, table.derivative(0));
        rows += 1;
    }
    if rows != n || values.len() != n {
        return Err(invalid(format!("interpolation needs n = {n} sites and values")));
    }
    lu.factor()?;
    let coeffs = lu.solve(values);
    Spline::new(knots, coeffs)
}
