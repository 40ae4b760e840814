use std::sync::Arc;

use crate::abd::{AbdMatrix, RhsVector};
use crate::bspline::{eval_basis_into, eval_basis_on, BasisTable, KnotVector, Spline};
use crate::collocation::{DatasiteSet, OdeProblem, SecondOrderOde};
use crate::error::{invalid, Result};
use crate::flops::FlopCounter;

/// Largest order accepted by the collocation assembly.
pub const MAX_ORDER: usize = 20;

/// Basis values and first two derivatives at the left end and at every
/// datasite, computed once per knot vector and reused by every Newton step.
#[derive(Debug, Clone)]
pub struct BasisCache {
    knots: Arc<KnotVector>,
    // tables for the left end, each datasite and the right end, in that
    // order, each 3 k entries long
    values: Vec<f64>,
    intervals: Vec<usize>,
}

const CACHED_DERIVS: usize = 3;

impl BasisCache {
    pub fn new(knots: &Arc<KnotVector>, sites: &DatasiteSet) -> Result<Self> {
        check_collocation_knots(knots, sites)?;
        let k = knots.order();
        let stride = CACHED_DERIVS * k;
        let count = sites.len() + 2;
        let mut values = vec![0.0; count * stride];
        let mut intervals = Vec::with_capacity(count);
        let (head, rest) = values.split_at_mut(stride);
        let (body, tail) = rest.split_at_mut(sites.len() * stride);
        intervals.push(eval_basis_into(knots, knots.start(), CACHED_DERIVS, head)?);
        for (j, (&x, out)) in sites.as_slice().iter().zip(body.chunks_exact_mut(stride)).enumerate() {
            // interval i of the mesh is knot interval (k-2) i + k - 1
            let interval = sites.interval_of(j) * (k - 2) + k - 1;
            eval_basis_on(knots, interval, x, CACHED_DERIVS, out).map_err(|_| {
                invalid(format!(
                    "datasite {j} does not lie inside interval {}",
                    sites.interval_of(j) + 1
                ))
            })?;
            intervals.push(interval);
        }
        intervals.push(eval_basis_into(knots, knots.end(), CACHED_DERIVS, tail)?);
        Ok(Self {
            knots: knots.clone(),
            values,
            intervals,
        })
    }

    pub fn knots(&self) -> &Arc<KnotVector> {
        &self.knots
    }

    fn table(&self, i: usize) -> BasisTable<&[f64]> {
        let k = self.knots.order();
        let stride = CACHED_DERIVS * k;
        BasisTable::from_slice(
            self.intervals[i],
            k,
            CACHED_DERIVS,
            &self.values[i * stride..(i + 1) * stride],
        )
    }

    pub fn at_start(&self) -> BasisTable<&[f64]> {
        self.table(0)
    }

    /// Number of datasite tables.
    pub fn site_count(&self) -> usize {
        self.intervals.len() - 2
    }

    pub fn at_site(&self, j: usize) -> BasisTable<&[f64]> {
        assert!(j < self.site_count(), "datasite index {j} out of range");
        self.table(j + 1)
    }

    pub fn at_sites(&self) -> impl ExactSizeIterator<Item = BasisTable<&[f64]>> + '_ {
        (1..self.intervals.len() - 1).map(|i| self.table(i))
    }

    pub fn at_end(&self) -> BasisTable<&[f64]> {
        self.table(self.intervals.len() - 1)
    }

    /// Start, datasite and end tables in increasing `x`.
    pub(crate) fn all_tables(&self) -> impl Iterator<Item = BasisTable<&[f64]>> + '_ {
        (0..self.intervals.len()).map(|i| self.table(i))
    }
}

fn check_collocation_knots(knots: &KnotVector, sites: &DatasiteSet) -> Result<()> {
    let k = knots.order();
    if !(3..=MAX_ORDER).contains(&k) {
        return Err(invalid(format!(
            "collocation order must satisfy 3 <= k <= {MAX_ORDER}, got {k}"
        )));
    }
    if knots.continuity().iter().any(|&nu| nu != 2) {
        return Err(invalid("collocation knots must carry continuity 2 at every break"));
    }
    let l = knots.breaks().intervals();
    if sites.per_interval() != k - 2 || sites.len() != (k - 2) * l {
        return Err(invalid(format!(
            "expected {} datasites per interval over {l} intervals, got {} in total",
            k - 2,
            sites.len()
        )));
    }
    Ok(())
}

/// `p`, `q`, `s` of the linear operator `D^2 f + p Df + q f = s` obtained by
/// linearizing `F` about the current iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedCoefficients {
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

impl LinearizedCoefficients {
    /// `p = -F_{Dg}`, `q = -F_g`, `s = F - F_{Dg} Dg - F_g g`, all at `(x, g, Dg)`.
    pub fn from_equation(eq: &dyn SecondOrderOde, x: f64, g: f64, dg: f64) -> Self {
        let [f, fg, fdg] = eq.partials(x, g, dg);
        Self {
            p: -fdg,
            q: -fg,
            s: f - fdg * dg - fg * g,
        }
    }
}

/// Builds the collocation system for one Newton step about `iterate`.
pub fn assemble_system(
    problem: &OdeProblem,
    sites: &DatasiteSet,
    iterate: &Spline,
    cache: &BasisCache,
) -> Result<(AbdMatrix, RhsVector)> {
    let knots = cache.knots();
    let mut a = AbdMatrix::zeros(knots.order(), knots.breaks().intervals())?;
    let mut rhs = RhsVector::zeros(a.n());
    let mut counter = FlopCounter::new();
    assemble_into(problem, sites, iterate, cache, &mut a, &mut rhs, &mut counter)?;
    if !a.is_finite() || !rhs.is_finite() {
        return Err(invalid("collocation system has non-finite entries at this iterate"));
    }
    Ok((a, rhs))
}

/// Overwrites every stored entry of `a` and `rhs`; entries may come out
/// non-finite if the iterate is extreme.
pub(crate) fn assemble_into(
    problem: &OdeProblem,
    sites: &DatasiteSet,
    iterate: &Spline,
    cache: &BasisCache,
    a: &mut AbdMatrix,
    rhs: &mut RhsVector,
    counter: &mut FlopCounter,
) -> Result<()> {
    let knots = cache.knots();
    if iterate.knots() != knots.as_ref() {
        return Err(invalid("iterate is defined on a different knot vector"));
    }
    if sites.len() != cache.site_count() {
        return Err(invalid("datasites do not match the basis cache"));
    }
    let k = knots.order();
    let l = knots.breaks().intervals();
    if a.k() != k || a.l() != l || rhs.len() != a.n() {
        return Err(invalid("system storage does not match the knot vector"));
    }
    let rhs = rhs.as_mut_slice();

    let start = cache.at_start();
    for (r, cond) in problem.conditions().iter().enumerate() {
        let row = a.ic_row_mut(r);
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = cond.value_coeff * start.get(c, 0) + cond.slope_coeff * start.get(c, 1);
        }
        rhs[r] = cond.rhs;
    }
    counter.add(6 * k as u64);

    let eq = problem.equation();
    let coeffs = iterate.coeffs();
    let rows = a.block_rows_mut().zip(rhs[2..].iter_mut());
    for ((table, &x), (row, s)) in cache.at_sites().zip(sites.as_slice()).zip(rows) {
        let (b0, b1, b2) = (table.derivative(0), table.derivative(1), table.derivative(2));
        let local = &coeffs[table.first_index()..table.first_index() + k];
        let (g, dg) = local
            .iter()
            .zip(b0.iter().zip(b1))
            .fold((0.0, 0.0), |(g, dg), (c, (v, d))| (g + c * v, dg + c * d));
        let lin = LinearizedCoefficients::from_equation(eq, x, g, dg);
        for (entry, ((v, d), d2)) in row.iter_mut().zip(b0.iter().zip(b1).zip(b2)) {
            *entry = d2 + lin.p * d + lin.q * v;
        }
        *s = lin.s;
        counter.add(8 * k as u64 + 8);
    }
    Ok(())
}
