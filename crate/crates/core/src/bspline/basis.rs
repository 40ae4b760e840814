use crate::bspline::KnotVector;
use crate::error::{invalid, Result};

/// Values and derivatives of the `k` B-splines supported on one knot interval.
///
/// Entry `(r, d)` is `D^d B_{first + r, k}(x)` where `first = interval - k + 1`.
/// `BasisTable<&[f64]>` borrows its entries from a larger buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisTable<S = Vec<f64>> {
    interval: usize,
    order: usize,
    nderiv: usize,
    // row-major by derivative: values[d * order + r]
    values: S,
}

impl<'a> BasisTable<&'a [f64]> {
    /// Borrows `nderiv * order` entries laid out as written by [`eval_basis_into`].
    pub fn from_slice(interval: usize, order: usize, nderiv: usize, values: &'a [f64]) -> Self {
        assert_eq!(values.len(), nderiv * order, "basis table slice has the wrong length");
        Self {
            interval,
            order,
            nderiv,
            values,
        }
    }
}

impl BasisTable {
    pub fn view(&self) -> BasisTable<&[f64]> {
        BasisTable::from_slice(self.interval, self.order, self.nderiv, &self.values)
    }
}

impl<S: AsRef<[f64]>> BasisTable<S> {
    /// Knot index `j` with `t_j <= x < t_{j+1}`.
    pub fn interval(&self) -> usize {
        self.interval
    }

    /// Index of the first supported B-spline, `j - k + 1`.
    pub fn first_index(&self) -> usize {
        self.interval + 1 - self.order
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of derivative columns (value column included).
    pub fn nderiv(&self) -> usize {
        self.nderiv
    }

    #[inline]
    pub fn get(&self, r: usize, d: usize) -> f64 {
        self.values.as_ref()[d * self.order + r]
    }

    /// The `k` values of `D^d B` on this interval.
    #[inline]
    pub fn derivative(&self, d: usize) -> &[f64] {
        &self.values.as_ref()[d * self.order..(d + 1) * self.order]
    }
}

/// Evaluates the B-splines of order `k` supported at `x`, together with their
/// derivatives up to order `nderiv - 1`.
///
/// Values come from the triangular Cox–de Boor recurrence; derivatives apply
/// the derivative relation `D B_{i,m} = (m-1) (B_{i,m-1}/(t_{i+m-1}-t_i) -
/// B_{i+1,m-1}/(t_{i+m}-t_{i+1}))` repeatedly, starting from the order
/// `k - d` values.
pub fn eval_basis(knots: &KnotVector, x: f64, nderiv: usize) -> Result<BasisTable> {
    let k = knots.order();
    let mut values = vec![0.0; nderiv * k];
    let interval = eval_basis_into(knots, x, nderiv, &mut values)?;
    Ok(BasisTable {
        interval,
        order: k,
        nderiv,
        values,
    })
}

const STACK_ORDER: usize = 20;

/// [`eval_basis`] writing the `nderiv * k` entries into `out` (length must
/// match); returns the interval index.
pub fn eval_basis_into(knots: &KnotVector, x: f64, nderiv: usize, out: &mut [f64]) -> Result<usize> {
    check_output(knots.order(), nderiv, out)?;
    let j = knots.find_interval(x)?;
    fill(knots, j, x, nderiv, out);
    Ok(j)
}

/// [`eval_basis_into`] for an `x` already known to lie in the nontrivial
/// knot interval `[t_j, t_{j+1}]`, skipping the interval search.
pub(crate) fn eval_basis_on(knots: &KnotVector, j: usize, x: f64, nderiv: usize, out: &mut [f64]) -> Result<()> {
    check_output(knots.order(), nderiv, out)?;
    let t = knots.knots();
    let inside = j + 1 >= knots.order() && j < knots.dimension() && t[j] < t[j + 1];
    if !(inside && t[j] <= x && x <= t[j + 1]) {
        return Err(invalid(format!("{x} does not lie in knot interval {j}")));
    }
    fill(knots, j, x, nderiv, out);
    Ok(())
}

fn check_output(k: usize, nderiv: usize, out: &[f64]) -> Result<()> {
    if nderiv == 0 || nderiv > k {
        return Err(invalid(format!(
            "nderiv must lie in 1..={k} for order {k}, got {nderiv}"
        )));
    }
    if out.len() != nderiv * k {
        return Err(invalid(format!(
            "basis output needs {} entries, got {}",
            nderiv * k,
            out.len()
        )));
    }
    Ok(())
}

fn fill(knots: &KnotVector, j: usize, x: f64, nderiv: usize, out: &mut [f64]) {
    let k = knots.order();
    if k <= STACK_ORDER {
        let mut scratch = [0.0; 3 * STACK_ORDER];
        fill_table(knots.knots(), j, x, k, nderiv, out, &mut scratch[..3 * k]);
    } else {
        fill_table(knots.knots(), j, x, k, nderiv, out, &mut vec![0.0; 3 * k]);
    }
}

fn fill_table(t: &[f64], j: usize, x: f64, k: usize, nderiv: usize, out: &mut [f64], scratch: &mut [f64]) {
    let (dl, rest) = scratch.split_at_mut(k);
    let (dr, fac) = rest.split_at_mut(k);
    let (b, derivs) = out.split_at_mut(k);
    // Row 0 of `out` carries the order-m values, updated in place for
    // m = 1..=k. Row d starts as a copy of the order k-d values and is
    // differentiated once per later order, ending as D^d of the order-k
    // functions.
    b[0] = 1.0;
    if nderiv == k {
        derivs[(k - 2) * k] = 1.0;
    }
    for s in 0..k - 1 {
        let m = s + 2;
        // B_{i,m} = (x - t_i)/(t_{i+m-1} - t_i) B_{i,m-1}
        //         + (t_{i+m} - x)/(t_{i+m} - t_{i+1}) B_{i+1,m-1},
        // written with dl[s] = x - t_{j-s}, dr[s] = t_{j+s+1} - x. On the
        // nontrivial interval [t_j, t_{j+1}) every denominator dr + dl is
        // positive, and the weight dr / den is exactly 1 or 0 at the interval
        // ends, so 1 - weight is too and B_{i,k}(a), B_{i,k}(b) stay exact.
        dr[s] = t[j + s + 1] - x;
        dl[s] = x - t[j - s];
        let mut saved = 0.0;
        for ((bi, &r), &l) in b[..=s].iter_mut().zip(&dr[..=s]).zip(dl[..=s].iter().rev()) {
            let weight = r / (r + l);
            let p = *bi;
            *bi = saved + p * weight;
            saved = p * (1.0 - weight);
        }
        b[s + 1] = saved;

        // rows d > k - m already hold order m-1 derivative data
        let oldest = (k + 1 - m).max(1);
        if oldest < nderiv {
            // fac[r] = (m-1) / (t_{i+m-1} - t_i) with i = j+1-m+r, zero for
            // coincident knots; both terms of the relation draw on it
            let scale = (m - 1) as f64;
            let lo = j + 2 - m;
            let spans = t[lo..lo + m - 1].iter().zip(&t[lo + m - 1..lo + 2 * m - 2]);
            for (f, (&left, &right)) in fac[1..m].iter_mut().zip(spans) {
                let den = right - left;
                *f = if den != 0.0 { scale / den } else { 0.0 };
            }
            for d in oldest..nderiv {
                // D B_{r,m} = fac[r] B_{r,m-1} - fac[r+1] B_{r+1,m-1} in local indices
                let row = &mut derivs[(d - 1) * k..(d - 1) * k + m];
                let mut carried = 0.0;
                for (v, &f) in row[..m - 1].iter_mut().zip(&fac[1..m]) {
                    let term = f * *v;
                    *v = carried - term;
                    carried = term;
                }
                row[m - 1] = carried;
            }
        }
        // row d = k - m starts from the order-m values just computed
        if m < k && k - m < nderiv {
            let d = k - m;
            derivs[(d - 1) * k..(d - 1) * k + m].copy_from_slice(&b[..m]);
        }
    }
}
