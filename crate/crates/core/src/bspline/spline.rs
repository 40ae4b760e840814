use std::sync::Arc;

use crate::bspline::{eval_basis, BasisTable, KnotVector};
use crate::error::{invalid, Result};

/// A spline `sum_i alpha_i B_{i,k,t}` in B-form.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    knots: Arc<KnotVector>,
    coeffs: Vec<f64>,
}

impl Spline {
    pub fn new(knots: Arc<KnotVector>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != knots.dimension() {
            return Err(invalid(format!(
                "spline needs {} coefficients, got {}",
                knots.dimension(),
                coeffs.len()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(invalid(format!("spline coefficient {i} is not finite")));
        }
        Ok(Self { knots, coeffs })
    }

    pub fn zero(knots: Arc<KnotVector>) -> Self {
        let n = knots.dimension();
        Self {
            knots,
            coeffs: vec![0.0; n],
        }
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn shared_knots(&self) -> &Arc<KnotVector> {
        &self.knots
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn start(&self) -> f64 {
        self.knots.start()
    }

    pub fn end(&self) -> f64 {
        self.knots.end()
    }

    /// `D^deriv f(x)`. Derivatives of order `>= k` vanish identically.
    pub fn eval(&self, x: f64, deriv: usize) -> Result<f64> {
        let k = self.knots.order();
        if deriv >= k {
            self.knots.find_interval(x)?;
            return Ok(0.0);
        }
        let table = eval_basis(&self.knots, x, deriv + 1)?;
        Ok(self.eval_with_table(&table, deriv))
    }

    /// `[f(x), Df(x), ..., D^{nderiv-1} f(x)]` from a single basis evaluation.
    pub fn eval_derivs(&self, x: f64, nderiv: usize) -> Result<Vec<f64>> {
        let k = self.knots.order();
        let table = eval_basis(&self.knots, x, nderiv.min(k))?;
        let mut out: Vec<f64> = (0..table.nderiv())
            .map(|d| self.eval_with_table(&table, d))
            .collect();
        out.resize(nderiv, 0.0);
        Ok(out)
    }

    /// Combines a precomputed basis table with the local coefficients.
    #[inline]
    pub fn eval_with_table<S: AsRef<[f64]>>(&self, table: &BasisTable<S>, deriv: usize) -> f64 {
        let first = table.first_index();
        table
            .derivative(deriv)
            .iter()
            .zip(&self.coeffs[first..first + table.order()])
            .map(|(b, a)| b * a)
            .sum()
    }
}
