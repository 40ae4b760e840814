use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};

/// Right-hand side `F` of `D^2 g = F(x, g, Dg)` with its two partials.
pub trait SecondOrderOde: Send + Sync {
    fn f(&self, x: f64, g: f64, dg: f64) -> f64;
    /// `dF/dg`
    fn df_dg(&self, x: f64, g: f64, dg: f64) -> f64;
    /// `dF/d(Dg)`
    fn df_ddg(&self, x: f64, g: f64, dg: f64) -> f64;

    /// `[F, dF/dg, dF/d(Dg)]` in one call.
    fn partials(&self, x: f64, g: f64, dg: f64) -> [f64; 3] {
        [self.f(x, g, dg), self.df_dg(x, g, dg), self.df_ddg(x, g, dg)]
    }

    fn name(&self) -> String {
        "ode".to_string()
    }
}

/// `beta_1 g(a) + beta_2 Dg(a) = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCondition {
    pub value_coeff: f64,
    pub slope_coeff: f64,
    pub rhs: f64,
}

impl LinearCondition {
    pub fn new(value_coeff: f64, slope_coeff: f64, rhs: f64) -> Self {
        Self {
            value_coeff,
            slope_coeff,
            rhs,
        }
    }

    /// `g(a) = c`
    pub fn value(c: f64) -> Self {
        Self::new(1.0, 0.0, c)
    }

    /// `Dg(a) = c`
    pub fn slope(c: f64) -> Self {
        Self::new(0.0, 1.0, c)
    }
}

/// A second-order ODE together with its two initial conditions, imposed at
/// the left end of whatever range it is solved on.
#[derive(Clone)]
pub struct OdeProblem {
    equation: Arc<dyn SecondOrderOde>,
    conditions: [LinearCondition; 2],
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("equation", &self.equation.name())
            .field("conditions", &self.conditions)
            .finish()
    }
}

impl OdeProblem {
    pub fn new(equation: Arc<dyn SecondOrderOde>, conditions: [LinearCondition; 2]) -> Result<Self> {
        let [c1, c2] = conditions;
        let det = c1.value_coeff * c2.slope_coeff - c1.slope_coeff * c2.value_coeff;
        if det == 0.0 || !det.is_finite() {
            return Err(invalid("initial conditions are linearly dependent"));
        }
        if [c1.rhs, c2.rhs].iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial condition value is not finite"));
        }
        Ok(Self {
            equation,
            conditions,
        })
    }

    /// `g(a) = g0`, `Dg(a) = dg0`.
    pub fn with_initial_state(equation: Arc<dyn SecondOrderOde>, g0: f64, dg0: f64) -> Result<Self> {
        Self::new(
            equation,
            [LinearCondition::value(g0), LinearCondition::slope(dg0)],
        )
    }

    pub fn equation(&self) -> &dyn SecondOrderOde {
        self.equation.as_ref()
    }

    pub fn conditions(&self) -> &[LinearCondition; 2] {
        &self.conditions
    }

    /// `(g(a), Dg(a))` implied by the two conditions.
    pub fn initial_state(&self) -> (f64, f64) {
        let [c1, c2] = self.conditions;
        let det = c1.value_coeff * c2.slope_coeff - c1.slope_coeff * c2.value_coeff;
        let g = (c1.rhs * c2.slope_coeff - c1.slope_coeff * c2.rhs) / det;
        let dg = (c1.value_coeff * c2.rhs - c1.rhs * c2.value_coeff) / det;
        (g, dg)
    }

    /// Same equation, restarted from `g(a) = g0`, `Dg(a) = dg0`.
    pub fn restarted(&self, g0: f64, dg0: f64) -> Result<Self> {
        Self::with_initial_state(self.equation.clone(), g0, dg0)
    }

    /// `D^2 f - F(x, f, Df)`.
    pub fn residual(&self, x: f64, g: f64, dg: f64, d2g: f64) -> f64 {
        d2g - self.equation.f(x, g, dg)
    }
}

/// `D^2 g = -g`, solved by `cos x` from `g(0) = 1`, `Dg(0) = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Harmonic;

impl SecondOrderOde for Harmonic {
    fn f(&self, _x: f64, g: f64, _dg: f64) -> f64 {
        -g
    }

    fn df_dg(&self, _x: f64, _g: f64, _dg: f64) -> f64 {
        -1.0
    }

    fn df_ddg(&self, _x: f64, _g: f64, _dg: f64) -> f64 {
        0.0
    }

    fn name(&self) -> String {
        "harmonic".to_string()
    }
}

/// An equation given by three closures: `F`, `dF/dg` and `dF/d(Dg)`.
pub struct FnOde<F, G, H> {
    pub f: F,
    pub df_dg: G,
    pub df_ddg: H,
}

impl<F, G, H> SecondOrderOde for FnOde<F, G, H>
where
    F: Fn(f64, f64, f64) -> f64 + Send + Sync,
    G: Fn(f64, f64, f64) -> f64 + Send + Sync,
    H: Fn(f64, f64, f64) -> f64 + Send + Sync,
{
    fn f(&self, x: f64, g: f64, dg: f64) -> f64 {
        (self.f)(x, g, dg)
    }

    fn df_dg(&self, x: f64, g: f64, dg: f64) -> f64 {
        (self.df_dg)(x, g, dg)
    }

    fn df_ddg(&self, x: f64, g: f64, dg: f64) -> f64 {
        (self.df_ddg)(x, g, dg)
    }
}
