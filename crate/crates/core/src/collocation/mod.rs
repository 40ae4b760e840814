//! Collocation of `D^2 g = F(x, g, Dg)` with two linear initial conditions.
//!
//! Each interval carries `k - 2` datasites at the mapped Gauss–Legendre
//! points; the nonlinear problem is solved by Newton quasilinearization,
//! assembling and solving one almost-block-diagonal system per iteration.

mod assembly;
mod datasites;
mod guess;
mod newton;
mod pattern;
mod problem;

pub use assembly::{assemble_system, BasisCache, LinearizedCoefficients, MAX_ORDER};
pub use datasites::{build_datasites, DatasiteSet};
pub use guess::{initial_guess, supposed_solution};
pub use newton::{
    newton_iterate, newton_solve, NewtonOptions, NewtonRun, NewtonState, RightEndHistory,
    DIVERGENCE_BOUND,
};
pub use pattern::{legendre_pattern, CollocationPattern};
pub use problem::{FnOde, Harmonic, LinearCondition, OdeProblem, SecondOrderOde};

pub(crate) use assembly::assemble_into;
pub(crate) use guess::initial_guess_cached;
