//! Piecewise-polynomial (B-spline) collocation for second-order nonlinear
//! initial value problems.
//!
//! The crate is organised bottom-up:
//!
//! - [`bspline`]: knot sequences, B-spline evaluation, splines and
//!   Schoenberg–Whitney interpolation.
//! - [`abd`]: the almost-block-diagonal collocation matrix and its
//!   left-to-right block elimination.
//! - [`collocation`]: problem definition, Gauss–Legendre datasites, system
//!   assembly and the Newton (quasilinearization) loop.
//! - [`drivers`]: original, expanding-range and segmented solution strategies.
//! - [`analysis`]: the Van der Pol family, residual diagnostics and the
//!   empirical cost and iteration models.
//!
//! ```
//! use collox::analysis::{vdp_problem, VdpParams};
//! use collox::drivers::{solve, Method, SolverConfig};
//!
//! let problem = vdp_problem(&VdpParams::new(0.05)).unwrap();
//! let cfg = SolverConfig::new(5, 20, 0.0, 40.0).with_method(Method::Original);
//! let report = solve(&problem, &cfg).unwrap();
//! assert!(report.converged);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod abd;
pub mod analysis;
pub mod bspline;
pub mod collocation;
pub mod drivers;
mod error;
pub mod flops;

pub use error::{Error, Result};
