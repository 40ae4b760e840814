//! B-spline machinery: break and knot sequences, basis evaluation with
//! derivatives, spline evaluation and spline interpolation.
//!
//! Indices are zero-based throughout: the basis functions are `B_0 .. B_{n-1}`
//! and the knots `t_0 .. t_{n+k-1}`, so the basic interval is
//! `[t_{k-1}, t_n]`.

mod banded;
mod basis;
mod breaks;
mod interpolate;
mod knots;
mod spline;

pub use banded::BandedLu;
pub use basis::{eval_basis, eval_basis_into, BasisTable};
pub(crate) use basis::eval_basis_on;
pub use breaks::BreakSequence;
pub use interpolate::{check_schoenberg_whitney, interpolate};
pub(crate) use interpolate::solve_from_tables;
pub use knots::KnotVector;
pub use spline::Spline;
