//! Transonic shocks in steady rotating 2-D Euler flow through an almost flat nozzle.
//!
//! The pipeline builds a special normal shock background, linearizes around it in
//! mass-flux coordinates, locates the shock from a solvability condition, and iterates
//! the nonlinear free-boundary problem to a fixed point.

// negated comparisons are deliberate so NaN fails every check; stencils index several arrays at once
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod background;
pub mod cli;
pub mod elliptic;
pub mod error;
pub mod io;
pub mod iteration;
pub mod lagrangian;
pub mod numerics;
pub mod shockfit;
pub mod supersonic;
pub mod thermo;

pub use error::{Error, Result};
