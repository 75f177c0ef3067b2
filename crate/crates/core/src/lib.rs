//! Outlier-aware representative selection from data on nonlinear manifolds.
//!
//! The pipeline builds a PSD similarity matrix, solves a row-sparse
//! quadratic program over it with ADMM (optionally on a refined random
//! column sketch), and turns the nonzero rows of the solution into a ranked,
//! diverse, outlier-free set of representatives. The sparsity pattern of each
//! row doubles as an outlier score.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod io;
pub mod kernel;
mod par;
pub mod selection;
pub mod sketch;
pub mod solver;
pub mod synthdata;

pub use error::{Error, ErrorClass, Result};
pub use kernel::{build_gram, DataMatrix, KernelKind, KernelMatrix, KernelSpec};
pub use selection::{select, SelectionConfig, SelectionResult};
pub use sketch::{solve_sketched, SketchConfig, SketchState};
pub use solver::{lambda_critical, solve, RepresentationMatrix, SolveDiagnostics, SolverConfig};
