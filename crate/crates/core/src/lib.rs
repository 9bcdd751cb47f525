//! Polyhedron-constrained least squares.
//!
//! The centerpiece is [`solver::solve`], a coordinate-descent solver for
//! bounded-variable least squares with KKT-violation screening and an
//! active-set inner loop. [`sparsify`] turns any feasible representation
//! `x = Q w` over a polyhedron into one that binds the guaranteed number of
//! constraints, which certifies that sparse NNLS/BVLS/simplex solutions exist.
//!
//! The crate is `no_std` (with `alloc`); file formats, timing and the command
//! line live in the companion `polyls` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baseline;
pub mod error;
pub mod linalg;
pub mod polyhedron;
pub mod solver;
pub mod sparsify;
pub mod synth;

pub use error::{Error, Result};
pub use linalg::{rank_factor, solve_ls_equality, DenseMatrix, RankFactorization};
pub use polyhedron::{BindingReport, Polyhedron};
pub use solver::{solve, solve_nnls, Bounds, SolveResult, SolveStatus, SolverConfig};
