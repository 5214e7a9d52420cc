#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Numerical solvers and property checks for time-dependent Hamilton-Jacobi
//! equations on metric graphs.
//!
//! The crate computes value functions for equations of the form
//! `du/dt + H(x, t, |grad u|) = 0` posed on a finite metric graph, by
//! iterating a dynamic-programming step over intrinsic graph distances.
//! Computed space-time fields can then be certified pointwise through
//! backward difference quotients in the max product metric, and a
//! verification suite covers bound sandwiches, Lipschitz estimates,
//! comparison experiments, curve-based inequalities and grid-convergence
//! studies against closed-form or direct-minimization oracles.
//!
//! Module map:
//!
//! - [`graph`]: metric graphs, on-edge points, meshes, distances, geodesics
//! - [`expr`]: small arithmetic expression language for problem data
//! - [`func`]: scalar functions on the graph (expressions, tables, closures)
//! - [`hamiltonian`]: Hamiltonian forms, Legendre transforms, assumption audit
//! - [`field`]: time grids, space-time fields, slice persistence
//! - [`solver`]: dynamic-programming solvers and direct Hopf-Lax evaluation
//! - [`monge`]: subslope estimators and pointwise residual reports
//! - [`verify`]: executable experiments (bounds, comparison, curves, rates)
//! - [`config`]: JSON problem configuration and route resolution

pub mod config;
pub mod error;
pub mod expr;
pub mod field;
pub mod func;
pub mod graph;
pub mod hamiltonian;
pub mod hash;
pub mod monge;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
