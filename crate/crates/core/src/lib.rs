//! Sparse signal recovery by minimizing the ratio of the l1 and l2 norms.
//!
//! The crate implements the penalized model
//! `min (lambda ||x||_1 + env(Ax)) / ||x||_2` over the ball `||x||_2 <= d`,
//! where `env` smooths the noise constraint `||Ax - b||_2 <= eps`, together
//! with the parameterized proximal-gradient solvers (fixed step and
//! monotone/nonmonotone line search), their closed-form proximity operator,
//! and an experiment harness for synthetic recovery studies.

pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod prox;
pub mod rng;
pub mod solvers;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, Vector};
pub use model::{PenaltyObjective, ProblemInstance};
pub use solvers::{SolverConfig, SolverResult, Termination};
