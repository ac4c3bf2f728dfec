//! Robust recovery of a low-rank matrix and a sparse outlier matrix from
//! noisy observations.
//!
//! Given an observation `D = L0 + S0 + Z0` (low-rank plus sparse plus dense
//! noise), the solver estimates `L0` and `S0` by minimizing one of
//!
//! ```text
//! root form:    ||L||_* + lambda ||S||_1 + mu ||L + S - D||_F
//! stable form:  ||L||_* + lambda ||S||_1 + (mu_bar / 2) ||L + S - D||_F^2
//! ```
//!
//! with a two-block ADMM. The unsquared Frobenius penalty of the root form
//! admits noise-independent default parameters (`lambda = 1/sqrt(n1)`,
//! `mu = sqrt(n2/2)`); the stable form's default weight depends on the noise
//! standard deviation.
//!
//! Modules:
//! - [`linalg`]: dense matrices, norms, SVD
//! - [`prox`]: proximal operators of the three penalties
//! - [`solver`]: the ADMM loop, convergence control, KKT diagnostic
//! - [`simulation`]: synthetic ground-truth instances and error metrics
//! - [`experiments`]: parameter sweeps emitting CSV rows
//! - [`io`]: CSV/PGM matrix and frame-stack files

pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod prox;
pub mod simulation;
pub mod solver;

#[cfg(test)]
pub(crate) mod test_util;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use solver::{DecompositionResult, Formulation, SolverConfig};
