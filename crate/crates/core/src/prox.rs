//! Proximal operators used by the ADMM splitting.
//!
//! Each function evaluates `prox_{gamma f}(z) = argmin_x gamma f(x) + 0.5 ||x - z||_F^2`
//! for one of the three penalties in the objective:
//!
//! ```text
//! nuclear norm:   soft-threshold the singular values, keep singular vectors
//! l1 norm:        entrywise  max(|z_ij| - gamma, 0) * sign(z_ij)
//! Frobenius norm: block shrinkage  max(||z||_F - gamma, 0) * z / ||z||_F
//! ```
//!
//! `stable_z_update` is the closed-form minimizer of the squared-penalty
//! variant, `argmin_z (mu_bar/2) ||z||_F^2 + (rho/2) ||z - a||_F^2`.

use crate::error::Result;
use crate::linalg::{frobenius_norm, svd, DenseMatrix};

/// Singular value thresholding: the proximal operator of `gamma * ||.||_*`.
///
/// Computes a full SVD; no rank guessing.
pub fn prox_nuclear(z: &DenseMatrix, gamma: f64) -> Result<DenseMatrix> {
    assert!(gamma >= 0.0, "gamma must be nonnegative");
    let mut factors = svd(z)?;
    for s in &mut factors.singular_values {
        *s = (*s - gamma).max(0.0);
    }
    Ok(factors.reconstruct())
}

/// Entrywise soft thresholding: the proximal operator of `gamma * ||.||_1`.
///
/// Ties at `|z_ij| = gamma` map to exactly 0.
pub fn prox_l1(z: &DenseMatrix, gamma: f64) -> DenseMatrix {
    assert!(gamma >= 0.0, "gamma must be nonnegative");
    z.map(|x| (x.abs() - gamma).max(0.0) * x.signum())
}

/// Block shrinkage toward zero: the proximal operator of `gamma * ||.||_F`.
///
/// Returns exactly the zero matrix when `||z||_F <= gamma` (including the
/// `||z||_F = 0` case), so downstream residuals can hit exact zero in
/// noiseless runs.
pub fn prox_frobenius(z: &DenseMatrix, gamma: f64) -> DenseMatrix {
    assert!(gamma >= 0.0, "gamma must be nonnegative");
    let norm = frobenius_norm(z);
    if norm <= gamma {
        return DenseMatrix::zeros(z.rows(), z.cols());
    }
    z.scale(1.0 - gamma / norm)
}

/// Scales the precomputed residual target by `1 / (1 + mu_bar / rho)`:
/// the quadratic-penalty replacement for the Frobenius prox.
pub fn stable_z_update(residual_target: &DenseMatrix, mu_bar: f64, rho: f64) -> DenseMatrix {
    assert!(mu_bar > 0.0, "mu_bar must be positive");
    assert!(rho > 0.0, "rho must be positive");
    residual_target.scale(1.0 / (1.0 + mu_bar / rho))
}
