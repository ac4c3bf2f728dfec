//! Synthetic ground-truth instances `D = L0 + S0 + Z0` and recovery metrics.
//!
//! Generation is fully determined by a 64-bit seed: the stream comes from
//! ChaCha8 and every sampler is spelled out here (Box-Muller for normals,
//! Knuth multiplication for Poisson, an affine map for uniforms), so
//! identical specs reproduce instances bit-exactly across platforms.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, DenseMatrix};

/// Dense-noise distribution. Each kind is scaled so an entry's second moment
/// is `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Entrywise iid normal with standard deviation `sigma`.
    Gaussian,
    /// `l * Poisson(lambda_p)` with `l = sigma / sqrt(lambda_p + lambda_p^2)`.
    /// Unshifted, so entries are nonnegative and the mean is nonzero.
    Poisson { lambda_p: f64 },
    /// Entrywise iid uniform on `(-sqrt(3) sigma, sqrt(3) sigma)`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Target entrywise standard deviation (second moment root for Poisson).
    pub sigma: f64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma,
        }
    }

    pub fn poisson(sigma: f64, lambda_p: f64) -> Self {
        Self {
            kind: NoiseKind::Poisson { lambda_p },
            sigma,
        }
    }

    pub fn uniform(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::Uniform,
            sigma,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::invalid(format!(
                "sigma must be finite and nonnegative, got {}",
                self.sigma
            )));
        }
        if let NoiseKind::Poisson { lambda_p } = self.kind {
            if lambda_p <= 0.0 || !lambda_p.is_finite() {
                return Err(Error::invalid(format!(
                    "poisson lambda_p must be positive, got {lambda_p}"
                )));
            }
        }
        Ok(())
    }

    /// Short identifier used in CSV rows, independent of `sigma`.
    pub fn label(&self) -> String {
        match self.kind {
            NoiseKind::Gaussian => "gaussian".to_string(),
            NoiseKind::Poisson { lambda_p } => format!("poisson_lp={lambda_p}"),
            NoiseKind::Uniform => "uniform".to_string(),
        }
    }
}

/// Parameters of one synthetic instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSpec {
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    /// Per-entry support probability of the sparse component.
    pub rho_s: f64,
    /// Magnitude of sparse entries (`+-s_magnitude` with equal probability).
    pub s_magnitude: f64,
    pub noise: NoiseModel,
    pub seed: u64,
}

/// Default sparse-entry magnitude.
pub const DEFAULT_S_MAGNITUDE: f64 = 0.05;

impl SimSpec {
    pub fn new(
        n1: usize,
        n2: usize,
        rank: usize,
        rho_s: f64,
        noise: NoiseModel,
        seed: u64,
    ) -> Self {
        Self {
            n1,
            n2,
            rank,
            rho_s,
            s_magnitude: DEFAULT_S_MAGNITUDE,
            noise,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::invalid("dimensions must be positive"));
        }
        if self.rank == 0 || self.rank > self.n1.min(self.n2) {
            return Err(Error::invalid(format!(
                "rank must be in [1, min(n1, n2)] = [1, {}], got {}",
                self.n1.min(self.n2),
                self.rank
            )));
        }
        if !(0.0..=1.0).contains(&self.rho_s) {
            return Err(Error::invalid(format!(
                "rho_s must be in [0, 1], got {}",
                self.rho_s
            )));
        }
        if self.s_magnitude <= 0.0 || !self.s_magnitude.is_finite() {
            return Err(Error::invalid("s_magnitude must be positive"));
        }
        self.noise.validate()
    }
}

/// One generated instance with its ground truth. `d` equals
/// `(l0 + s0) + z0` entrywise, in that summation order.
#[derive(Debug, Clone)]
pub struct SimInstance {
    pub l0: DenseMatrix,
    pub s0: DenseMatrix,
    pub z0: DenseMatrix,
    pub d: DenseMatrix,
    pub spec: SimSpec,
}

/// Uniform in [0, 1) with 53 random bits.
fn uniform_01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in (0, 1]; safe as a logarithm argument.
fn uniform_open_01(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Fills `out` with iid N(0, sd^2) entries by the Box-Muller transform,
/// consuming two uniforms per pair of entries (the spare of an odd tail is
/// discarded).
fn fill_gaussian(rng: &mut ChaCha8Rng, out: &mut [f64], sd: f64) {
    let mut i = 0;
    while i < out.len() {
        let u1 = uniform_open_01(rng);
        let u2 = uniform_01(rng);
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        out[i] = sd * radius * angle.cos();
        if i + 1 < out.len() {
            out[i + 1] = sd * radius * angle.sin();
        }
        i += 2;
    }
}

/// Knuth's multiplication method; exact for the moderate rates used here.
fn poisson_draw(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    let threshold = (-lambda).exp();
    let mut count = 0;
    let mut product = 1.0;
    loop {
        product *= uniform_01(rng);
        if product <= threshold {
            return count;
        }
        count += 1;
    }
}

/// Draws `L0 = U V^T` (factor entries iid `N(0, 1/n1)` and `N(0, 1/n2)`),
/// a Bernoulli-support sign matrix `S0`, noise `Z0` per the spec's model,
/// and their sum `D`.
///
/// Draw order is fixed: `U` then `V` (column-major), then per entry of `S0`
/// in column-major order a support uniform followed, on support, by a sign
/// uniform, then `Z0` column-major. `sigma = 0` yields an exactly zero `Z0`
/// for every noise kind without consuming random draws.
pub fn generate_instance(spec: &SimSpec) -> Result<SimInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n1, n2, r) = (spec.n1, spec.n2, spec.rank);

    let mut u = vec![0.0; n1 * r];
    fill_gaussian(&mut rng, &mut u, 1.0 / (n1 as f64).sqrt());
    let mut v = vec![0.0; n2 * r];
    fill_gaussian(&mut rng, &mut v, 1.0 / (n2 as f64).sqrt());
    let u = DenseMatrix::from_col_major(n1, r, u)?;
    let v = DenseMatrix::from_col_major(n2, r, v)?;
    let l0 = u.matmul(&v.transpose());

    let mut s = vec![0.0; n1 * n2];
    for entry in s.iter_mut() {
        if uniform_01(&mut rng) < spec.rho_s {
            *entry = if uniform_01(&mut rng) < 0.5 {
                spec.s_magnitude
            } else {
                -spec.s_magnitude
            };
        }
    }
    let s0 = DenseMatrix::from_col_major(n1, n2, s)?;

    let sigma = spec.noise.sigma;
    let z0 = if sigma == 0.0 {
        DenseMatrix::zeros(n1, n2)
    } else {
        match spec.noise.kind {
            NoiseKind::Gaussian => {
                let mut z = vec![0.0; n1 * n2];
                fill_gaussian(&mut rng, &mut z, sigma);
                DenseMatrix::from_col_major(n1, n2, z)?
            }
            NoiseKind::Poisson { lambda_p } => {
                let scale = sigma / (lambda_p + lambda_p * lambda_p).sqrt();
                let mut z = vec![0.0; n1 * n2];
                for entry in z.iter_mut() {
                    *entry = scale * poisson_draw(&mut rng, lambda_p) as f64;
                }
                DenseMatrix::from_col_major(n1, n2, z)?
            }
            NoiseKind::Uniform => {
                let half_width = 3.0_f64.sqrt() * sigma;
                let mut z = vec![0.0; n1 * n2];
                for entry in z.iter_mut() {
                    *entry = (2.0 * uniform_01(&mut rng) - 1.0) * half_width;
                }
                DenseMatrix::from_col_major(n1, n2, z)?
            }
        }
    };

    let d = l0.add(&s0).add(&z0);
    Ok(SimInstance {
        l0,
        s0,
        z0,
        d,
        spec: *spec,
    })
}

/// Root-mean-squared recovery error over repeated estimates of one truth:
/// `sqrt(mean_k ||estimate_k - truth||_F^2)`.
pub fn rms_error(estimates: &[DenseMatrix], truth: &DenseMatrix) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::invalid("rms_error needs at least one estimate"));
    }
    let mut sum = 0.0;
    for (k, estimate) in estimates.iter().enumerate() {
        if estimate.shape() != truth.shape() {
            return Err(Error::invalid(format!(
                "estimate {k} has shape {:?}, truth has {:?}",
                estimate.shape(),
                truth.shape()
            )));
        }
        sum += frobenius_norm(&estimate.sub(truth)).powi(2);
    }
    Ok((sum / estimates.len() as f64).sqrt())
}

/// `||estimate - truth||_F / ||truth||_F`; errors on a zero truth.
pub fn relative_error(estimate: &DenseMatrix, truth: &DenseMatrix) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::invalid("relative_error shape mismatch"));
    }
    let denom = frobenius_norm(truth);
    if denom == 0.0 {
        return Err(Error::invalid(
            "relative_error is undefined for a zero truth",
        ));
    }
    Ok(frobenius_norm(&estimate.sub(truth)) / denom)
}
