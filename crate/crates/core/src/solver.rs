//! Two-block ADMM for the root and stable formulations.
//!
//! The objective is split over `X1 = (L1, S1, Z)` and `X2 = (L2, S2)` with
//! three coupling constraints `L1 = L2`, `S1 = S2`, `L2 + S2 + Z = D`, so
//! each block update is a closed-form proximal step. Convergence is declared
//! when both the primal residual (constraint violation) and the dual residual
//! (successive-iterate change) drop below thresholds built from absolute and
//! relative tolerances, and the penalty parameter `rho` is doubled or halved
//! whenever the two residuals drift more than a factor of ten apart.

use crate::error::{Error, Result};
use crate::linalg::{
    dot, frobenius_norm, l1_norm, max_abs_entry, nuclear_norm, spectral_norm, stacked_frobenius,
    DenseMatrix,
};
use crate::prox::{prox_frobenius, prox_l1, prox_nuclear, stable_z_update};

/// Which penalty the Z-block minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Unsquared Frobenius penalty `mu ||L + S - D||_F`; its default `mu`
    /// does not depend on the noise level.
    RootPcp,
    /// Squared penalty `(mu_bar / 2) ||L + S - D||_F^2`; its default weight
    /// is noise-dependent.
    StablePcpUnconstrained,
}

impl Formulation {
    pub fn label(self) -> &'static str {
        match self {
            Formulation::RootPcp => "root",
            Formulation::StablePcpUnconstrained => "stable",
        }
    }
}

/// Sparsity weight `lambda = 1 / sqrt(n1)`.
pub fn default_lambda(n1: usize) -> f64 {
    assert!(n1 >= 1);
    1.0 / (n1 as f64).sqrt()
}

/// Noise-term weight for the root formulation, `mu = sqrt(n2 / 2)`.
pub fn default_mu_root(n2: usize) -> f64 {
    assert!(n2 >= 1);
    (n2 as f64 / 2.0).sqrt()
}

/// Noise-term weight for the stable formulation,
/// `mu_bar = 1 / (sigma (sqrt(n1) + sqrt(n2)))`.
///
/// Requires `sigma > 0`: the noiseless limit has no finite default, so the
/// caller must either use the root formulation or supply `mu_bar` directly.
pub fn default_mu_stable(sigma: f64, n1: usize, n2: usize) -> Result<f64> {
    assert!(n1 >= 1 && n2 >= 1);
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::invalid(
            "stable default mu requires sigma > 0; use the root formulation or pass mu explicitly",
        ));
    }
    Ok(1.0 / (sigma * ((n1 as f64).sqrt() + (n2 as f64).sqrt())))
}

/// Solver parameters. `mu` is the Frobenius-term weight of the selected
/// formulation (the squared-penalty weight when `formulation` is stable).
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub lambda: f64,
    pub mu: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iters: usize,
    pub rho_init: f64,
    pub formulation: Formulation,
}

impl SolverConfig {
    pub const DEFAULT_EPS_ABS: f64 = 1e-6;
    pub const DEFAULT_EPS_REL: f64 = 1e-6;
    pub const DEFAULT_MAX_ITERS: usize = 5000;
    pub const DEFAULT_RHO_INIT: f64 = 0.1;

    pub fn new(formulation: Formulation, lambda: f64, mu: f64) -> Self {
        Self {
            lambda,
            mu,
            eps_abs: Self::DEFAULT_EPS_ABS,
            eps_rel: Self::DEFAULT_EPS_REL,
            max_iters: Self::DEFAULT_MAX_ITERS,
            rho_init: Self::DEFAULT_RHO_INIT,
            formulation,
        }
    }

    /// Root formulation with the tuning-free defaults for an `n1 x n2`
    /// observation.
    pub fn root_defaults(n1: usize, n2: usize) -> Self {
        Self::new(
            Formulation::RootPcp,
            default_lambda(n1),
            default_mu_root(n2),
        )
    }

    /// Stable formulation with the noise-dependent default weight.
    pub fn stable_defaults(n1: usize, n2: usize, sigma: f64) -> Result<Self> {
        Ok(Self::new(
            Formulation::StablePcpUnconstrained,
            default_lambda(n1),
            default_mu_stable(sigma, n1, n2)?,
        ))
    }

    pub fn with_tolerances(mut self, eps_abs: f64, eps_rel: f64) -> Self {
        self.eps_abs = eps_abs;
        self.eps_rel = eps_rel;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_rho_init(mut self, rho_init: f64) -> Self {
        self.rho_init = rho_init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("eps_abs", self.eps_abs),
            ("eps_rel", self.eps_rel),
            ("rho_init", self.rho_init),
        ];
        for (name, value) in positive {
            if value <= 0.0 || !value.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// The full ADMM iterate: both primal blocks, the three dual variables, the
/// current penalty parameter and the iteration counter.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub l1: DenseMatrix,
    pub l2: DenseMatrix,
    pub s1: DenseMatrix,
    pub s2: DenseMatrix,
    pub z: DenseMatrix,
    pub y1: DenseMatrix,
    pub y2: DenseMatrix,
    pub y3: DenseMatrix,
    pub rho: f64,
    pub iter: usize,
}

impl SolverState {
    /// All-zero initial iterate matching the observation's shape.
    pub fn zeros(rows: usize, cols: usize, rho: f64) -> Self {
        let z = || DenseMatrix::zeros(rows, cols);
        Self {
            l1: z(),
            l2: z(),
            s1: z(),
            s2: z(),
            z: z(),
            y1: z(),
            y2: z(),
            y3: z(),
            rho,
            iter: 0,
        }
    }
}

/// Residuals, thresholds, the next penalty parameter and the convergence
/// verdict for one iteration.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceReport {
    pub r_primal: f64,
    pub r_dual: f64,
    pub theta_primal: f64,
    pub theta_dual: f64,
    pub rho_next: f64,
    pub converged: bool,
}

/// One `(r_primal, r_dual, rho)` record per iteration; `rho` is the penalty
/// parameter in effect during that iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRecord {
    pub r_primal: f64,
    pub r_dual: f64,
    pub rho: f64,
}

/// Outcome of a solve: the averaged estimates, the convergence flag, the
/// iteration count and the residual trace.
#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub l: DenseMatrix,
    pub s: DenseMatrix,
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<ResidualRecord>,
}

/// One ADMM iteration. Update order matters:
///
/// - the `L1`/`S1`/`Z` proximal steps all read the previous `L2`, `S2`;
/// - the `L2`/`S2` averaging steps read the new `L1`, `S1`, `Z`;
/// - the dual ascent steps read the new `L2`, `S2`.
pub fn admm_step(
    state: &SolverState,
    d: &DenseMatrix,
    config: &SolverConfig,
) -> Result<SolverState> {
    let rho = state.rho;
    let inv_rho = 1.0 / rho;
    let lc = DenseMatrix::linear_combination;

    let l1 = prox_nuclear(&lc(&[(1.0, &state.l2), (-inv_rho, &state.y1)]), inv_rho)?;
    let s1 = prox_l1(
        &lc(&[(1.0, &state.s2), (-inv_rho, &state.y2)]),
        config.lambda * inv_rho,
    );
    let z_target = lc(&[
        (1.0, d),
        (-1.0, &state.l2),
        (-1.0, &state.s2),
        (-inv_rho, &state.y3),
    ]);
    let z = match config.formulation {
        Formulation::RootPcp => prox_frobenius(&z_target, config.mu * inv_rho),
        Formulation::StablePcpUnconstrained => stable_z_update(&z_target, config.mu, rho),
    };

    let third = 1.0 / 3.0;
    let l2 = lc(&[
        (third, d),
        (-third, &z),
        (2.0 * third, &l1),
        (-third, &s1),
        (2.0 * third * inv_rho, &state.y1),
        (-third * inv_rho, &state.y2),
        (-third * inv_rho, &state.y3),
    ]);
    let s2 = lc(&[
        (third, d),
        (-third, &z),
        (2.0 * third, &s1),
        (-third, &l1),
        (2.0 * third * inv_rho, &state.y2),
        (-third * inv_rho, &state.y1),
        (-third * inv_rho, &state.y3),
    ]);

    let y1 = lc(&[(1.0, &state.y1), (rho, &l1), (-rho, &l2)]);
    let y2 = lc(&[(1.0, &state.y2), (rho, &s1), (-rho, &s2)]);
    let y3 = lc(&[
        (1.0, &state.y3),
        (rho, &l2),
        (rho, &s2),
        (rho, &z),
        (-rho, d),
    ]);

    Ok(SolverState {
        l1,
        l2,
        s1,
        s2,
        z,
        y1,
        y2,
        y3,
        rho,
        iter: state.iter + 1,
    })
}

fn next_rho(r_primal: f64, r_dual: f64, rho: f64) -> f64 {
    if r_primal > 10.0 * r_dual {
        2.0 * rho
    } else if r_dual > 10.0 * r_primal {
        rho / 2.0
    } else {
        rho
    }
}

/// Residuals, thresholds and the penalty update for the iterate produced by
/// [`admm_step`]. `prev_l2`/`prev_s2` are the values saved before the step.
///
/// The report is computed with the current `rho`; `rho_next` takes effect on
/// the following iteration.
pub fn check_convergence(
    state: &SolverState,
    prev_l2: &DenseMatrix,
    prev_s2: &DenseMatrix,
    d: &DenseMatrix,
    config: &SolverConfig,
) -> ConvergenceReport {
    let lc = DenseMatrix::linear_combination;

    let dl = state.l1.sub(&state.l2);
    let ds = state.s1.sub(&state.s2);
    let feas = lc(&[
        (1.0, &state.z),
        (1.0, &state.l2),
        (1.0, &state.s2),
        (-1.0, d),
    ]);
    let r_primal = stacked_frobenius(&[&dl, &ds, &feas]).expect("nonempty");

    let dl2 = state.l2.sub(prev_l2);
    let ds2 = state.s2.sub(prev_s2);
    let dsum = dl2.add(&ds2);
    let r_dual = state.rho * stacked_frobenius(&[&dl2, &ds2, &dsum]).expect("nonempty");

    let x1_norm = stacked_frobenius(&[&state.l1, &state.s1, &state.z]).expect("nonempty");
    let l2s2 = state.l2.add(&state.s2);
    let x2_norm = stacked_frobenius(&[&state.l2, &state.s2, &l2s2]).expect("nonempty");
    let scale = x1_norm.max(x2_norm).max(frobenius_norm(d));
    let abs_term = config.eps_abs * (3.0 * (d.rows() * d.cols()) as f64).sqrt();
    let theta_primal = config.eps_rel * scale + abs_term;

    let y_norm = stacked_frobenius(&[&state.y1, &state.y2, &state.y3]).expect("nonempty");
    let theta_dual = config.eps_rel * y_norm + abs_term;

    ConvergenceReport {
        r_primal,
        r_dual,
        theta_primal,
        theta_dual,
        rho_next: next_rho(r_primal, r_dual, state.rho),
        converged: r_primal < theta_primal && r_dual < theta_dual,
    }
}

/// Clamp bounds for the adaptive penalty parameter; unbounded doubling can
/// overflow on pathological inputs.
pub const RHO_MIN: f64 = 1e-8;
pub const RHO_MAX: f64 = 1e8;

/// Runs the ADMM from the all-zero iterate until both residuals pass their
/// thresholds or `max_iters` is reached, then returns the block averages
/// `((L1 + L2) / 2, (S1 + S2) / 2)`.
///
/// Hitting the iteration cap returns the final iterate with
/// `converged = false`. The output is checked for non-finite entries.
pub fn solve(d: &DenseMatrix, config: &SolverConfig) -> Result<DecompositionResult> {
    config.validate()?;
    d.check_finite("solve input")?;

    let mut state = SolverState::zeros(d.rows(), d.cols(), config.rho_init);
    let mut history = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_iters {
        let prev_l2 = state.l2.clone();
        let prev_s2 = state.s2.clone();
        state = admm_step(&state, d, config)?;
        let report = check_convergence(&state, &prev_l2, &prev_s2, d, config);
        history.push(ResidualRecord {
            r_primal: report.r_primal,
            r_dual: report.r_dual,
            rho: state.rho,
        });
        state.rho = report.rho_next.clamp(RHO_MIN, RHO_MAX);
        if report.converged {
            converged = true;
            break;
        }
    }

    let l = state.l1.add(&state.l2).scale(0.5);
    let s = state.s1.add(&state.s2).scale(0.5);
    l.check_finite("solve output L")?;
    s.check_finite("solve output S")?;

    Ok(DecompositionResult {
        l,
        s,
        converged,
        iterations: state.iter,
        residual_history: history,
    })
}

/// Objective value of the selected formulation at `(l, s)`.
pub fn objective(
    formulation: Formulation,
    l: &DenseMatrix,
    s: &DenseMatrix,
    d: &DenseMatrix,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    let misfit = frobenius_norm(&DenseMatrix::linear_combination(&[
        (1.0, l),
        (1.0, s),
        (-1.0, d),
    ]));
    let penalty = match formulation {
        Formulation::RootPcp => mu * misfit,
        Formulation::StablePcpUnconstrained => 0.5 * mu * misfit * misfit,
    };
    Ok(nuclear_norm(l)? + lambda * l1_norm(s) + penalty)
}

/// Sentinel stored in the ratio/gap fields when the residual is exactly zero
/// and the scaled residual direction is undefined.
pub const KKT_ZERO_RESIDUAL_SENTINEL: f64 = -1.0;

/// First-order optimality check at `(l, s)` for the root objective.
///
/// With `G = mu (D - L - S) / ||D - L - S||_F`, an exact minimizer has
/// `||G||_2 <= 1`, `||G||_inf <= lambda`, `<G, L> = ||L||_*` and
/// `<G, S> = lambda ||S||_1`. The four ratio/gap fields quantify how far the
/// given pair is from satisfying these; when the residual is exactly zero the
/// direction is undefined and they are set to [`KKT_ZERO_RESIDUAL_SENTINEL`].
#[derive(Debug, Clone, Copy)]
pub struct KktDiagnostic {
    pub residual_norm: f64,
    pub spectral_ratio: f64,
    pub linf_ratio: f64,
    pub nuclear_gap: f64,
    pub l1_gap: f64,
}

pub fn kkt_diagnostic(
    l: &DenseMatrix,
    s: &DenseMatrix,
    d: &DenseMatrix,
    lambda: f64,
    mu: f64,
) -> Result<KktDiagnostic> {
    assert!(lambda > 0.0 && mu > 0.0, "lambda and mu must be positive");
    let residual = DenseMatrix::linear_combination(&[(1.0, d), (-1.0, l), (-1.0, s)]);
    let residual_norm = frobenius_norm(&residual);
    if residual_norm == 0.0 {
        return Ok(KktDiagnostic {
            residual_norm,
            spectral_ratio: KKT_ZERO_RESIDUAL_SENTINEL,
            linf_ratio: KKT_ZERO_RESIDUAL_SENTINEL,
            nuclear_gap: KKT_ZERO_RESIDUAL_SENTINEL,
            l1_gap: KKT_ZERO_RESIDUAL_SENTINEL,
        });
    }
    let g = residual.scale(mu / residual_norm);
    let l_nuc = nuclear_norm(l)?;
    let s_l1 = lambda * l1_norm(s);
    Ok(KktDiagnostic {
        residual_norm,
        spectral_ratio: spectral_norm(&g)?,
        linf_ratio: max_abs_entry(&g) / lambda,
        nuclear_gap: (dot(&g, l) - l_nuc).abs() / (1.0 + l_nuc),
        l1_gap: (dot(&g, s) - s_l1).abs() / (1.0 + s_l1),
    })
}
