//! Deterministic parameter sweeps over synthetic instances, emitting CSV.
//!
//! Trial `k` of a sweep row uses seed `seed_base + k`, so per-trial instances
//! are independent yet reproducible, and the same ground truths are reused
//! across the points of a mu sweep. Trials may run in parallel (capped by the
//! `ROOTPCP_THREADS` environment variable); each trial owns its state and the
//! assembled results are ordered by trial index, so outputs do not depend on
//! the thread count. Wall time is recorded but never asserted on, and the
//! [`deterministic_view`] helper drops it for byte-level comparisons.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::frobenius_norm;
use crate::simulation::{generate_instance, NoiseModel, SimSpec};
use crate::solver::{
    default_lambda, default_mu_root, default_mu_stable, solve, Formulation, SolverConfig,
};

/// Aggregated outcome of one sweep point.
#[derive(Debug, Clone)]
pub struct SweepResultRow {
    /// Name of the swept parameter ("sigma" or "n").
    pub param: &'static str,
    pub value: f64,
    pub formulation: Formulation,
    /// Noise model label, e.g. "gaussian" or "poisson_lp=3".
    pub noise: String,
    pub trials: usize,
    pub seed_base: u64,
    pub rms_l: f64,
    pub rms_s: f64,
    pub mean_iterations: f64,
    pub mean_wall_time_seconds: f64,
}

/// One point of a mu sweep: the coefficient `c` (so `mu = c * sqrt(n2)`) and
/// the trial-averaged joint recovery error divided by the best average over
/// the grid. The grid minimum is exactly 1 by construction.
#[derive(Debug, Clone, Copy)]
pub struct MuSweepCell {
    pub c: f64,
    pub eta_rel: f64,
}

/// Trial-parallelism cap: `ROOTPCP_THREADS` if set and valid, otherwise the
/// machine's available parallelism.
fn trial_threads() -> usize {
    if let Ok(raw) = std::env::var("ROOTPCP_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs `trials` independent jobs, possibly in parallel, and returns their
/// results in trial order. The first failing trial (by index) aborts.
fn run_trials<T: Send>(trials: usize, job: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let workers = trial_threads().min(trials).max(1);
    if workers == 1 {
        return (0..trials).map(&job).collect();
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<T>)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let job = &job;
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= trials {
                    break;
                }
                if tx.send((k, job(k))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut slots: Vec<Option<Result<T>>> = (0..trials).map(|_| None).collect();
        for (k, outcome) in rx {
            slots[k] = Some(outcome);
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(k, slot)| slot.unwrap_or_else(|| panic!("trial {k} never reported")))
            .collect()
    })
}

struct Trial {
    err_l_sq: f64,
    err_s_sq: f64,
    iterations: usize,
    wall_seconds: f64,
}

fn run_recovery_trial(spec: &SimSpec, config: &SolverConfig) -> Result<Trial> {
    let instance = generate_instance(spec)?;
    let started = Instant::now();
    let result = solve(&instance.d, config)?;
    let wall_seconds = started.elapsed().as_secs_f64();
    Ok(Trial {
        err_l_sq: frobenius_norm(&result.l.sub(&instance.l0)).powi(2),
        err_s_sq: frobenius_norm(&result.s.sub(&instance.s0)).powi(2),
        iterations: result.iterations,
        wall_seconds,
    })
}

fn aggregate_row(
    param: &'static str,
    value: f64,
    formulation: Formulation,
    noise: String,
    seed_base: u64,
    trials: Vec<Trial>,
) -> SweepResultRow {
    let n = trials.len() as f64;
    SweepResultRow {
        param,
        value,
        formulation,
        noise,
        trials: trials.len(),
        seed_base,
        rms_l: (trials.iter().map(|t| t.err_l_sq).sum::<f64>() / n).sqrt(),
        rms_s: (trials.iter().map(|t| t.err_s_sq).sum::<f64>() / n).sqrt(),
        mean_iterations: trials.iter().map(|t| t.iterations as f64).sum::<f64>() / n,
        mean_wall_time_seconds: trials.iter().map(|t| t.wall_seconds).sum::<f64>() / n,
    }
}

fn config_for(formulation: Formulation, n1: usize, n2: usize, sigma: f64) -> Result<SolverConfig> {
    match formulation {
        Formulation::RootPcp => Ok(SolverConfig::new(
            formulation,
            default_lambda(n1),
            default_mu_root(n2),
        )),
        Formulation::StablePcpUnconstrained => Ok(SolverConfig::new(
            formulation,
            default_lambda(n1),
            default_mu_stable(sigma, n1, n2)?,
        )),
    }
}

/// Recovery error versus noise level, at default regularization weights.
///
/// For each formulation and each sigma, runs `trials` seeded instances
/// (trial `k` uses `base.seed + k`) and aggregates RMS errors. Stable rows at
/// `sigma = 0` are skipped with a note on stderr, since the stable default
/// weight is undefined there.
pub fn sweep_sigma(
    base: &SimSpec,
    sigmas: &[f64],
    trials: usize,
    formulations: &[Formulation],
) -> Result<Vec<SweepResultRow>> {
    if sigmas.is_empty() {
        return Err(Error::invalid("sweep_sigma needs at least one sigma"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let mut rows = Vec::new();
    for &formulation in formulations {
        for &sigma in sigmas {
            if formulation == Formulation::StablePcpUnconstrained && sigma == 0.0 {
                eprintln!("note: skipping stable row at sigma = 0 (no finite default weight)");
                continue;
            }
            let config = config_for(formulation, base.n1, base.n2, sigma)?;
            let outcomes = run_trials(trials, |k| {
                let spec = SimSpec {
                    noise: base.noise.with_sigma(sigma),
                    seed: base.seed.wrapping_add(k as u64),
                    ..*base
                };
                run_recovery_trial(&spec, &config).map_err(|e| {
                    e.with_context(format!(
                        "sigma sweep row sigma={sigma} ({}) trial {k} seed {}",
                        formulation.label(),
                        spec.seed
                    ))
                })
            })?;
            rows.push(aggregate_row(
                "sigma",
                sigma,
                formulation,
                base.noise.label(),
                base.seed,
                outcomes,
            ));
        }
    }
    Ok(rows)
}

/// Recovery error versus problem size on square instances with
/// `r = round(rank_fraction * n)`, support probability 0.1 and the default
/// sparse magnitude, under Gaussian noise of the given sigma.
pub fn sweep_n(
    ns: &[usize],
    rank_fraction: f64,
    sigma: f64,
    trials: usize,
    formulations: &[Formulation],
    seed_base: u64,
) -> Result<Vec<SweepResultRow>> {
    if ns.is_empty() {
        return Err(Error::invalid("sweep_n needs at least one n"));
    }
    if rank_fraction <= 0.0 || !rank_fraction.is_finite() {
        return Err(Error::invalid("rank_fraction must be positive"));
    }
    let mut rows = Vec::new();
    for &n in ns {
        let rank = ((rank_fraction * n as f64).round() as usize).clamp(1, n);
        let base = SimSpec::new(n, n, rank, 0.1, NoiseModel::gaussian(sigma), seed_base);
        for &formulation in formulations {
            if formulation == Formulation::StablePcpUnconstrained && sigma == 0.0 {
                eprintln!("note: skipping stable row at sigma = 0 (no finite default weight)");
                continue;
            }
            let config = config_for(formulation, n, n, sigma)?;
            let outcomes = run_trials(trials, |k| {
                let spec = SimSpec {
                    seed: seed_base.wrapping_add(k as u64),
                    ..base
                };
                run_recovery_trial(&spec, &config).map_err(|e| {
                    e.with_context(format!(
                        "n sweep row n={n} ({}) trial {k} seed {}",
                        formulation.label(),
                        spec.seed
                    ))
                })
            })?;
            rows.push(aggregate_row(
                "n",
                n as f64,
                formulation,
                base.noise.label(),
                seed_base,
                outcomes,
            ));
        }
    }
    Ok(rows)
}

/// Coefficient corresponding to the tuning-free weight in a mu sweep:
/// `c * sqrt(n2)` with `c = 1/sqrt(2)` is the default root weight.
pub const PROPOSED_MU_COEFFICIENT: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Joint recovery error of the root formulation over a grid of weights
/// `mu = c * sqrt(n2)`, normalized so the best grid point has value 1.
///
/// Every coefficient is evaluated on the same `trials` ground-truth
/// instances (trial `k` seeded with `spec.seed + k`). The grid must contain
/// the proposed coefficient `1/sqrt(2)` (0.71 is accepted).
pub fn sweep_mu(spec: &SimSpec, coefficients: &[f64], trials: usize) -> Result<Vec<MuSweepCell>> {
    if coefficients.is_empty() {
        return Err(Error::invalid("sweep_mu needs a coefficient grid"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if !coefficients
        .iter()
        .any(|&c| (c - PROPOSED_MU_COEFFICIENT).abs() <= 5e-3)
    {
        return Err(Error::invalid(
            "the coefficient grid must include the proposed value 1/sqrt(2) (~0.71)",
        ));
    }
    let mu0 = (spec.n2 as f64).sqrt();
    let lambda = default_lambda(spec.n1);
    let mut means = Vec::with_capacity(coefficients.len());
    for &c in coefficients {
        if c <= 0.0 || !c.is_finite() {
            return Err(Error::invalid(format!(
                "coefficients must be positive, got {c}"
            )));
        }
        let config = SolverConfig::new(Formulation::RootPcp, lambda, c * mu0);
        let joint_errors = run_trials(trials, |k| {
            let trial_spec = SimSpec {
                seed: spec.seed.wrapping_add(k as u64),
                ..*spec
            };
            let instance = generate_instance(&trial_spec)?;
            let result = solve(&instance.d, &config).map_err(|e| {
                e.with_context(format!("mu sweep c={c} trial {k} seed {}", trial_spec.seed))
            })?;
            let el = frobenius_norm(&result.l.sub(&instance.l0));
            let es = frobenius_norm(&result.s.sub(&instance.s0));
            Ok((el * el + es * es).sqrt())
        })?;
        means.push(joint_errors.iter().sum::<f64>() / trials as f64);
    }
    let best = means.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(coefficients
        .iter()
        .zip(means.iter())
        .map(|(&c, &mean)| MuSweepCell {
            c,
            eta_rel: mean / best,
        })
        .collect())
}

/// [`sweep_sigma`] repeated for each noise model.
pub fn noise_model_sweep(
    base: &SimSpec,
    models: &[NoiseModel],
    sigmas: &[f64],
    trials: usize,
    formulations: &[Formulation],
) -> Result<Vec<SweepResultRow>> {
    if models.is_empty() {
        return Err(Error::invalid("noise_model_sweep needs at least one model"));
    }
    let mut rows = Vec::new();
    for model in models {
        model.validate()?;
        let spec = SimSpec {
            noise: *model,
            ..*base
        };
        rows.extend(sweep_sigma(&spec, sigmas, trials, formulations)?);
    }
    Ok(rows)
}

/// Fixed header of the sweep-row CSV.
pub const SWEEP_CSV_HEADER: &str =
    "param,value,formulation,noise,trials,seed_base,rms_l,rms_s,mean_iterations,mean_wall_time_seconds";

/// Fixed header of the mu-sweep CSV.
pub const MU_CSV_HEADER: &str = "c,eta_rel";

/// Nine significant digits, scientific notation.
pub fn format_float(value: f64) -> String {
    format!("{value:.8e}")
}

/// Serializes sweep rows with LF newlines and 9-significant-digit floats.
pub fn sweep_rows_to_csv(rows: &[SweepResultRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.param,
            format_float(row.value),
            row.formulation.label(),
            row.noise,
            row.trials,
            row.seed_base,
            format_float(row.rms_l),
            format_float(row.rms_s),
            format_float(row.mean_iterations),
            format_float(row.mean_wall_time_seconds),
        ));
    }
    out
}

/// Serializes mu-sweep cells with LF newlines and 9-significant-digit floats.
pub fn mu_cells_to_csv(cells: &[MuSweepCell]) -> String {
    let mut out = String::from(MU_CSV_HEADER);
    out.push('\n');
    for cell in cells {
        out.push_str(&format!(
            "{},{}\n",
            format_float(cell.c),
            format_float(cell.eta_rel)
        ));
    }
    out
}

/// Drops the trailing wall-time column when present, for byte-level
/// determinism comparisons.
pub fn deterministic_view(csv: &str) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    if !header.ends_with(",mean_wall_time_seconds") {
        return csv.to_string();
    }
    let mut out = String::new();
    out.push_str(header.rsplit_once(',').expect("has comma").0);
    out.push('\n');
    for line in lines {
        out.push_str(line.rsplit_once(',').map_or(line, |(head, _)| head));
        out.push('\n');
    }
    out
}
