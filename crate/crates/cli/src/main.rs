//! Command-line front end: decompose observations, generate synthetic
//! instances, run parameter sweeps, and check first-order optimality.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 iteration
//! cap reached without convergence under `--strict`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use rootpcp::error::Error;
use rootpcp::experiments::{
    mu_cells_to_csv, noise_model_sweep, sweep_mu, sweep_n, sweep_rows_to_csv, sweep_sigma,
};
use rootpcp::io::{
    format_key_values, load_frames_dir, load_matrix, load_matrix_csv, parse_key_values,
    save_frames, save_matrix_csv, FrameStack, MatrixFile,
};
use rootpcp::linalg::{frobenius_norm, max_abs_entry, DenseMatrix};
use rootpcp::simulation::{generate_instance, NoiseModel, SimSpec};
use rootpcp::solver::{
    default_lambda, default_mu_root, default_mu_stable, kkt_diagnostic, objective, solve,
    DecompositionResult, Formulation, SolverConfig,
};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rootpcp",
    about = "Low-rank plus sparse matrix recovery with tuning-free regularization",
    version,
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split an observation into low-rank, sparse and noise components.
    Decompose(DecomposeArgs),
    /// Generate a synthetic ground-truth instance.
    Simulate(SimulateArgs),
    /// Recovery error versus noise level.
    SweepSigma(SweepSigmaArgs),
    /// Recovery error versus problem size.
    SweepN(SweepNArgs),
    /// Recovery error versus the Frobenius-term weight.
    SweepMu(SweepMuArgs),
    /// Sigma sweep repeated across noise distributions.
    SweepNoise(SweepNoiseArgs),
    /// First-order optimality check of a given decomposition.
    Check(CheckArgs),
}

#[derive(Args)]
struct DecomposeArgs {
    /// Observation matrix (CSV, or a single PGM image).
    #[arg(long, conflicts_with = "frames_dir")]
    input: Option<PathBuf>,
    /// Directory of PGM frames; each frame becomes one column.
    #[arg(long)]
    frames_dir: Option<PathBuf>,
    /// Output directory for the recovered components and the run summary.
    #[arg(long)]
    output_dir: PathBuf,
    /// Optional flat key=value config file (flags override it).
    #[arg(long)]
    config: Option<PathBuf>,
    /// root | stable
    #[arg(long)]
    formulation: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Noise standard deviation, used for the stable default weight.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eps_abs: Option<f64>,
    #[arg(long)]
    eps_rel: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rho_init: Option<f64>,
    /// Exit with code 3 when the iteration cap is reached unconverged.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 0.1)]
    rho_s: f64,
    #[arg(long, default_value_t = rootpcp::simulation::DEFAULT_S_MAGNITUDE)]
    s_magnitude: f64,
    /// gaussian | uniform | poisson:<lambda_p>
    #[arg(long, default_value = "gaussian")]
    noise: String,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct SweepSigmaArgs {
    /// Square instance size n1 = n2 = n.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 0.1)]
    rho_s: f64,
    #[arg(long, default_value_t = rootpcp::simulation::DEFAULT_S_MAGNITUDE)]
    s_magnitude: f64,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',', required = true)]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Comma-separated: root,stable
    #[arg(long, value_delimiter = ',', default_value = "root")]
    formulations: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepNArgs {
    /// Comma-separated square sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    rank_fraction: f64,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "root")]
    formulations: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepMuArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 0.1)]
    rho_s: f64,
    #[arg(long, default_value_t = rootpcp::simulation::DEFAULT_S_MAGNITUDE)]
    s_magnitude: f64,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Comma-separated coefficient grid for mu = c * sqrt(n2); must include
    /// the proposed value 0.71.
    #[arg(long, value_delimiter = ',', required = true)]
    coefficients: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepNoiseArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 0.1)]
    rho_s: f64,
    #[arg(long, default_value_t = rootpcp::simulation::DEFAULT_S_MAGNITUDE)]
    s_magnitude: f64,
    /// Comma-separated models: gaussian, uniform, poisson:<lambda_p>
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "root")]
    formulations: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Low-rank estimate (CSV).
    #[arg(long)]
    l: PathBuf,
    /// Sparse estimate (CSV).
    #[arg(long)]
    s: PathBuf,
    /// Observation (CSV).
    #[arg(long)]
    d: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version requests are successes; anything else is usage
            let code = if err.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Decompose(args) => run_decompose(args),
        Command::Simulate(args) => run_simulate(args),
        Command::SweepSigma(args) => run_sweep_sigma(args),
        Command::SweepN(args) => run_sweep_n(args),
        Command::SweepMu(args) => run_sweep_mu(args),
        Command::SweepNoise(args) => run_sweep_noise(args),
        Command::Check(args) => run_check(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(inner) = source {
                eprintln!("  caused by: {inner}");
                source = inner.source();
            }
            ExitCode::from(if err.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_NUMERICAL
            })
        }
    }
}

fn parse_formulation(raw: &str) -> Result<Formulation, Error> {
    match raw {
        "root" => Ok(Formulation::RootPcp),
        "stable" => Ok(Formulation::StablePcpUnconstrained),
        other => Err(Error::invalid(format!(
            "unknown formulation {other:?} (expected root or stable)"
        ))),
    }
}

fn parse_formulations(raw: &[String]) -> Result<Vec<Formulation>, Error> {
    raw.iter().map(|s| parse_formulation(s)).collect()
}

/// `gaussian`, `uniform` or `poisson:<lambda_p>`; sigma is filled in later.
fn parse_noise(raw: &str, sigma: f64) -> Result<NoiseModel, Error> {
    if raw == "gaussian" {
        return Ok(NoiseModel::gaussian(sigma));
    }
    if raw == "uniform" {
        return Ok(NoiseModel::uniform(sigma));
    }
    if let Some(rate) = raw.strip_prefix("poisson:") {
        let lambda_p: f64 = rate
            .parse()
            .map_err(|_| Error::invalid(format!("bad poisson rate {rate:?}")))?;
        return Ok(NoiseModel::poisson(sigma, lambda_p));
    }
    if raw == "poisson" {
        return Err(Error::invalid(
            "poisson noise needs a rate: use poisson:<lambda_p>",
        ));
    }
    Err(Error::invalid(format!(
        "unknown noise model {raw:?} (expected gaussian, uniform or poisson:<lambda_p>)"
    )))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Solver settings accumulated from built-in defaults, then a config file,
/// then explicit flags.
#[derive(Default)]
struct Overrides {
    formulation: Option<Formulation>,
    lambda: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    eps_abs: Option<f64>,
    eps_rel: Option<f64>,
    max_iters: Option<usize>,
    rho_init: Option<f64>,
}

impl Overrides {
    fn from_config_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut overrides = Self::default();
        for (key, value) in parse_key_values(&text, path)? {
            let parse_f64 = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("config key {key}: bad number {v:?}")))
            };
            match key.as_str() {
                "formulation" => overrides.formulation = Some(parse_formulation(&value)?),
                "lambda" => overrides.lambda = Some(parse_f64(&value)?),
                "mu" => overrides.mu = Some(parse_f64(&value)?),
                "sigma" => overrides.sigma = Some(parse_f64(&value)?),
                "eps_abs" => overrides.eps_abs = Some(parse_f64(&value)?),
                "eps_rel" => overrides.eps_rel = Some(parse_f64(&value)?),
                "max_iters" => {
                    overrides.max_iters = Some(value.parse().map_err(|_| {
                        Error::invalid(format!("config key max_iters: bad integer {value:?}"))
                    })?)
                }
                "rho_init" => overrides.rho_init = Some(parse_f64(&value)?),
                other => {
                    return Err(Error::invalid(format!("unknown config key {other:?}")));
                }
            }
        }
        Ok(overrides)
    }

    fn merge_flags(mut self, args: &DecomposeArgs) -> Result<Self, Error> {
        if let Some(f) = &args.formulation {
            self.formulation = Some(parse_formulation(f)?);
        }
        self.lambda = args.lambda.or(self.lambda);
        self.mu = args.mu.or(self.mu);
        self.sigma = args.sigma.or(self.sigma);
        self.eps_abs = args.eps_abs.or(self.eps_abs);
        self.eps_rel = args.eps_rel.or(self.eps_rel);
        self.max_iters = args.max_iters.or(self.max_iters);
        self.rho_init = args.rho_init.or(self.rho_init);
        Ok(self)
    }

    fn into_config(self, n1: usize, n2: usize) -> Result<SolverConfig, Error> {
        let formulation = self.formulation.unwrap_or(Formulation::RootPcp);
        let lambda = self.lambda.unwrap_or_else(|| default_lambda(n1));
        let mu = match (self.mu, formulation) {
            (Some(mu), _) => mu,
            (None, Formulation::RootPcp) => default_mu_root(n2),
            (None, Formulation::StablePcpUnconstrained) => {
                let sigma = self.sigma.ok_or_else(|| {
                    Error::invalid(
                        "the stable formulation needs --mu or --sigma to derive its default weight",
                    )
                })?;
                default_mu_stable(sigma, n1, n2)?
            }
        };
        let mut config = SolverConfig::new(formulation, lambda, mu);
        if let Some(v) = self.eps_abs {
            config.eps_abs = v;
        }
        if let Some(v) = self.eps_rel {
            config.eps_rel = v;
        }
        if let Some(v) = self.max_iters {
            config.max_iters = v;
        }
        if let Some(v) = self.rho_init {
            config.rho_init = v;
        }
        Ok(config)
    }
}

fn run_summary(
    config: &SolverConfig,
    result: &DecompositionResult,
    d: &DenseMatrix,
    wall_seconds: f64,
) -> Result<Vec<(String, String)>, Error> {
    let kv = |k: &str, v: String| (k.to_string(), v);
    let mut pairs = vec![
        kv("n1", d.rows().to_string()),
        kv("n2", d.cols().to_string()),
        kv("formulation", config.formulation.label().to_string()),
        kv("lambda", format!("{:.12e}", config.lambda)),
        kv("mu", format!("{:.12e}", config.mu)),
        kv("eps_abs", format!("{:.12e}", config.eps_abs)),
        kv("eps_rel", format!("{:.12e}", config.eps_rel)),
        kv("max_iters", config.max_iters.to_string()),
        kv("rho_init", format!("{:.12e}", config.rho_init)),
        kv("converged", result.converged.to_string()),
        kv("iterations", result.iterations.to_string()),
    ];
    if let Some(last) = result.residual_history.last() {
        pairs.push(kv("final_r_primal", format!("{:.12e}", last.r_primal)));
        pairs.push(kv("final_r_dual", format!("{:.12e}", last.r_dual)));
        pairs.push(kv("final_rho", format!("{:.12e}", last.rho)));
    }
    let objective_value = objective(
        config.formulation,
        &result.l,
        &result.s,
        d,
        config.lambda,
        config.mu,
    )?;
    pairs.push(kv("objective", format!("{objective_value:.12e}")));
    let kkt = kkt_diagnostic(&result.l, &result.s, d, config.lambda, config.mu)?;
    pairs.push(kv(
        "kkt_residual_norm",
        format!("{:.12e}", kkt.residual_norm),
    ));
    pairs.push(kv(
        "kkt_spectral_ratio",
        format!("{:.12e}", kkt.spectral_ratio),
    ));
    pairs.push(kv("kkt_linf_ratio", format!("{:.12e}", kkt.linf_ratio)));
    pairs.push(kv("kkt_nuclear_gap", format!("{:.12e}", kkt.nuclear_gap)));
    pairs.push(kv("kkt_l1_gap", format!("{:.12e}", kkt.l1_gap)));
    pairs.push(kv("wall_time_seconds", format!("{wall_seconds:.3}")));
    Ok(pairs)
}

fn run_decompose(args: DecomposeArgs) -> Result<ExitCode, Error> {
    let mut overrides = Overrides::default();
    if let Some(config_path) = &args.config {
        overrides = Overrides::from_config_file(config_path)?;
    }
    let overrides = overrides.merge_flags(&args)?;

    enum Input {
        Matrix(DenseMatrix),
        Frames(FrameStack),
    }
    let input = match (&args.input, &args.frames_dir) {
        (Some(path), None) => Input::Matrix(load_matrix(&MatrixFile::infer(path))?),
        (None, Some(dir)) => Input::Frames(load_frames_dir(dir)?),
        _ => {
            return Err(Error::invalid(
                "decompose needs exactly one of --input or --frames-dir",
            ));
        }
    };
    let d = match &input {
        Input::Matrix(m) => m.clone(),
        Input::Frames(stack) => stack.matrix.clone(),
    };

    let config = overrides.into_config(d.rows(), d.cols())?;
    ensure_dir(&args.output_dir)?;

    let started = Instant::now();
    let result = solve(&d, &config)?;
    let wall_seconds = started.elapsed().as_secs_f64();

    let z = DenseMatrix::linear_combination(&[(1.0, &d), (-1.0, &result.l), (-1.0, &result.s)]);
    match &input {
        Input::Matrix(_) => {
            save_matrix_csv(&args.output_dir.join("l.csv"), &result.l)?;
            save_matrix_csv(&args.output_dir.join("s.csv"), &result.s)?;
            save_matrix_csv(&args.output_dir.join("z.csv"), &z)?;
        }
        Input::Frames(stack) => {
            let shaped = |m: &DenseMatrix| FrameStack {
                frame_height: stack.frame_height,
                frame_width: stack.frame_width,
                matrix: m.clone(),
            };
            // low-rank frames keep the pixel range; signed components get a
            // symmetric data-driven range centered at zero
            save_frames(&shaped(&result.l), &args.output_dir.join("L"), (0.0, 255.0))?;
            let s_bound = max_abs_entry(&result.s).max(1e-12);
            save_frames(
                &shaped(&result.s),
                &args.output_dir.join("S"),
                (-s_bound, s_bound),
            )?;
            let z_bound = max_abs_entry(&z).max(1e-12);
            save_frames(&shaped(&z), &args.output_dir.join("Z"), (-z_bound, z_bound))?;
        }
    }

    let summary = run_summary(&config, &result, &d, wall_seconds)?;
    write_file(
        &args.output_dir.join("summary.txt"),
        &format_key_values(&summary),
    )?;
    println!(
        "decomposed {}x{}: converged={} iterations={} residual={:.3e}",
        d.rows(),
        d.cols(),
        result.converged,
        result.iterations,
        frobenius_norm(&z)
    );

    if args.strict && !result.converged {
        return Ok(ExitCode::from(EXIT_NOT_CONVERGED));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_simulate(args: SimulateArgs) -> Result<ExitCode, Error> {
    let noise = parse_noise(&args.noise, args.sigma)?;
    let mut spec = SimSpec::new(args.n1, args.n2, args.rank, args.rho_s, noise, args.seed);
    spec.s_magnitude = args.s_magnitude;
    let instance = generate_instance(&spec)?;
    ensure_dir(&args.output_dir)?;
    save_matrix_csv(&args.output_dir.join("d.csv"), &instance.d)?;
    save_matrix_csv(&args.output_dir.join("l0.csv"), &instance.l0)?;
    save_matrix_csv(&args.output_dir.join("s0.csv"), &instance.s0)?;
    save_matrix_csv(&args.output_dir.join("z0.csv"), &instance.z0)?;
    let pairs = vec![
        ("n1".to_string(), spec.n1.to_string()),
        ("n2".to_string(), spec.n2.to_string()),
        ("rank".to_string(), spec.rank.to_string()),
        ("rho_s".to_string(), format!("{}", spec.rho_s)),
        ("s_magnitude".to_string(), format!("{}", spec.s_magnitude)),
        ("noise".to_string(), spec.noise.label()),
        ("sigma".to_string(), format!("{}", spec.noise.sigma)),
        ("seed".to_string(), spec.seed.to_string()),
    ];
    write_file(
        &args.output_dir.join("spec.txt"),
        &format_key_values(&pairs),
    )?;
    println!(
        "wrote {}x{} instance (rank {}) to {}",
        spec.n1,
        spec.n2,
        spec.rank,
        args.output_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_sweep_sigma(args: SweepSigmaArgs) -> Result<ExitCode, Error> {
    let formulations = parse_formulations(&args.formulations)?;
    let mut base = SimSpec::new(
        args.n,
        args.n,
        args.rank,
        args.rho_s,
        NoiseModel::gaussian(0.0),
        args.seed_base,
    );
    base.s_magnitude = args.s_magnitude;
    let rows = sweep_sigma(&base, &args.sigmas, args.trials, &formulations)?;
    write_file(&args.out, &sweep_rows_to_csv(&rows))?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_sweep_n(args: SweepNArgs) -> Result<ExitCode, Error> {
    let formulations = parse_formulations(&args.formulations)?;
    let rows = sweep_n(
        &args.ns,
        args.rank_fraction,
        args.sigma,
        args.trials,
        &formulations,
        args.seed_base,
    )?;
    write_file(&args.out, &sweep_rows_to_csv(&rows))?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_sweep_mu(args: SweepMuArgs) -> Result<ExitCode, Error> {
    let mut spec = SimSpec::new(
        args.n,
        args.n,
        args.rank,
        args.rho_s,
        NoiseModel::gaussian(args.sigma),
        args.seed_base,
    );
    spec.s_magnitude = args.s_magnitude;
    let cells = sweep_mu(&spec, &args.coefficients, args.trials)?;
    write_file(&args.out, &mu_cells_to_csv(&cells))?;
    println!("wrote {} cells to {}", cells.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_sweep_noise(args: SweepNoiseArgs) -> Result<ExitCode, Error> {
    let formulations = parse_formulations(&args.formulations)?;
    let models = args
        .models
        .iter()
        .map(|raw| parse_noise(raw, 0.0))
        .collect::<Result<Vec<_>, _>>()?;
    let mut base = SimSpec::new(
        args.n,
        args.n,
        args.rank,
        args.rho_s,
        NoiseModel::gaussian(0.0),
        args.seed_base,
    );
    base.s_magnitude = args.s_magnitude;
    let rows = noise_model_sweep(&base, &models, &args.sigmas, args.trials, &formulations)?;
    write_file(&args.out, &sweep_rows_to_csv(&rows))?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_check(args: CheckArgs) -> Result<ExitCode, Error> {
    let l = load_matrix_csv(&args.l)?;
    let s = load_matrix_csv(&args.s)?;
    let d = load_matrix_csv(&args.d)?;
    let lambda = args.lambda.unwrap_or_else(|| default_lambda(d.rows()));
    let mu = args.mu.unwrap_or_else(|| default_mu_root(d.cols()));
    let kkt = kkt_diagnostic(&l, &s, &d, lambda, mu)?;
    let pairs = vec![
        ("lambda".to_string(), format!("{lambda:.12e}")),
        ("mu".to_string(), format!("{mu:.12e}")),
        (
            "residual_norm".to_string(),
            format!("{:.12e}", kkt.residual_norm),
        ),
        (
            "spectral_ratio".to_string(),
            format!("{:.12e}", kkt.spectral_ratio),
        ),
        ("linf_ratio".to_string(), format!("{:.12e}", kkt.linf_ratio)),
        (
            "nuclear_gap".to_string(),
            format!("{:.12e}", kkt.nuclear_gap),
        ),
        ("l1_gap".to_string(), format!("{:.12e}", kkt.l1_gap)),
    ];
    print!("{}", format_key_values(&pairs));
    Ok(ExitCode::SUCCESS)
}
