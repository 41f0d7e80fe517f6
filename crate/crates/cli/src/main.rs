use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use tvfilter::design::{
    default_rho_grid, design_lpv_gain, design_static_gain, uniform_theta_grid, GainCertificate, LmiScalarParams,
    DEFAULT_NU,
};
use tvfilter::harness::{
    design_for, emit_per_step, emit_seed_summary, prepare, report_csv, run_experiment,
    run_sweep, summarize_seeds, Algorithm, DesignKind, DesignRequest, ExperimentConfig, GainSpec, MetricsReport,
    Regime, StreamSource, SweepConfig,
};

#[derive(Parser)]
#[command(name = "tvfilter", version, about = "Filtered tracking of time-varying optimizers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and report its tracking error.
    Run(RunArgs),
    /// Run a grid of experiments over algorithms, step counts, regimes and seeds.
    Sweep(SweepArgs),
    /// Synthesize a gain and write its certificate.
    Design(DesignArgs),
    /// Write the optimal trajectory of the expected problem as CSV.
    GroundTruth(GroundTruthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum AlgorithmArg {
    Pc,
    TvEkf,
    TvContract,
    StochCorrectionOnly,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Pc => Algorithm::Pc,
            AlgorithmArg::TvEkf => Algorithm::TvEkf,
            AlgorithmArg::TvContract => Algorithm::TvContract,
            AlgorithmArg::StochCorrectionOnly => Algorithm::StochCorrectionOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum RegimeArg {
    GoodPrediction,
    PoorPrediction,
    ExtrapolationA,
    ExtrapolationB,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::GoodPrediction => Regime::good_prediction(),
            RegimeArg::PoorPrediction => Regime::poor_prediction(),
            RegimeArg::ExtrapolationA => Regime::ExtrapolationA,
            RegimeArg::ExtrapolationB => Regime::extrapolation_b(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DesignArg {
    Static,
    Lpv,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON). Defaults to the synthetic ride-hailing experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report file; stdout when absent and the config names none.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    /// Prediction steps.
    #[arg(long = "p", short = 'P')]
    p: Option<usize>,
    /// Correction steps.
    #[arg(long = "c", short = 'C')]
    c: Option<usize>,
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    /// Design a gain for tv_contract instead of using the config's gain.
    #[arg(long, value_enum)]
    design: Option<DesignArg>,
    /// Also write `k,err` for every step to this file.
    #[arg(long)]
    per_step: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config (JSON): a base experiment plus lists to expand.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Cross-seed summary CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct DesignArgs {
    /// Design from an experiment config, using its stream and problem.
    #[arg(long, conflicts_with = "params")]
    config: Option<PathBuf>,
    /// Design from explicit scalar parameters (JSON with omega1, omega2, q, r, delta).
    #[arg(long, required_unless_present = "config")]
    params: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "static")]
    kind: DesignArg,
    /// Scheduled share of the prediction noise: a fraction with --config, an absolute scale with --params.
    #[arg(long)]
    q1: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_NU)]
    nu: f64,
    #[arg(long, default_value_t = 4)]
    theta_points: usize,
    /// State dimension of the gain (with --params).
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GroundTruthArgs {
    /// Experiment config (JSON). Defaults to the synthetic ride-hailing experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures with their exit codes: 2 config, 3 numerical, 4 I/O.
enum CliError {
    Lib(tvfilter::Error),
    Io(PathBuf, std::io::Error),
    Config(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 3,
            CliError::Lib(e) if e.is_io() => 4,
            CliError::Io(..) => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
            CliError::Config(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<tvfilter::Error> for CliError {
    fn from(e: tvfilter::Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Relative CSV paths in a config are taken relative to the config file.
fn resolve_stream(cfg: &mut ExperimentConfig, config_path: &Path) {
    if let StreamSource::Csv(csv) = &mut cfg.stream {
        if csv.csv_path.is_relative() {
            if let Some(dir) = config_path.parent() {
                csv.csv_path = dir.join(&csv.csv_path);
            }
        }
    }
}

fn load_experiment(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    match path {
        Some(p) => {
            let mut cfg: ExperimentConfig = read_json(p)?;
            resolve_stream(&mut cfg, p);
            Ok(cfg)
        }
        None => Ok(ExperimentConfig::synthetic_default()),
    }
}

fn write_output(path: Option<&Path>, body: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| CliError::Io(p.to_path_buf(), e)),
        None => match std::io::stdout().write_all(body.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(PathBuf::from("<stdout>"), e)),
            _ => Ok(()),
        },
    }
}

fn render(reports: &[MetricsReport], format: Format) -> CliResult<String> {
    match format {
        Format::Csv => Ok(report_csv(reports)?),
        Format::Json => serde_json::to_string_pretty(reports)
            .map(|s| s + "\n")
            .map_err(|e| CliError::Config(e.to_string())),
    }
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let mut cfg = load_experiment(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(regime) = args.regime {
        cfg.regime = regime.into();
    }
    if args.algorithm.is_some() || args.p.is_some() || args.c.is_some() {
        let alg = args.algorithm.map_or(cfg.algorithm, Algorithm::from);
        let p = if alg == Algorithm::StochCorrectionOnly { 0 } else { args.p.unwrap_or(cfg.p) };
        let c = args.c.unwrap_or(cfg.c);
        cfg = cfg.with_algorithm(alg, p, c);
    }
    if let Some(kind) = args.design {
        let kind = if kind == DesignArg::Lpv { DesignKind::Lpv } else { DesignKind::Static };
        cfg.gain = Some(GainSpec::Design(DesignRequest::new(kind)));
    }
    let out = args.out.or_else(|| cfg.output_path.clone());
    let report = run_experiment(&cfg)?;
    if let Some(path) = &args.per_step {
        emit_per_step(&report, path)?;
    }
    eprintln!(
        "{} {} P={} C={} seed={}: mean error {:.6} ({:.0} ms)",
        report.regime, report.algorithm, report.p, report.c, report.seed, report.mean_err, report.wall_ms
    );
    write_output(out.as_deref(), &render(std::slice::from_ref(&report), args.format)?)
}

fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    let mut sweep: SweepConfig = read_json(&args.config)?;
    resolve_stream(&mut sweep.base, &args.config);
    let start = Instant::now();
    let reports = run_sweep(&sweep)?;
    eprintln!("{} runs in {:.1} s", reports.len(), start.elapsed().as_secs_f64());
    if let Some(path) = &args.summary {
        emit_seed_summary(&summarize_seeds(&reports), path)?;
    }
    write_output(args.out.as_deref(), &render(&reports, args.format)?)
}

fn cmd_design(args: DesignArgs) -> CliResult<GainCertificate> {
    if args.theta_points == 0 || args.dim == 0 {
        return Err(CliError::Config("--theta-points and --dim must be positive".into()));
    }
    let cert = match (&args.config, &args.params) {
        (Some(path), _) => {
            let cfg = load_experiment(Some(path))?;
            let mut req = match &cfg.gain {
                Some(GainSpec::Design(req)) => req.clone(),
                _ => DesignRequest::new(DesignKind::Static),
            };
            req.design = if args.kind == DesignArg::Lpv { DesignKind::Lpv } else { DesignKind::Static };
            req.nu = args.nu;
            req.theta_points = args.theta_points;
            if let Some(f) = args.q1 {
                req.q1_fraction = f;
            }
            let prep = prepare(&cfg)?;
            design_for(&cfg, &prep, &req)?
        }
        (None, Some(path)) => {
            let params: LmiScalarParams = read_json(path)?;
            params.validate()?;
            let grid = default_rho_grid(&params);
            match args.kind {
                DesignArg::Static => design_static_gain(&params, &grid, args.dim)?,
                DesignArg::Lpv => {
                    let thetas = uniform_theta_grid(args.theta_points);
                    design_lpv_gain(&params, args.q1.unwrap_or(0.0), args.nu, &thetas, &grid, args.dim)?
                }
            }
        }
        (None, None) => return Err(CliError::Config("design needs --config or --params".into())),
    };
    let body = serde_json::to_string_pretty(&cert).map_err(|e| CliError::Config(e.to_string()))? + "\n";
    write_output(args.out.as_deref(), &body)?;
    Ok(cert)
}

fn cmd_ground_truth(args: GroundTruthArgs) -> CliResult<()> {
    let mut cfg = load_experiment(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let prep = prepare(&cfg)?;
    let truth = &prep.truth;
    let n = prep.cost.dim_x();
    let mut body = String::from("k,t");
    for i in 1..=n {
        body.push_str(&format!(",x{i}"));
    }
    body.push('\n');
    for (k, (t, x)) in prep.times.iter().zip(&truth.trajectory).enumerate() {
        body.push_str(&format!("{k},{t}"));
        for v in x.iter() {
            body.push_str(&format!(",{v}"));
        }
        body.push('\n');
    }
    eprintln!(
        "{} samples, drift {:.6}, residual {:.3e}",
        truth.trajectory.len(),
        truth.drift_delta,
        truth.residual_tol
    );
    write_output(args.out.as_deref(), &body)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Design(a) => cmd_design(a).map(|cert| {
            eprintln!(
                "rho {:.4}, gamma1 {:.4}, gamma2 {:.4}, bound {:.6}",
                cert.rho, cert.gamma1, cert.gamma2, cert.ae_bound
            );
        }),
        Command::GroundTruth(a) => cmd_ground_truth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
