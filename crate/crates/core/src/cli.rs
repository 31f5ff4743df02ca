//! Command-line front end.
//!
//! Every subcommand prints its primary artifact on stdout. With `--out-dir`
//! all artifacts are also written there together with `manifest.json`, which
//! is written even when the command fails.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::amplimit::{
    amplification_limit, build_xi_g, build_xi_tilde, ensemble_average_bound, mixed_amplification_limit, span_distance,
    DEFAULT_RANK_TOL,
};
use crate::error::{Error, Result};
use crate::io::{csv_string, fmt_f64, read_ensemble, read_operator, read_state, to_json, ResultFile};
use crate::operators::{default_grouping_tol, distinct_count, eigendecompose, ladder, sigma_z, HermitianOperator};
use crate::oracle::{default_theta_grid, fig1_curve, fig1_summary, random_search, sweep_qubit, SweepConfig};
use crate::pointer::{
    make_family_state, momentum_operator, position_operator, DetectorFamily, DetectorFamilySpec, Grid1D,
    PureDetectorState,
};
use crate::weakmeas::MeasurementSetup;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "WEAKLIMIT_THREADS";

/// Default pruning tolerance for the solver side of `sweep`.
pub const SWEEP_RANK_TOL: f64 = 1e-13;

#[derive(Parser, Debug)]
#[command(name = "weaklimit", version, about = "Amplification limits of post-selected weak measurements")]
pub struct Cli {
    /// Directory for output files and the run manifest.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Seed for randomized searches.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Largest mean shift of the read-out observable.
    Limit(LimitArgs),
    /// Position and momentum limits for the three detector families.
    Table1(Table1Args),
    /// Exact shift against the weak value for the qubit postselection family.
    Fig1(Fig1Args),
    /// Principal angle between the finite-g and the small-g spans.
    SpanCheck(SpanCheckArgs),
    /// Limit for a mixed detector ensemble and the average of pure limits.
    Mixed(MixedArgs),
    /// Brute-force search over selections compared with the solver.
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Limit(_) => "limit",
            Command::Table1(_) => "table1",
            Command::Fig1(_) => "fig1",
            Command::SpanCheck(_) => "span-check",
            Command::Mixed(_) => "mixed",
            Command::Sweep(_) => "sweep",
        }
    }

    fn parameters(&self) -> Result<serde_json::Value> {
        Ok(match self {
            Command::Limit(a) => serde_json::to_value(a)?,
            Command::Table1(a) => serde_json::to_value(a)?,
            Command::Fig1(a) => serde_json::to_value(a)?,
            Command::SpanCheck(a) => serde_json::to_value(a)?,
            Command::Mixed(a) => serde_json::to_value(a)?,
            Command::Sweep(a) => serde_json::to_value(a)?,
        })
    }
}

/// Detector side of an instance.
#[derive(Args, Debug, Clone, Serialize)]
pub struct DetectorArgs {
    /// Coupled detector observable: `z`, `p` or an operator JSON file.
    #[arg(long, default_value = "z")]
    pub omega: String,

    /// Read-out observable: `z`, `p` or an operator JSON file.
    #[arg(long, default_value = "z")]
    pub pointer: String,

    /// Detector family used when no `--state` file is given.
    #[arg(long, default_value = "gaussian:K=1")]
    pub detector: String,

    /// Grid `n=4096,L=40`; defaults to the family's grid.
    #[arg(long)]
    pub grid: Option<String>,

    /// Detector state JSON file.
    #[arg(long)]
    pub state: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LimitArgs {
    /// System observable: `sigma_z`, `ladder:N` or an operator JSON file.
    #[arg(long, default_value = "sigma_z")]
    pub system: String,

    #[command(flatten)]
    #[serde(flatten)]
    pub detector: DetectorArgs,

    /// Coupling strength; without it the small-g span is used.
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,

    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Table1Args {
    /// Detector width.
    #[arg(long = "K", default_value_t = 1.0)]
    pub k: f64,

    /// Grid for every family; defaults to each family's own grid.
    #[arg(long)]
    pub grid: Option<String>,

    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Fig1Args {
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 2e-4, 3e-4, 4e-4, 5e-4])]
    pub g_list: Vec<f64>,

    #[arg(long, default_value_t = 2000)]
    pub theta_points: usize,

    /// Detector width.
    #[arg(long = "K", default_value_t = 1.0)]
    pub k: f64,

    #[arg(long, default_value = "exponential")]
    pub family: String,

    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpanCheckArgs {
    #[arg(long, default_value = "ladder:3")]
    pub system: String,

    #[command(flatten)]
    #[serde(flatten)]
    pub detector: DetectorArgs,

    #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 5e-4, 2.5e-4, 1.25e-4])]
    pub g_list: Vec<f64>,

    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MixedArgs {
    /// Ensemble JSON file `{"weights": [...], "states": [...]}`.
    #[arg(long)]
    pub ensemble: PathBuf,

    /// System observable; fixes the span size.
    #[arg(long, default_value = "sigma_z")]
    pub system: String,

    #[arg(long, default_value = "z")]
    pub omega: String,

    #[arg(long, default_value = "z")]
    pub pointer: String,

    /// Grid for the `z` and `p` presets.
    #[arg(long)]
    pub grid: Option<String>,

    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SweepArgs {
    #[arg(long, default_value = "sigma_z")]
    pub system: String,

    #[command(flatten)]
    #[serde(flatten)]
    pub detector: DetectorArgs,

    #[arg(long, default_value_t = 1e-5, allow_negative_numbers = true)]
    pub g: f64,

    #[arg(long, default_value_t = SweepConfig::default().coarse_points)]
    pub coarse_points: usize,

    #[arg(long, default_value_t = SweepConfig::default().refine_rounds)]
    pub refine_rounds: usize,

    #[arg(long, default_value_t = SweepConfig::default().refine_shrink)]
    pub refine_shrink: f64,

    #[arg(long, default_value_t = SweepConfig::default().prob_floor)]
    pub prob_floor: f64,

    /// Random candidates for systems larger than a qubit.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,

    /// Pruning tolerance of the finite-g span; kicked columns differ by
    /// O(gʲ), so small couplings need a tolerance well below the default.
    #[arg(long, default_value_t = SWEEP_RANK_TOL)]
    pub rank_tol: f64,
}

/// Artifacts of one command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    /// `(file name, contents)` pairs written under `--out-dir`.
    pub files: Vec<(String, String)>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub code_version: String,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotHermitian { .. }
        | Error::DimensionMismatch { .. }
        | Error::InvalidInput(_)
        | Error::GridTooNarrow { .. }
        | Error::Io(_)
        | Error::Json(_) => EXIT_USAGE,
        Error::VanishingProbability { .. }
        | Error::VanishingOverlap { .. }
        | Error::DegenerateDetector { .. }
        | Error::Inconsistent(_)
        | Error::NoValidSelections { .. }
        | Error::Singular(_) => EXIT_NUMERICAL,
    }
}

fn parse_grid(s: &str) -> Result<Grid1D> {
    s.parse()
}

fn parse_family(s: &str) -> Result<DetectorFamilySpec> {
    s.parse()
}

fn system_operator(spec: &str) -> Result<HermitianOperator> {
    match spec {
        "sigma_z" => Ok(sigma_z()),
        _ => match spec.strip_prefix("ladder:") {
            Some(n) => ladder(n.parse().map_err(|e| Error::InvalidInput(format!("bad ladder size '{n}': {e}")))?),
            None => read_operator(Path::new(spec)),
        },
    }
}

fn is_preset(spec: &str) -> bool {
    matches!(spec, "z" | "p")
}

fn detector_operator(spec: &str, grid: Option<&Grid1D>) -> Result<HermitianOperator> {
    match (spec, grid) {
        ("z", Some(g)) => Ok(position_operator(g)),
        ("p", Some(g)) => Ok(momentum_operator(g)),
        ("z" | "p", None) => Err(Error::InvalidInput(format!("preset '{spec}' needs a grid"))),
        _ => read_operator(Path::new(spec)),
    }
}

struct Detector {
    omega: HermitianOperator,
    m: HermitianOperator,
    upsilon: PureDetectorState,
}

fn resolve_detector(args: &DetectorArgs) -> Result<Detector> {
    let family = parse_family(&args.detector)?;
    let needs_grid = args.state.is_none() || is_preset(&args.omega) || is_preset(&args.pointer);
    let grid = match (&args.grid, needs_grid) {
        (Some(g), _) => Some(parse_grid(g)?),
        (None, true) => Some(family.default_grid()),
        (None, false) => None,
    };
    let upsilon = match &args.state {
        Some(path) => read_state(path)?,
        None => make_family_state(&family, grid.as_ref().expect("grid resolved above"))?,
    };
    let omega = detector_operator(&args.omega, grid.as_ref())?;
    let m = detector_operator(&args.pointer, grid.as_ref())?;
    for op in [&omega, &m] {
        if op.dim() != upsilon.dim() {
            return Err(Error::DimensionMismatch { expected: upsilon.dim(), found: op.dim() });
        }
    }
    Ok(Detector { omega, m, upsilon })
}

fn distinct_eigenvalues(a: &HermitianOperator) -> Result<usize> {
    Ok(distinct_count(&eigendecompose(a, default_grouping_tol(a))?))
}

pub fn cmd_limit(args: &LimitArgs) -> Result<Outcome> {
    let a = system_operator(&args.system)?;
    let det = resolve_detector(&args.detector)?;
    let result = match args.g {
        Some(g) => {
            let setup = MeasurementSetup::new(g, a, det.omega)?;
            amplification_limit(&build_xi_g(&setup, &det.upsilon, args.rank_tol)?, &det.m, &det.upsilon)?
        }
        None => {
            let r_a = distinct_eigenvalues(&a)?;
            amplification_limit(&build_xi_tilde(&det.omega, &det.upsilon, r_a, args.rank_tol)?, &det.m, &det.upsilon)?
        }
    };
    let json = to_json(&ResultFile::from(&result))?;
    Ok(Outcome { stdout: json.clone(), files: vec![("limit.json".into(), json)] })
}

/// Closed-form `(position, momentum)` limits for a family of width `k`.
pub fn table1_reference(family: DetectorFamily, k: f64) -> (f64, f64) {
    match family {
        DetectorFamily::Gaussian | DetectorFamily::Lorentzian => (k, 0.5 / k),
        DetectorFamily::Exponential => (k * FRAC_1_SQRT_2, FRAC_1_SQRT_2 / k),
    }
}

fn table1_row(spec: &DetectorFamilySpec, grid: &Grid1D, rank_tol: f64) -> Result<(f64, f64)> {
    let up = make_family_state(spec, grid)?;
    let z = position_operator(grid);
    let p = momentum_operator(grid);
    let span = build_xi_tilde(&z, &up, 2, rank_tol)?;
    Ok((amplification_limit(&span, &z, &up)?.limit, amplification_limit(&span, &p, &up)?.limit))
}

pub fn cmd_table1(args: &Table1Args) -> Result<Outcome> {
    let grid = args.grid.as_deref().map(parse_grid).transpose()?;
    let mut rows = Vec::new();
    for family in DetectorFamily::ALL {
        let spec = DetectorFamilySpec::new(family, args.k)?;
        let grid = grid.unwrap_or_else(|| spec.default_grid());
        let (ref_z, ref_p) = table1_reference(family, args.k);
        let row = match table1_row(&spec, &grid, args.rank_tol) {
            Ok((z, p)) => {
                let rel = ((z - ref_z) / ref_z).abs().max(((p - ref_p) / ref_p).abs());
                vec![
                    family.name().into(),
                    fmt_f64(z),
                    fmt_f64(p),
                    fmt_f64(ref_z),
                    fmt_f64(ref_p),
                    fmt_f64(rel),
                    String::new(),
                ]
            }
            Err(e @ Error::GridTooNarrow { .. }) => vec![
                family.name().into(),
                String::new(),
                String::new(),
                fmt_f64(ref_z),
                fmt_f64(ref_p),
                String::new(),
                e.to_string(),
            ],
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    let csv = csv_string(&["family", "max_z_shift", "max_p_shift", "paper_z", "paper_p", "rel_err", "error"], &rows)?;
    Ok(Outcome { stdout: csv.clone(), files: vec![("table1.csv".into(), csv)] })
}

pub fn cmd_fig1(args: &Fig1Args) -> Result<Outcome> {
    let spec = parse_family(&format!("{}:K={}", args.family, args.k))?;
    let grid = match &args.grid {
        Some(g) => parse_grid(g)?,
        None => spec.default_grid(),
    };
    if args.g_list.is_empty() {
        return Err(Error::InvalidInput("--g-list is empty".into()));
    }
    if args.theta_points < 2 {
        return Err(Error::InvalidInput("--theta-points must be at least 2".into()));
    }
    let rows = fig1_curve(&spec, &grid, &args.g_list, &default_theta_grid(args.theta_points))?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![fmt_f64(r.g), fmt_f64(r.theta), fmt_f64(r.im_aw), fmt_f64(r.shift), fmt_f64(r.prob)])
        .collect();
    let csv = csv_string(&["g", "theta", "im_aw", "shift", "prob"], &table)?;
    let summary = to_json(&fig1_summary(&rows))?;
    Ok(Outcome {
        stdout: summary.clone(),
        files: vec![("fig1.csv".into(), csv), ("fig1_summary.json".into(), summary)],
    })
}

pub fn cmd_span_check(args: &SpanCheckArgs) -> Result<Outcome> {
    let a = system_operator(&args.system)?;
    let det = resolve_detector(&args.detector)?;
    let r_a = distinct_eigenvalues(&a)?;
    let tilde = build_xi_tilde(&det.omega, &det.upsilon, r_a, args.rank_tol)?;
    let base = MeasurementSetup::new(0.0, a, det.omega)?;
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    for &g in &args.g_list {
        let span = build_xi_g(&base.with_g(g), &det.upsilon, args.rank_tol)?;
        let angle = span_distance(&span, &tilde)?.angle;
        let ratio = prev.map(|p| fmt_f64(p / angle)).unwrap_or_default();
        rows.push(vec![fmt_f64(g), fmt_f64(angle), ratio]);
        prev = Some(angle);
    }
    let csv = csv_string(&["g", "principal_angle", "ratio_to_prev"], &rows)?;
    Ok(Outcome { stdout: csv.clone(), files: vec![("span_check.csv".into(), csv)] })
}

#[derive(Serialize)]
struct MixedReport {
    limit: f64,
    avg_pure_bound: f64,
    extrema: Vec<f64>,
    warnings: Vec<String>,
}

pub fn cmd_mixed(args: &MixedArgs) -> Result<Outcome> {
    let ensemble = read_ensemble(&args.ensemble)?;
    let r_a = distinct_eigenvalues(&system_operator(&args.system)?)?;
    let grid = args.grid.as_deref().map(parse_grid).transpose()?;
    let omega = detector_operator(&args.omega, grid.as_ref())?;
    let m = detector_operator(&args.pointer, grid.as_ref())?;
    let result = mixed_amplification_limit(&ensemble, &omega, &m, r_a, args.rank_tol)?;
    let bound = ensemble_average_bound(&ensemble, &omega, &m, r_a, args.rank_tol)?;
    let json = to_json(&MixedReport {
        limit: result.limit,
        avg_pure_bound: bound,
        extrema: result.extrema,
        warnings: result.warnings,
    })?;
    Ok(Outcome { stdout: json.clone(), files: vec![("mixed.json".into(), json)] })
}

#[derive(Serialize)]
struct SweepReport {
    method: &'static str,
    oracle_max: f64,
    oracle_shift: f64,
    solver_limit: f64,
    gap: f64,
    probability: f64,
    evaluated: usize,
    skipped: usize,
}

pub fn cmd_sweep(args: &SweepArgs, seed: u64) -> Result<Outcome> {
    let a = system_operator(&args.system)?;
    let det = resolve_detector(&args.detector)?;
    let setup = MeasurementSetup::new(args.g, a, det.omega)?;
    let cfg = SweepConfig {
        g: args.g,
        coarse_points: args.coarse_points,
        refine_rounds: args.refine_rounds,
        refine_shrink: args.refine_shrink,
        prob_floor: args.prob_floor,
        seed,
    };
    let (method, out) = if setup.system_dim() == 2 {
        ("grid", sweep_qubit(&setup, &det.upsilon, &det.m, &cfg)?)
    } else {
        ("random", random_search(&setup, &det.upsilon, &det.m, &cfg, args.samples)?)
    };
    let limit = amplification_limit(&build_xi_g(&setup, &det.upsilon, args.rank_tol)?, &det.m, &det.upsilon)?.limit;
    let history: Vec<Vec<String>> =
        out.history.iter().enumerate().map(|(i, v)| vec![i.to_string(), fmt_f64(*v)]).collect();
    let csv = csv_string(&["round", "max_abs_shift"], &history)?;
    let json = to_json(&SweepReport {
        method,
        oracle_max: out.max_abs_shift,
        oracle_shift: out.shift,
        solver_limit: limit,
        gap: limit - out.max_abs_shift,
        probability: out.probability,
        evaluated: out.evaluated,
        skipped: out.skipped,
    })?;
    Ok(Outcome { stdout: json.clone(), files: vec![("sweep.csv".into(), csv), ("sweep.json".into(), json)] })
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Limit(a) => cmd_limit(a),
        Command::Table1(a) => cmd_table1(a),
        Command::Fig1(a) => cmd_fig1(a),
        Command::SpanCheck(a) => cmd_span_check(a),
        Command::Mixed(a) => cmd_mixed(a),
        Command::Sweep(a) => cmd_sweep(a, cli.seed),
    }
}

fn write_outputs(dir: &Path, cli: &Cli, result: &Result<Outcome>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut outputs = Vec::new();
    if let Ok(outcome) = result {
        for (name, contents) in &outcome.files {
            fs::write(dir.join(name), contents)?;
            outputs.push(name.clone());
        }
    }
    let manifest = RunManifest {
        command: cli.command.name().into(),
        parameters: cli.command.parameters()?,
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed: cli.seed,
        outputs,
        status: if result.is_ok() { "ok" } else { "error" }.into(),
        error: result.as_ref().err().map(|e| e.to_string()),
    };
    fs::write(dir.join("manifest.json"), to_json(&manifest)?)?;
    Ok(())
}

fn configure_threads() {
    let Ok(value) = std::env::var(THREADS_ENV) else { return };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("warning: ignoring {THREADS_ENV}={value:?}"),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    configure_threads();
    let result = execute(&cli);
    if let Some(dir) = &cli.out_dir {
        if let Err(e) = write_outputs(dir, &cli, &result) {
            eprintln!("error: could not write outputs to {}: {e}", dir.display());
            return EXIT_USAGE;
        }
    }
    match result {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
