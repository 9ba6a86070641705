//! Command-line front end: `bounds`, `certify`, `robust`, `sw` and `demo`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use steerlab::assemblage::{assemblage_from, assemblage_from_ket, MeasurementSet, SchmidtCoefficients};
use steerlab::certify::{
    certify_state_run, ideal_measurements, reconstruct_coefficients, CertificationReport, StateInput,
    DEFAULT_TOL as CERT_TOL,
};
use steerlab::io;
use steerlab::qmath::BipartiteDims;
use steerlab::robust::{robust_point, strength_for_epsilon, NoiseKind, NoiseModel, Reference, RobustnessRecord};
use steerlab::steerweight::{steerable_weight, DEFAULT_TOL as SW_TOL};
use steerlab::tsi::{local_bound, local_bound_bruteforce, numeric_quantum_bound, quantum_bound, TsiParams};
use steerlab::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_CERTIFICATION: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;

pub const DEFAULT_SEED: u64 = 42;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "STEERLAB_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Validation(String),
    Certification(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Certification(_) => EXIT_CERTIFICATION,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Validation(m) | CliError::Certification(m) | CliError::Solver(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. } => CliError::Solver(e.to_string()),
            Error::CrossCheck(_) => CliError::Certification(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// Sweep values from `x`, `start:stop:step` or `start:stop:logN`.
#[derive(Debug, Clone, PartialEq)]
pub struct Range(pub Vec<f64>);

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number in range '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        let values = match parts.as_slice() {
            [x] => vec![num(x)?],
            [start, stop, step] => {
                let (start, stop) = (num(start)?, num(stop)?);
                if let Some(n) = step.trim().strip_prefix("log") {
                    let n: usize = n.parse().map_err(|_| format!("bad point count in '{s}'"))?;
                    if n == 0 || !(start > 0.0 && stop > 0.0) {
                        return Err(format!("log range '{s}' needs positive endpoints and at least one point"));
                    }
                    if n == 1 {
                        vec![start]
                    } else {
                        let (a, b) = (start.ln(), stop.ln());
                        (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
                    }
                } else {
                    let step = num(step)?;
                    if !(step > 0.0) || stop < start {
                        return Err(format!("range '{s}' needs step > 0 and stop >= start"));
                    }
                    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                    if count > 1_000_000 {
                        return Err(format!("range '{s}' has too many points"));
                    }
                    (0..count).map(|k| start + step * k as f64).collect()
                }
            }
            _ => return Err(format!("range '{s}' must be x, start:stop:step or start:stop:logN")),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("range '{s}' has non-finite values"));
        }
        Ok(Range(values))
    }
}

#[derive(Parser, Debug)]
#[command(name = "steerlab", version, about = "Steering-based certification of entangled states")]
struct Cli {
    /// Seed for all randomness.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Sweep the TSI local and quantum bounds to CSV.
    Bounds(BoundsArgs),
    /// Certify a state against ideal or given measurements; JSON report.
    Certify(CertifyArgs),
    /// Robustness sweep against the analytic bounds; CSV.
    Robust(RobustArgs),
    /// Steerable weight of an assemblage; JSON.
    Sw(SwArgs),
    /// Run the ideal protocol end to end and narrate it.
    Demo(DemoArgs),
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long)]
    alpha: Range,
    /// Explicit β values (all pairs with α are swept).
    #[arg(long, conflicts_with = "tilt")]
    beta: Option<Range>,
    /// Use the certifying β = √(α² + 1).
    #[arg(long)]
    tilt: bool,
    /// ξ grid for the brute-force local bound.
    #[arg(long, default_value_t = 100_000)]
    grid: usize,
    /// Refinement restarts for the numerical quantum bound.
    #[arg(long, default_value_t = 4)]
    restarts: usize,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// State JSON file.
    #[arg(long)]
    state: PathBuf,
    /// `ideal` or a measurement JSON file.
    #[arg(long, default_value = "ideal")]
    measurements: String,
    /// Target dimension; defaults to the state's d_B.
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated Schmidt coefficients; reconstructed from the assemblage when omitted.
    #[arg(long, value_delimiter = ',')]
    coeffs: Option<Vec<f64>>,
    #[arg(long, default_value_t = CERT_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct RobustArgs {
    #[arg(long)]
    d: usize,
    /// white-noise, rotation or dephasing.
    #[arg(long)]
    model: String,
    /// Noise strengths.
    #[arg(long, conflicts_with = "epsilon", required_unless_present = "epsilon")]
    strength: Option<Range>,
    /// Target ε values; strengths are solved for.
    #[arg(long)]
    epsilon: Option<Range>,
}

#[derive(Args, Debug)]
struct SwArgs {
    /// Assemblage JSON file.
    #[arg(long)]
    assemblage: PathBuf,
    #[arg(long, default_value_t = SW_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Comma-separated Schmidt coefficients; seeded random ones when omitted.
    #[arg(long, value_delimiter = ',')]
    coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementSource {
    Ideal,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BetaSpec {
    Tilted,
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrengthSpec {
    Strengths(Vec<f64>),
    Epsilons(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Bounds { alpha: Vec<f64>, beta: BetaSpec, grid: usize, restarts: usize },
    Certify { state: PathBuf, measurements: MeasurementSource, d: Option<usize>, coeffs: Option<Vec<f64>>, tol: f64 },
    Robust { d: usize, model: NoiseKind, strengths: StrengthSpec },
    Sw { assemblage: PathBuf, tol: f64 },
    Demo { d: usize, coeffs: Option<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

/// Parses and validates `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    let usage = |m: String| CliError::Usage(m);
    let command = match cli.command {
        CliCommand::Bounds(a) => {
            let beta = match (a.tilt, a.beta) {
                (true, _) => BetaSpec::Tilted,
                (false, Some(b)) => BetaSpec::Values(b.0),
                (false, None) => return Err(usage("bounds needs --beta or --tilt".into())),
            };
            if a.grid < 1000 {
                return Err(usage(format!("--grid {} must be at least 1000", a.grid)));
            }
            Command::Bounds { alpha: a.alpha.0, beta, grid: a.grid, restarts: a.restarts }
        }
        CliCommand::Certify(a) => {
            let measurements = match a.measurements.as_str() {
                "ideal" => MeasurementSource::Ideal,
                path => MeasurementSource::File(PathBuf::from(path)),
            };
            if !(a.tol > 0.0) {
                return Err(usage(format!("--tol {} must be positive", a.tol)));
            }
            Command::Certify { state: a.state, measurements, d: a.d, coeffs: a.coeffs, tol: a.tol }
        }
        CliCommand::Robust(a) => {
            let model = NoiseKind::from_str(&a.model).map_err(|e| usage(e.to_string()))?;
            let strengths = match (a.strength, a.epsilon) {
                (Some(s), None) => StrengthSpec::Strengths(s.0),
                (None, Some(e)) => StrengthSpec::Epsilons(e.0),
                _ => return Err(usage("robust needs exactly one of --strength or --epsilon".into())),
            };
            if a.d < 2 {
                return Err(usage(format!("--d {} must be at least 2", a.d)));
            }
            Command::Robust { d: a.d, model, strengths }
        }
        CliCommand::Sw(a) => {
            if !(a.tol > 0.0) {
                return Err(usage(format!("--tol {} must be positive", a.tol)));
            }
            Command::Sw { assemblage: a.assemblage, tol: a.tol }
        }
        CliCommand::Demo(a) => {
            if a.d < 2 {
                return Err(usage(format!("--d {} must be at least 2", a.d)));
            }
            Command::Demo { d: a.d, coeffs: a.coeffs }
        }
    };
    Ok(RunConfig { command, out: cli.out, seed: cli.seed })
}

pub enum Format {
    Csv,
    Json,
}

/// A finished report ready to be written.
pub enum Report {
    Csv(String),
    Json(Value),
    Text(String),
}

impl Report {
    pub fn render(&self) -> String {
        match self {
            Report::Csv(s) | Report::Text(s) => s.clone(),
            Report::Json(v) => io::to_pretty(v),
        }
    }

    pub fn format(&self) -> Option<Format> {
        match self {
            Report::Csv(_) => Some(Format::Csv),
            Report::Json(_) => Some(Format::Json),
            Report::Text(_) => None,
        }
    }
}

/// Writes `report` to `path`, or standard output when `None`.
pub fn emit_report(report: &Report, path: Option<&Path>) -> Result<(), CliError> {
    let text = report.render();
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Result of a run: the report plus whether the run's pass condition held.
pub struct RunOutput {
    pub report: Report,
    pub passed: bool,
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    io::parse(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn thread_count() -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n >= 1 => n.min(available.max(1)),
        _ => available,
    }
}

/// Maps `f` over `items` on up to [`thread_count`] threads, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = thread_count().min(items.len()).max(1);
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker thread panicked")).collect()
    })
}

fn run_bounds(alpha: &[f64], beta: &BetaSpec, grid: usize, restarts: usize) -> Result<RunOutput, CliError> {
    let mut params = Vec::new();
    for &a in alpha {
        match beta {
            BetaSpec::Tilted => params.push(TsiParams::tilted(a)?),
            BetaSpec::Values(bs) => {
                for &b in bs {
                    params.push(TsiParams::new(a, b)?);
                }
            }
        }
    }
    let rows = par_map(&params, |p| -> Result<String, Error> {
        let cols = [
            p.alpha,
            p.beta,
            local_bound(p),
            quantum_bound(p),
            local_bound_bruteforce(p, grid)?,
            numeric_quantum_bound(p, restarts),
        ];
        Ok(cols.iter().map(|&x| io::format_float(x)).collect::<Vec<_>>().join(","))
    });
    let mut csv = String::from(io::BOUNDS_CSV_HEADER);
    csv.push('\n');
    for row in rows {
        csv.push_str(&row?);
        csv.push('\n');
    }
    Ok(RunOutput { report: Report::Csv(csv), passed: true })
}

fn load_measurements(source: &MeasurementSource, d: usize, d_a: usize) -> Result<MeasurementSet, CliError> {
    let meas = match source {
        MeasurementSource::Ideal => ideal_measurements(d)?,
        MeasurementSource::File(p) => io::measurements_from_json(&read_json(p)?)?,
    };
    if meas.d_a() < d_a && matches!(source, MeasurementSource::Ideal) {
        return Ok(meas.embed(d_a - meas.d_a()));
    }
    Ok(meas)
}

fn run_certify(
    state: &Path,
    source: &MeasurementSource,
    d: Option<usize>,
    coeffs: Option<&[f64]>,
    tol: f64,
) -> Result<RunOutput, CliError> {
    let (input, dims) = io::state_from_json(&read_json(state)?)?;
    let d = d.unwrap_or(dims.b);
    let meas = load_measurements(source, d, dims.a)?;
    let c = match coeffs {
        Some(raw) => SchmidtCoefficients::new(raw.to_vec())?,
        None => {
            let asm = match &input {
                StateInput::Pure(k) => assemblage_from_ket(k, dims, &meas)?,
                StateInput::Mixed(rho) => assemblage_from(rho, dims, &meas)?,
            };
            match reconstruct_coefficients(&asm, tol.max(1e-9)) {
                Ok(c) => c,
                Err(e) => return Err(CliError::Certification(format!("coefficient reconstruction failed: {e}"))),
            }
        }
    };
    let run = certify_state_run(&input, dims, &meas, &c, tol)?;
    let mut json = io::certification_report_to_json(&run.report);
    json["coefficients"] = Value::Array(c.as_slice().iter().map(|&x| io::round_sig(x, io::REPORT_DIGITS).into()).collect());
    Ok(RunOutput { report: Report::Json(json), passed: run.report.passed })
}

fn run_robust(d: usize, kind: NoiseKind, spec: &StrengthSpec, seed: u64) -> Result<RunOutput, CliError> {
    let reference = Reference::maximally_entangled(d)?;
    let (values, by_epsilon) = match spec {
        StrengthSpec::Strengths(s) => (s.clone(), false),
        StrengthSpec::Epsilons(e) => (e.clone(), true),
    };
    let records = par_map(&values, |&v| -> Result<RobustnessRecord, Error> {
        let strength = if by_epsilon { strength_for_epsilon(&reference, kind, v, seed)? } else { v };
        robust_point(&reference, &NoiseModel::new(kind, strength, seed)?)
    });
    let mut csv = String::from(io::ROBUST_CSV_HEADER);
    csv.push('\n');
    let mut passed = true;
    for rec in records {
        let rec = rec?;
        passed &= rec.passed();
        csv.push_str(&io::robust_csv_row(&rec));
        csv.push('\n');
    }
    Ok(RunOutput { report: Report::Csv(csv), passed })
}

fn run_sw(path: &Path, tol: f64) -> Result<RunOutput, CliError> {
    let asm = io::assemblage_from_json(&read_json(path)?)?;
    let sol = steerable_weight(&asm, tol)?;
    Ok(RunOutput { report: Report::Json(io::sdp_solution_to_json(&sol)), passed: true })
}

fn summarize(report: &CertificationReport) -> (f64, f64) {
    let worst_violation = report.subspace_violations.iter().map(|v| (v.value - v.target).abs()).fold(0.0, f64::max);
    let min_meas = report.measurement_fidelities.values().copied().fold(1.0, f64::min);
    (worst_violation, min_meas)
}

fn run_demo(d: usize, coeffs: Option<&[f64]>, seed: u64) -> Result<RunOutput, CliError> {
    let c = match coeffs {
        Some(raw) => SchmidtCoefficients::new(raw.to_vec())?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..1.0)).collect();
            SchmidtCoefficients::normalized(&raw)?
        }
    };
    if c.d() != d {
        return Err(CliError::Usage(format!("{} coefficients given for d = {d}", c.d())));
    }
    let dims = BipartiteDims::new(d, d)?;
    let meas = ideal_measurements(d)?;
    let run = certify_state_run(&StateInput::Pure(c.target_ket()), dims, &meas, &c, CERT_TOL)?;
    let rep = &run.report;
    let (worst_violation, min_meas) = summarize(rep);
    let fmt = io::format_float;
    let mut out = String::new();
    let coeff_text: Vec<String> = c.as_slice().iter().map(|&x| fmt(x)).collect();
    let _ = writeln!(out, "target: d = {d}, c = [{}]", coeff_text.join(", "));
    let _ = writeln!(
        out,
        "step 1: Alice measures her black box ({} settings x {} outcomes); Bob reconstructs the assemblage",
        meas.settings(),
        meas.outcomes()
    );
    let _ = writeln!(out, "        structure residual vs ideal assemblage = {}", fmt(rep.structure_residual));
    let _ = writeln!(
        out,
        "step 2: tilted steering inequality on {} two-dimensional subspaces, max |value - 2β_m| = {}",
        rep.subspace_violations.len(),
        fmt(worst_violation)
    );
    let _ = writeln!(
        out,
        "step 3: SWAP isometry extracts the state: sufficient residual = {}, state fidelity = {}, min measurement fidelity = {}",
        fmt(rep.sufficient_residual),
        fmt(rep.state_fidelity),
        fmt(min_meas)
    );
    let _ = writeln!(out, "result: {}", if rep.passed { "pass" } else { "fail" });
    Ok(RunOutput { report: Report::Text(out), passed: rep.passed })
}

/// Executes a parsed configuration and returns its report.
pub fn execute(config: &RunConfig) -> Result<RunOutput, CliError> {
    match &config.command {
        Command::Bounds { alpha, beta, grid, restarts } => run_bounds(alpha, beta, *grid, *restarts),
        Command::Certify { state, measurements, d, coeffs, tol } => {
            run_certify(state, measurements, *d, coeffs.as_deref(), *tol)
        }
        Command::Robust { d, model, strengths } => run_robust(*d, *model, strengths, config.seed),
        Command::Sw { assemblage, tol } => run_sw(assemblage, *tol),
        Command::Demo { d, coeffs } => run_demo(*d, coeffs.as_deref(), config.seed),
    }
}

/// Runs a configuration, writes its report and returns the exit status.
pub fn run(config: &RunConfig) -> i32 {
    let result = execute(config).and_then(|out| {
        emit_report(&out.report, config.out.as_deref())?;
        Ok(out.passed)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => EXIT_CERTIFICATION,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

/// Full entry point: parse, run, exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    match parse_args(args.clone()) {
        Ok(config) => run(&config),
        Err(e) => {
            // Help and version requests are not errors.
            if let Err(clap_err) = Cli::try_parse_from(&args) {
                if !clap_err.use_stderr() {
                    print!("{clap_err}");
                    return 0;
                }
            }
            eprint!("{}", e.message());
            if !e.message().ends_with('\n') {
                eprintln!();
            }
            e.exit_code()
        }
    }
}
