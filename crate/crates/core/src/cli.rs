//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
//! failure (including a verification check that does not hold).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::concentration::{
    empirical_tail, jl_min_measurements, mgf_bound, mgf_lhs_exact, mgf_rhs_exact, mgf_single_exact,
    moment4_bound, moment4_exact, random_unit_vector, TailCheckReport,
};
use crate::ensembles::{generate, Ensemble, MatrixDescriptor, MeasurementMatrix};
use crate::error::{Error, Result};
use crate::experiments::{write_results, ExperimentSpec, OutputFormat};
use crate::imageio::{image_recover, read_pgm, synthetic_sparse_image, write_pgm, FIXTURE_SEED};
use crate::rip::{delta2_coherence, delta_k_bruteforce, recovery_condition, RipEstimate};
use crate::rng::derive_seed;
use crate::solver::{basis_pursuit, bpdn, SolverConfig, SolverResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

/// Largest relative gap accepted by `check-lemma21`.
pub const LEMMA21_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "symcs", version, about = "Compressed sensing with partial random symmetric Bernoulli matrices")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a measurement matrix as a JSON descriptor or raw CSV.
    GenMatrix(GenMatrixArgs),
    /// Recover one signal from a matrix file and a measurement file.
    Recover(RecoverArgs),
    /// Brute-force restricted isometry constants of a small matrix.
    RipScan(RipScanArgs),
    /// Exact-enumeration check of the moment generating function identity.
    CheckLemma21(CheckLemma21Args),
    /// Monte Carlo check of the concentration tail bound.
    CheckTails(CheckTailsArgs),
    /// Measurement count for a Johnson-Lindenstrauss embedding.
    JlSize(JlSizeArgs),
    /// Success-rate sweep from a JSON experiment spec.
    Sweep(SweepArgs),
    /// Recover a sparse PGM image.
    ImageDemo(ImageDemoArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Master seed; falls back to CS_SEED, then 0.
    #[arg(long, env = "CS_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatrixFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct GenMatrixArgs {
    #[arg(long, default_value = "partial-symmetric-bernoulli")]
    pub ensemble: Ensemble,
    /// Number of measurements (rows).
    #[arg(long = "n")]
    pub n: usize,
    /// Signal length (columns).
    #[arg(long = "N")]
    pub big_n: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, value_enum, default_value = "json")]
    pub format: MatrixFormat,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Matrix as a JSON descriptor or raw CSV.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Measurements, whitespace or comma separated.
    #[arg(long)]
    pub measurements: PathBuf,
    /// Noise radius; 0 solves basis pursuit.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Solver settings as JSON.
    #[arg(long)]
    pub solver: Option<PathBuf>,
    /// Solution output, one value per line (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Solver report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RipScanArgs {
    #[arg(long, default_value = "partial-symmetric-bernoulli")]
    pub ensemble: Ensemble,
    #[arg(long = "n")]
    pub n: usize,
    #[arg(long = "N")]
    pub big_n: usize,
    /// Largest order scanned; every k in 1..=k-max is reported.
    #[arg(long, default_value_t = 2)]
    pub k_max: usize,
    /// Eigenvalue convergence tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckLemma21Args {
    #[arg(long = "N")]
    pub big_n: usize,
    #[arg(long = "n")]
    pub n: usize,
    #[arg(long)]
    pub h: f64,
    /// Random unit directions tested.
    #[arg(long, default_value_t = 20)]
    pub directions: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckTailsArgs {
    #[arg(long = "N", default_value_t = 256)]
    pub big_n: usize,
    #[arg(long = "n", default_value_t = 100)]
    pub n: usize,
    /// Deviation levels, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5])]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct JlSizeArgs {
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub beta: f64,
    /// Number of points.
    #[arg(long)]
    pub m: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the spec's master seed; falls back to CS_SEED.
    #[arg(long, env = "CS_SEED")]
    pub seed: Option<u64>,
    /// Output format (default: from the file extension, else CSV).
    #[arg(long, value_enum)]
    pub format: Option<SweepFormat>,
    /// Overrides the spec's trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Suppress progress output.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ImageDemoArgs {
    /// Input PGM (default: the built-in synthetic sparse image).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Side length of the synthetic image.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Nonzero pixels of the synthetic image.
    #[arg(long, default_value_t = 739)]
    pub k: usize,
    #[arg(long = "n", default_value_t = 2400)]
    pub n: usize,
    #[arg(long, default_value = "partial-symmetric-bernoulli")]
    pub ensemble: Ensemble,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Reconstructed image.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the reconstruction as binary P5 instead of ASCII P2.
    #[arg(long)]
    pub binary: bool,
    /// Recovery report as JSON (default: standard output).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Parses the process arguments and runs the command.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be >= 1");
            return Ok(EXIT_USAGE);
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::GenMatrix(a) => gen_matrix(a),
        Command::Recover(a) => recover(a),
        Command::RipScan(a) => rip_scan(a),
        Command::CheckLemma21(a) => check_lemma21(a),
        Command::CheckTails(a) => check_tails(a),
        Command::JlSize(a) => jl_size(a),
        Command::Sweep(a) => sweep(a),
        Command::ImageDemo(a) => image_demo(a),
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn gen_matrix(a: GenMatrixArgs) -> Result<i32> {
    let m = generate(a.ensemble, a.n, a.big_n, a.seed.seed)?;
    let text = match a.format {
        MatrixFormat::Json => json(&m.descriptor())?,
        MatrixFormat::Csv => m.to_csv(),
    };
    emit(a.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

fn load_matrix(path: &Path) -> Result<MeasurementMatrix> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('{') {
        serde_json::from_str::<MatrixDescriptor>(&text)?.regenerate()
    } else {
        MeasurementMatrix::from_csv(&text)
    }
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

#[derive(Serialize)]
struct RecoverReport<'a> {
    eps: f64,
    #[serde(flatten)]
    result: &'a SolverResult,
}

fn recover(a: RecoverArgs) -> Result<i32> {
    let phi = load_matrix(&a.matrix)?;
    let y = parse_vector(&read_text(&a.measurements)?)?;
    let cfg = match &a.solver {
        Some(p) => serde_json::from_str::<SolverConfig>(&read_text(p)?)?,
        None => SolverConfig::default(),
    };
    let r = if a.eps == 0.0 {
        basis_pursuit(&phi, &y, &cfg)?
    } else {
        bpdn(&phi, &y, a.eps, &cfg)?
    };
    let text: String = r.solution.iter().map(|v| format!("{v:?}\n")).collect();
    emit(a.out.as_deref(), &text)?;
    if let Some(p) = &a.report {
        emit(Some(p), &json(&RecoverReport { eps: a.eps, result: &r })?)?;
    }
    if !r.converged() {
        eprintln!("warning: solver stopped with status {:?}", r.status);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RipScanReport {
    ensemble: Ensemble,
    n: usize,
    #[serde(rename = "N")]
    big_n: usize,
    seed: u64,
    coherence: f64,
    estimates: Vec<RipEstimate>,
    /// `delta_2k < sqrt(2) - 1` for each `k` with `2k <= k_max`.
    recovery_condition: Vec<(usize, bool)>,
}

fn rip_scan(a: RipScanArgs) -> Result<i32> {
    let phi = generate(a.ensemble, a.n, a.big_n, a.seed.seed)?;
    let estimates = (1..=a.k_max)
        .map(|k| delta_k_bruteforce(&phi, k, a.tol))
        .collect::<Result<Vec<_>>>()?;
    let recovery = estimates
        .iter()
        .filter(|e| e.order % 2 == 0)
        .map(|e| recovery_condition(e.delta).map(|ok| (e.order / 2, ok)))
        .collect::<Result<Vec<_>>>()?;
    let report = RipScanReport {
        ensemble: a.ensemble,
        n: a.n,
        big_n: a.big_n,
        seed: a.seed.seed,
        coherence: delta2_coherence(&phi)?,
        estimates,
        recovery_condition: recovery,
    };
    emit(a.out.as_deref(), &json(&report)?)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Lemma21Direction {
    alpha: Vec<f64>,
    lhs: f64,
    rhs: f64,
    rel_gap: f64,
    single_mgf: f64,
    fourth_moment: f64,
}

#[derive(Serialize)]
struct Lemma21Report {
    #[serde(rename = "N")]
    big_n: usize,
    n: usize,
    h: f64,
    seed: u64,
    tolerance: f64,
    max_rel_gap: f64,
    /// `None` when `h >= N/2`, where the bound does not apply.
    mgf_bound: Option<f64>,
    moment4_bound: f64,
    bound_violations: usize,
    holds: bool,
    directions: Vec<Lemma21Direction>,
}

fn check_lemma21(a: CheckLemma21Args) -> Result<i32> {
    if a.directions == 0 {
        return Err(Error::InvalidInput("--directions must be >= 1".into()));
    }
    let bound = mgf_bound(a.big_n, a.h).ok();
    let m4_bound = moment4_bound(a.big_n);
    let mut directions = Vec::with_capacity(a.directions);
    for d in 0..a.directions as u64 {
        let alpha = random_unit_vector(a.big_n, derive_seed(a.seed.seed, &[d]));
        let lhs = mgf_lhs_exact(a.big_n, a.n, &alpha, a.h)?;
        let rhs = mgf_rhs_exact(a.big_n, &alpha, a.h, a.n)?;
        directions.push(Lemma21Direction {
            single_mgf: mgf_single_exact(a.big_n, &alpha, a.h)?,
            fourth_moment: moment4_exact(a.big_n, &alpha)?,
            rel_gap: (lhs - rhs).abs() / rhs.abs(),
            lhs,
            rhs,
            alpha,
        });
    }
    let max_rel_gap = directions.iter().map(|d| d.rel_gap).fold(0.0, f64::max);
    let bound_violations = directions
        .iter()
        .filter(|d| bound.is_some_and(|b| d.single_mgf > b) || d.fourth_moment > m4_bound)
        .count();
    let holds = max_rel_gap <= LEMMA21_TOL && bound_violations == 0;
    let report = Lemma21Report {
        big_n: a.big_n,
        n: a.n,
        h: a.h,
        seed: a.seed.seed,
        tolerance: LEMMA21_TOL,
        max_rel_gap,
        mgf_bound: bound,
        moment4_bound: m4_bound,
        bound_violations,
        holds,
        directions,
    };
    emit(a.out.as_deref(), &json(&report)?)?;
    if holds {
        Ok(EXIT_OK)
    } else {
        eprintln!("check failed: max relative gap {max_rel_gap:e}, {bound_violations} bound violations");
        Ok(EXIT_FAILURE)
    }
}

fn check_tails(a: CheckTailsArgs) -> Result<i32> {
    let reports = a
        .eps
        .iter()
        .enumerate()
        .map(|(i, &eps)| empirical_tail(a.big_n, a.n, eps, a.trials, derive_seed(a.seed.seed, &[i as u64])))
        .collect::<Result<Vec<TailCheckReport>>>()?;
    emit(a.out.as_deref(), &json(&reports)?)?;
    let failed: Vec<f64> = reports.iter().filter(|r| !r.within_bound()).map(|r| r.epsilon).collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("check failed: tail frequency above bound at eps {failed:?}");
        Ok(EXIT_FAILURE)
    }
}

fn jl_size(a: JlSizeArgs) -> Result<i32> {
    println!("{}", jl_min_measurements(a.eps, a.beta, a.m)?);
    Ok(EXIT_OK)
}

fn sweep(a: SweepArgs) -> Result<i32> {
    let mut spec: ExperimentSpec = serde_json::from_str(&read_text(&a.config)?)?;
    if let Some(s) = a.seed {
        spec.master_seed = s;
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    spec.validate()?;
    let format = match a.format {
        Some(SweepFormat::Csv) => OutputFormat::Csv,
        Some(SweepFormat::Json) => OutputFormat::Json,
        None if a.out.extension().is_some_and(|e| e == "json") => OutputFormat::Json,
        None => OutputFormat::Csv,
    };
    // fail before the long run if the destination is not writable
    fs::File::create(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let quiet = a.quiet;
    let step = (spec.trials * spec.axis_values.len() * spec.ensemble_list.len() / 20).max(1);
    let result = crate::experiments::sweep_with_progress(&spec, |done, total| {
        if !quiet && (done % step == 0 || done == total) {
            eprintln!("sweep: {done}/{total} trials");
        }
    })?;
    write_results(&result, format, &a.out)?;
    Ok(EXIT_OK)
}

fn image_demo(a: ImageDemoArgs) -> Result<i32> {
    let img = match &a.input {
        Some(p) => read_pgm(&fs::read(p).map_err(|e| Error::io(p, e))?)?,
        None => synthetic_sparse_image(a.size, a.size, a.k, FIXTURE_SEED)?,
    };
    if let Some(p) = &a.out {
        fs::File::create(p).map_err(|e| Error::io(p, e))?;
    }
    let r = image_recover(&img, a.n, a.ensemble, a.seed.seed, &SolverConfig::default())?;
    if let Some(p) = &a.out {
        fs::write(p, write_pgm(&r.image, a.binary)).map_err(|e| Error::io(p, e))?;
    }
    emit(a.report.as_deref(), &json(&r.report)?)?;
    Ok(EXIT_OK)
}
