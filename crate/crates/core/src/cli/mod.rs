//! Command-line front end: `convert`, `decode`, `verify` and `random`.

pub mod files;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::crf::{CrfModel, Mode};
use crate::equivalence::{crf_to_hmc, crf_to_hmc_generalized};
use crate::error::Error;
use crate::exec::Exec;
use crate::hmc::HmcModel;
use crate::oracle::DEFAULT_BUDGET;
use crate::tables::{Alphabet, ObsSeq};
use crate::verify::{verify_equivalence, VerifyConfig, VerifyReport, DEFAULT_TOLERANCE};
use files::{parse_sequence, Model, ModelFile, TraceFile};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Bad arguments, unreadable files, or malformed input.
    pub const INPUT: i32 = 2;
    /// The model puts zero mass on every label sequence.
    pub const DEGENERATE: i32 = 3;
    /// An observation sequence has zero probability under the model.
    pub const IMPOSSIBLE: i32 = 4;
    /// Verification found a discrepancy above tolerance.
    pub const MISMATCH: i32 = 5;
    /// The requested enumeration exceeds the budget.
    pub const BUDGET: i32 = 6;
}

#[derive(Debug, Parser)]
#[command(
    name = "crf-hmc",
    version,
    about = "Convert linear-chain CRFs to equivalent hidden Markov chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the HMC with the same posterior as a CRF model file.
    Convert(ConvertArgs),
    /// Posterior-marginal decoding of observation sequences, one per line.
    Decode(DecodeArgs),
    /// Check a CRF against its HMC by exhaustive enumeration.
    Verify(VerifyArgs),
    /// Write a random CRF model file.
    Random(RandomArgs),
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// CRF model file.
    model: PathBuf,
    /// Output file for the HMC (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write the intermediate psi/phi/beta tables here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// CRF or HMC model file.
    model: PathBuf,
    /// Observation sequences, whitespace-separated symbols, one per line.
    sequences: PathBuf,
    /// Print each position's posterior marginals after the labels.
    #[arg(long)]
    marginals: bool,
    /// Repeat a time-homogeneous model to each line's length.
    #[arg(long)]
    tile: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// CRF model file.
    model: PathBuf,
    /// HMC model file to check (default: convert the CRF).
    #[arg(long)]
    against: Option<PathBuf>,
    /// Maximum number of sequences enumerated per alphabet.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Check this many random observation sequences instead of all of them.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Generalized,
}

#[derive(Debug, Args)]
struct RandomArgs {
    /// Chain length.
    #[arg(long = "n", value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Number of hidden states.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    hidden: u64,
    /// Number of observation symbols.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    obs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "strict")]
    mode: ModeArg,
    /// Output file (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Potentials of `random` models lie in `[-RANDOM_MAGNITUDE, RANDOM_MAGNITUDE]`.
pub const RANDOM_MAGNITUDE: f64 = 5.0;
/// Fraction of `-inf` cells in generalized `random` models.
pub const RANDOM_ZERO_RATE: f64 = 0.1;

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: exit::INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: error_code(&e),
            message: e.to_string(),
        }
    }
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::DegenerateModel(_) => exit::DEGENERATE,
        Error::ImpossibleObservation => exit::IMPOSSIBLE,
        Error::BudgetExceeded { .. } => exit::BUDGET,
        _ => exit::INPUT,
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Convert(a) => convert(a, out),
        Command::Decode(a) => decode(a, out, err),
        Command::Verify(a) => verify(a, out),
        Command::Random(a) => random(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn read_text(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> std::result::Result<Model, Failure> {
    let text = read_text(path)?;
    ModelFile::parse(&text)
        .and_then(ModelFile::into_model)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_crf(path: &Path) -> std::result::Result<CrfModel, Failure> {
    match load_model(path)? {
        Model::Crf(m) => Ok(m),
        other => Err(Failure::input(format!(
            "{}: expected a crf model, found kind `{}`",
            path.display(),
            other.kind()
        ))),
    }
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input(format!("stdout: {e}"))),
    }
}

fn convert_model(crf: &CrfModel) -> crate::error::Result<(HmcModel, crate::equivalence::ConstructionTrace)> {
    match crf.mode() {
        Mode::Strict => crf_to_hmc(crf),
        Mode::Generalized => crf_to_hmc_generalized(crf),
    }
}

fn convert(args: ConvertArgs, out: &mut dyn Write) -> CmdResult {
    let crf = load_crf(&args.model)?;
    let (hmc, trace) = convert_model(&crf)?;
    emit(
        &ModelFile::from_hmc(&hmc, crf.mode()).to_json(),
        args.output.as_deref(),
        out,
    )?;
    if let Some(path) = args.trace.as_deref() {
        emit(&TraceFile::new(crf.hidden(), &trace).to_json(), Some(path), out)?;
    }
    Ok(exit::OK)
}

/// Returns the model to use for a sequence of length `len`.
fn fit_length(model: &Model, len: usize, tile: bool) -> crate::error::Result<Model> {
    if len == model.len() {
        return Ok(model.clone());
    }
    if !tile {
        return Err(Error::LengthMismatch {
            expected: model.len(),
            found: len,
        });
    }
    let (hidden, obs) = (model.hidden().clone(), model.obs().clone());
    let missing = || Error::LengthMismatch {
        expected: model.len(),
        found: len,
    };
    match model {
        Model::Crf(m) => {
            let v = m.pairwise().first().ok_or_else(missing)?.clone();
            CrfModel::tiled(hidden, obs, len, v, m.unary()[0].clone(), m.mode()).map(Model::Crf)
        }
        Model::Hmc(m) => {
            let t = m.trans().first().ok_or_else(missing)?.clone();
            HmcModel::tiled(hidden, obs, len, m.init().clone(), t, m.emit()[0].clone()).map(Model::Hmc)
        }
    }
}

fn decode_line(model: &Model, line: &str, marginals: bool, tile: bool) -> crate::error::Result<String> {
    let y: ObsSeq = parse_sequence(line, model.obs())?;
    if y.is_empty() {
        return Err(Error::LengthMismatch {
            expected: model.len(),
            found: 0,
        });
    }
    let fitted = fit_length(model, y.len(), tile)?;
    let post = match &fitted {
        Model::Crf(m) => m.posterior_marginals(&y)?,
        Model::Hmc(m) => m.posterior_marginals(&y)?,
    };
    let labels = post.decode().to_symbols(model.hidden())?.join(" ");
    if !marginals {
        return Ok(labels);
    }
    let rows: Vec<String> = (0..post.len())
        .map(|n| {
            post.probabilities(n)
                .iter()
                .map(|p| format!("{p:.6}"))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    Ok(format!("{labels}\t{}", rows.join("\t")))
}

fn decode(args: DecodeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let model = load_model(&args.model)?;
    if args.tile {
        let homogeneous = match &model {
            Model::Crf(m) => m.is_homogeneous(),
            Model::Hmc(m) => m.is_homogeneous(),
        };
        if !homogeneous {
            return Err(Failure::input("--tile requires a time-homogeneous model"));
        }
    }
    let text = read_text(&args.sequences)?;
    let lines: Vec<&str> = text.lines().collect();
    let results = Exec::default().map_range(lines.len(), |i| {
        decode_line(&model, lines[i], args.marginals, args.tile)
    });
    let mut code = exit::OK;
    for (i, result) in results.into_iter().enumerate() {
        let written = match result {
            Ok(line) => writeln!(out, "{line}"),
            Err(e) => {
                if code == exit::OK {
                    // A CRF line with no admissible labeling is the same
                    // condition as an impossible observation under an HMC.
                    code = match e {
                        Error::DegenerateModel(_) => exit::IMPOSSIBLE,
                        _ => error_code(&e),
                    };
                }
                let _ = writeln!(err, "line {}: {e}", i + 1);
                writeln!(out)
            }
        };
        written.map_err(|e| Failure::input(format!("stdout: {e}")))?;
    }
    Ok(code)
}

fn format_report(r: &VerifyReport) -> String {
    let mut s = String::new();
    let scope = if r.sampled { "sampled" } else { "exhaustive" };
    s += &format!("observations checked: {} ({scope})\n", r.observations_checked);
    s += &format!("zero-evidence observations: {}\n", r.zero_evidence);
    s += &format!("max marginal discrepancy: {:e}\n", r.max_marginal_discrepancy);
    match r.max_sequence_discrepancy {
        Some(d) => s += &format!("max sequence discrepancy: {d:e}\n"),
        None => s += "max sequence discrepancy: not computed (over budget)\n",
    }
    if let Some(y) = &r.worst_observation {
        s += &format!("worst observation: {}\n", y.join(" "));
    }
    if let Some(n) = r.worst_position {
        s += &format!("worst position: {}\n", n + 1);
    }
    if let Some(x) = &r.worst_sequence {
        s += &format!("worst sequence: {}\n", x.join(" "));
    }
    s += &format!("tolerance: {:e}\n", r.tolerance);
    s += &format!("result: {}\n", if r.passed { "PASS" } else { "FAIL" });
    s
}

fn verify(args: VerifyArgs, out: &mut dyn Write) -> CmdResult {
    if !(args.tolerance.is_finite() && args.tolerance >= 0.0) {
        return Err(Failure::input("--tolerance must be a nonnegative number"));
    }
    let crf = load_crf(&args.model)?;
    let hmc = match args.against.as_deref() {
        Some(path) => match load_model(path)? {
            Model::Hmc(m) => m,
            other => {
                return Err(Failure::input(format!(
                    "{}: expected an hmc model, found kind `{}`",
                    path.display(),
                    other.kind()
                )))
            }
        },
        None => convert_model(&crf)?.0,
    };
    let config = VerifyConfig {
        budget: args.budget,
        tolerance: args.tolerance,
        samples: args.samples,
        seed: args.seed,
        exec: Exec::default(),
    };
    let report = verify_equivalence(&crf, &hmc, &config)?;
    emit(&format_report(&report), None, out)?;
    if let Some(path) = args.json.as_deref() {
        let mut json = serde_json::to_string_pretty(&report).expect("reports always serialize");
        json.push('\n');
        emit(&json, Some(path), out)?;
    }
    Ok(if report.passed { exit::OK } else { exit::MISMATCH })
}

fn random(args: RandomArgs, out: &mut dyn Write) -> CmdResult {
    let hidden = Alphabet::numbered("h", args.hidden as usize)?;
    let obs = Alphabet::numbered("o", args.obs as usize)?;
    let zero_rate = match args.mode {
        ModeArg::Strict => 0.0,
        ModeArg::Generalized => RANDOM_ZERO_RATE,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let crf = CrfModel::random(&mut rng, hidden, obs, args.n as usize, RANDOM_MAGNITUDE, zero_rate)?;
    emit(&ModelFile::from_crf(&crf).to_json(), args.output.as_deref(), out)?;
    Ok(exit::OK)
}
