use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

mod commands;
mod input;

pub const SCHEMA: u8 = 2;
pub const NOT_MINIMAL: u8 = 3;
pub const SOLVER: u8 = 4;
pub const SPECTRAL_I: u8 = 5;
pub const VERIFY_FAIL: u8 = 6;
pub const INCONCLUSIVE: u8 = 7;

#[derive(Parser)]
#[command(
    name = "skewdirac",
    version,
    about = "Explicit inverse problems for skew-selfadjoint Dirac systems"
)]
struct Cli {
    /// Directory for the outputs and manifest.json.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover the continuous potential v(x) from a realization or quadruple.
    InvertContinuous(InvertContinuous),
    /// Recover the discrete coefficients C_k from a realization or quadruple.
    InvertDiscrete(InvertDiscrete),
    /// Weyl defect check of a recovered potential against φ.
    Verify(Verify),
    /// Perturbation sweep from a sweep configuration.
    Stability(Stability),
    /// Run every case of an example corpus.
    Corpus(CorpusArgs),
}

#[derive(Args, Serialize)]
pub struct InvertContinuous {
    pub input: PathBuf,
    /// Evaluation grid `a:b:N`; default `0:10/min Im σ(α):400`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Pass a non-minimal realization through its minimal part.
    #[arg(long)]
    pub reduce: bool,
}

#[derive(Args, Serialize)]
pub struct InvertDiscrete {
    pub input: PathBuf,
    /// Number of coefficients; default max(5n + 20, 50).
    #[arg(long = "K", alias = "k")]
    pub k: Option<usize>,
    /// Minimal part of a realization, or full reduction of a quadruple.
    #[arg(long)]
    pub reduce: bool,
}

#[derive(Args, Serialize)]
pub struct Verify {
    /// Realization giving φ (or a quadruple, whose own Weyl function is used).
    pub input: PathBuf,
    /// Quadruple JSON for the potential; recovered from the input if absent.
    #[arg(long)]
    pub potential: Option<PathBuf>,
    /// Comma-separated points such as `2i,3i,0.5+4i`.
    #[arg(long, value_delimiter = ',', default_value = "2i,3i,4i")]
    pub z: Vec<String>,
    /// Add this to entry (0, 0) of φ before checking.
    #[arg(long)]
    pub corrupt: Option<f64>,
    /// Discrete horizon; default chosen per z.
    #[arg(long = "K", alias = "k")]
    pub k: Option<usize>,
    /// Continuous integration length; default 6/Im z.
    #[arg(long)]
    pub length: Option<f64>,
    /// Continuous step.
    #[arg(long, default_value_t = skewdirac::verify::DEFAULT_STEP)]
    pub step: f64,
    /// Convention for a quadruple input without a `mode` field.
    #[arg(long, value_parser = ["continuous", "discrete"])]
    pub mode: Option<String>,
    #[arg(long)]
    pub reduce: bool,
}

#[derive(Args, Serialize)]
pub struct Stability {
    pub config: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Overrides SEED and the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Serialize)]
pub struct CorpusArgs {
    #[arg(default_value = "corpus")]
    pub dir: PathBuf,
}

/// Nonzero exit with a message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    /// Partial results kept in the manifest.
    pub summary: Value,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            summary: Value::Null,
        }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Self::new(SCHEMA, message)
    }
}

/// Files to write plus a summary for the manifest.
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub summary: Value,
    /// 0, or 6/7 for verdicts (files are then dropped).
    pub code: u8,
}

/// Values recorded in the manifest while a command runs.
#[derive(Default)]
pub struct Context {
    pub inputs: Vec<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    inputs: Vec<PathBuf>,
    parameters: Value,
    seed: Option<u64>,
    tool_version: &'static str,
    wall_time_s: f64,
    exit_code: u8,
    outputs: Vec<String>,
    error: Option<String>,
    summary: Value,
}

fn dispatch(cmd: &Command, ctx: &mut Context) -> (&'static str, Value, Result<Outcome, Failure>) {
    match cmd {
        Command::InvertContinuous(a) => ("invert-continuous", params(a), commands::invert_continuous(a, ctx)),
        Command::InvertDiscrete(a) => ("invert-discrete", params(a), commands::invert_discrete(a, ctx)),
        Command::Verify(a) => ("verify", params(a), commands::verify(a, ctx)),
        Command::Stability(a) => ("stability", params(a), commands::stability(a, ctx)),
        Command::Corpus(a) => ("corpus", params(a), commands::corpus(a, ctx)),
    }
}

fn params<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).unwrap_or_default()
}

fn write_all(dir: &Path, files: &[(String, String)], manifest: &RunManifest) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in files {
        std::fs::write(dir.join(name), text)?;
    }
    let text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("manifest.json"), text + "\n")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { SCHEMA } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let mut ctx = Context::default();
    let (command, parameters, result) = dispatch(&cli.command, &mut ctx);
    let (code, files, summary, error) = match result {
        Ok(o) if o.code == 0 => (0, o.files, o.summary, None),
        Ok(o) => (o.code, Vec::new(), o.summary, None),
        Err(f) => (f.code, Vec::new(), f.summary, Some(f.message)),
    };
    let manifest = RunManifest {
        command,
        inputs: ctx.inputs,
        parameters,
        seed: ctx.seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
        exit_code: code,
        outputs: files.iter().map(|(n, _)| n.clone()).collect(),
        error: error.clone(),
        summary,
    };
    if let Some(e) = &error {
        eprintln!("error: {e}");
    }
    if let Err(e) = write_all(&cli.out_dir, &files, &manifest) {
        eprintln!("error: cannot write to {}: {e}", cli.out_dir.display());
        return ExitCode::from(if code == 0 { SOLVER } else { code });
    }
    ExitCode::from(code)
}
