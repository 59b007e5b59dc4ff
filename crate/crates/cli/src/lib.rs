//! Command-line front end for `qprob`.
//!
//! Every subcommand produces a [`RunReport`]: named verdicts, a details
//! record and some human-readable notes. The process exits with 0 when all
//! verdicts pass, 2 when a mathematical verdict fails and 3 on bad input.

mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use serde::Serialize;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "qprob", version, about = "Finite-dimensional quantum probability experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Seed for generated fixtures (overridden by QPROB_SEED).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Per-block residual threshold of the conditional expectation solver.
    #[arg(long = "tol.solver", global = true, default_value_t = 1e-9)]
    pub tol_solver: f64,

    /// Gamma-equivalence threshold (scaled by the variable's size).
    #[arg(long = "tol.gamma", global = true, default_value_t = 1e-9)]
    pub tol_gamma: f64,

    /// Threshold for the mean-zero statements.
    #[arg(long = "tol.zero", global = true, default_value_t = 1e-9)]
    pub tol_zero: f64,

    /// Convergence threshold for limits and series.
    #[arg(long = "tol.converge", global = true, default_value_t = 1e-8)]
    pub tol_converge: f64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Write the report (or, for `generate`, the fixture) to this file.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and validate input files.
    Validate {
        /// A POVM, variable or matrix file (detected from its fields).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        povm: Option<PathBuf>,
        #[arg(long)]
        qrv: Option<PathBuf>,
        #[arg(long)]
        filtration: Option<PathBuf>,
    },
    /// Quantum expectation, checked against its density form.
    Expectation(FixtureArgs),
    /// Classify the mean-zero statements.
    Meanzero {
        #[arg(long, value_enum)]
        fixtures: Option<FixtureSet>,
        #[command(flatten)]
        fixture: FixtureArgs,
    },
    /// Conditional expectation on a partition.
    Condexp {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[arg(long)]
        partition: Option<PathBuf>,
    },
    /// Tower property for nested partitions.
    Tower {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[arg(long)]
        coarse: Option<PathBuf>,
        #[arg(long)]
        fine: Option<PathBuf>,
    },
    /// Quantum martingales.
    Martingale {
        #[command(subcommand)]
        action: MartingaleAction,
    },
    /// Continuity of expectation along psi + eta / n.
    Dct {
        #[command(flatten)]
        fixture: FixtureArgs,
        /// Number of terms in the sequence.
        #[arg(long, default_value_t = 10_000)]
        terms: usize,
    },
    /// Effect series resummation to the identity.
    Series {
        #[command(flatten)]
        fixture: FixtureArgs,
        /// Smallest eigenvalue of generated effects.
        #[arg(long = "lambda-min", default_value_t = 0.05)]
        lambda_min: f64,
    },
    /// Write a seeded random fixture.
    Generate {
        #[arg(long, value_enum)]
        kind: GenerateKind,
        #[command(flatten)]
        fixture: FixtureArgs,
    },
}

#[derive(Subcommand, Debug)]
pub enum MartingaleAction {
    /// Condition on every stage, take the limit and classify it.
    Run {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[arg(long)]
        filtration: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FixtureSet {
    /// The built-in counterexamples.
    #[value(name = "paper")]
    Counterexamples,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenerateKind {
    Povm,
    PositiveQrv,
    EffectQrv,
    RefiningFiltration,
}

/// Where fixtures come from: files, or generated from the seed.
#[derive(Args, Debug, Clone)]
pub struct FixtureArgs {
    #[arg(long)]
    pub povm: Option<PathBuf>,
    #[arg(long)]
    pub qrv: Option<PathBuf>,
    /// Hilbert space dimension of generated fixtures.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Number of sample points of generated fixtures.
    #[arg(long, default_value_t = 4)]
    pub atoms: usize,
    /// Number of stages of generated filtrations.
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    /// Rank of each generated effect (full rank when omitted).
    #[arg(long)]
    pub rank: Option<usize>,
    /// Multiple of the identity added to generated positive variables.
    #[arg(long, default_value_t = 2.0)]
    pub shift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub tolerances: IndexMap<String, f64>,
    pub verdicts: IndexMap<String, bool>,
    pub passed: bool,
    pub notes: Vec<String>,
    pub details: serde_json::Value,
    pub wall_clock_ms: f64,
}

impl RunReport {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Machine => serde_json::to_string_pretty(self).expect("report serializes") + "\n",
            Format::Text => {
                let mut out = format!(
                    "qprob {} {} (seed {})\n",
                    self.version, self.command, self.seed
                );
                for note in &self.notes {
                    out.push_str(&format!("  {note}\n"));
                }
                for (name, ok) in &self.verdicts {
                    out.push_str(&format!("  [{}] {name}\n", if *ok { "pass" } else { "FAIL" }));
                }
                out.push_str(&format!(
                    "{} ({:.1} ms)\n",
                    if self.passed { "PASS" } else { "FAIL" },
                    self.wall_clock_ms
                ));
                out
            }
        }
    }
}

/// Problems with the invocation or its input files.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<qprob::Error> for InputError {
    fn from(e: qprob::Error) -> Self {
        InputError(e.to_string())
    }
}

/// What a finished invocation produced.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub report: Option<RunReport>,
}

/// Parses `args` (program name first) and runs the command. `env_seed` is
/// the value of `QPROB_SEED`, which takes precedence over `--seed`.
pub fn run_cli<I, T>(args: I, env_seed: Option<&str>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let text = e.render().to_string();
            let (stdout, stderr) = if e.use_stderr() { (String::new(), text) } else { (text, String::new()) };
            return Outcome { code, stdout, stderr, report: None };
        }
    };
    if let Some(raw) = env_seed {
        match raw.trim().parse::<u64>() {
            Ok(seed) => cli.seed = seed,
            Err(_) => return input_failure(format!("QPROB_SEED is not an unsigned integer: `{raw}`")),
        }
    }
    match run(&cli) {
        Ok(report) => {
            let rendered = report.render(cli.format);
            let code = if report.passed { EXIT_PASS } else { EXIT_VERDICT };
            let is_generate = matches!(cli.command, Command::Generate { .. });
            if let (Some(path), false) = (&cli.output, is_generate) {
                if let Err(e) = write_atomic(path, rendered.as_bytes()) {
                    return input_failure(e.0);
                }
            }
            Outcome {
                code,
                stdout: rendered,
                stderr: String::new(),
                report: Some(report),
            }
        }
        Err(e) => input_failure(e.0),
    }
}

fn input_failure(msg: String) -> Outcome {
    Outcome {
        code: EXIT_INPUT,
        stdout: String::new(),
        stderr: format!("error: {msg}\n"),
        report: None,
    }
}

/// Runs a parsed invocation.
pub fn run(cli: &Cli) -> Result<RunReport, InputError> {
    for (name, v) in [
        ("tol.solver", cli.tol_solver),
        ("tol.gamma", cli.tol_gamma),
        ("tol.zero", cli.tol_zero),
        ("tol.converge", cli.tol_converge),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(InputError(format!("{name} must be positive, got {v}")));
        }
    }
    let start = Instant::now();
    let out = commands::dispatch(cli)?;
    let passed = out.verdicts.values().all(|&v| v);
    Ok(RunReport {
        command: out.command,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cli.seed,
        tolerances: [
            ("solver", cli.tol_solver),
            ("gamma", cli.tol_gamma),
            ("zero", cli.tol_zero),
            ("converge", cli.tol_converge),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect(),
        verdicts: out.verdicts,
        passed,
        notes: out.notes,
        details: out.details,
        wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), InputError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let fail = |e: std::io::Error| InputError(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}
