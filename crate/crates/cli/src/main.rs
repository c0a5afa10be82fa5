//! Batch runner for the `moreau_w2` library.
//!
//! Every subcommand writes one CSV with a fixed header to `--out`, side
//! files next to it for per-atom data, and `<out>.meta.json` with the
//! inputs, tolerances and timing. Exit codes: 0 success, 1 invalid input,
//! 2 solver did not converge, 3 I/O failure. Failures print a JSON object
//! on standard error.

mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use moreau_w2::Error;

#[derive(Parser, Debug)]
#[command(name = "moreau-w2", version, about = "Sup-convolution of W2^2 on particle measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Squared Wasserstein distance and optimal plan between two measures.
    W2(Common),
    /// Gradient field of W2^2(., b) at a and the norm identity.
    Grad(Common),
    /// Envelope value, maximizer and gradient at one delta.
    Envelope(EnvelopeArgs),
    /// Sandwich bounds W2^2 <= value <= W2^2/(1-delta) over a delta list.
    BoundsCheck(SweepArgs),
    /// Equality regime on sampled Gaussians.
    EqualitySweep(SweepArgs),
    /// Envelope gradients at perturbed clouds against the gradient at a.
    GradConverge(ConvergeArgs),
    /// Entropy, Fisher information and displacement convexity of a Gaussian.
    Functionals(FunctionalArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Source cloud CSV (`x0,...` or `x0,...,w`).
    #[arg(long)]
    pub a: Option<PathBuf>,
    /// Target cloud CSV.
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Source Gaussian, inline JSON or a path to a JSON file.
    #[arg(long)]
    pub gauss_a: Option<String>,
    /// Target Gaussian, inline JSON or a path to a JSON file.
    #[arg(long)]
    pub gauss_b: Option<String>,
    /// Atoms drawn from each Gaussian.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Main CSV output; defaults to `<subcommand>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write `<out>.svg`.
    #[arg(long)]
    pub emit_svg: bool,
}

#[derive(Args, Debug, Clone)]
pub struct EnvelopeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub delta: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    /// Single delta, added to `--deltas`.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Perturbation radius is `radius_scale * delta^radius_power`.
    #[arg(long, default_value_t = 2.0)]
    pub radius_power: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius_scale: f64,
}

#[derive(Args, Debug, Clone)]
pub struct FunctionalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Affine map `{"matrix":..,"shift":..}`, inline JSON or a path.
    #[arg(long)]
    pub map: Option<String>,
    /// Grid half-width; defaults to 0.45/||A||.
    #[arg(long)]
    pub h_max: Option<f64>,
    #[arg(long, default_value_t = 11)]
    pub h_count: usize,
}

/// Failure of a run, tagged with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self { code: 1, kind: "InvalidInput", message: message.into() }
    }

    pub fn not_converged(message: impl Into<String>) -> Self {
        Self { code: 2, kind: "NoConvergence", message: message.into() }
    }

    fn emit(&self) -> ExitCode {
        let body = serde_json::json!({
            "error": self.kind,
            "message": self.message,
            "exit_code": self.code,
        });
        eprintln!("{body}");
        ExitCode::from(self.code)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Io(_) => (3, "Io"),
            Error::NoConvergence(_) => (2, "NoConvergence"),
            Error::SolverStall { .. } => (2, "SolverStall"),
            Error::EmptyInput => (1, "EmptyInput"),
            Error::NonFiniteEntry { .. } => (1, "NonFiniteEntry"),
            Error::DimensionMismatch { .. } => (1, "DimensionMismatch"),
            Error::SizeMismatch { .. } => (1, "SizeMismatch"),
            Error::InvalidWeights(_) => (1, "InvalidWeights"),
            Error::NonSpd { .. } => (1, "NonSPD"),
            Error::NonMonotoneMap(_) => (1, "NonMonotoneMap"),
            Error::TooLarge { .. } => (1, "TooLarge"),
            Error::BadDelta(_) => (1, "BadDelta"),
            Error::Degenerate(_) => (1, "Degenerate"),
            Error::GridOutOfBand { .. } => (1, "GridOutOfBand"),
            Error::InvalidGrid(_) => (1, "InvalidGrid"),
            Error::InvalidArgument(_) => (1, "InvalidArgument"),
            Error::Inconsistent(_) => (1, "Inconsistent"),
            Error::Parse(_) => (1, "Parse"),
        };
        Self { code, kind, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: 3, kind: "Io", message: e.to_string() }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("MOREAU_W2_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::invalid(format!("MOREAU_W2_THREADS must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Failure::invalid(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::W2(c) => commands::w2(&c),
        Command::Grad(c) => commands::grad(&c),
        Command::Envelope(a) => commands::envelope(&a),
        Command::BoundsCheck(a) => commands::bounds_check(&a),
        Command::EqualitySweep(a) => commands::equality_sweep(&a),
        Command::GradConverge(a) => commands::grad_converge(&a),
        Command::Functionals(a) => commands::functionals(&a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            return Failure::invalid(message.trim_end()).emit();
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.emit(),
    }
}
