//! `gmoi`: command-line front end for the gmoi-core library.
//!
//! Inputs are JSON files (matrices, functions, fixtures, decompositions);
//! results go to stdout as JSON (`--json`) or as a plain-text summary.
//! Exit status: 0 on success, 2 on invalid input or a failed verification,
//! 3 when the term budget is exceeded.

mod commands;
mod input;
mod render;
mod selftest;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmoi_core::derivative::DEFAULT_XSTEP;
use gmoi_core::gmoi::BUDGET_ENV;
use gmoi_core::{GmoiError, DEFAULT_TOL};

#[derive(Debug, Parser)]
#[command(name = "gmoi", version, about = "Generalized multiple operator integrals of finite matrices")]
struct Cli {
    #[command(flatten)]
    config: Config,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Config {
    /// Working tolerance of float-mode decompositions and checks.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Use exact complex-rational arithmetic instead of complex floats.
    #[arg(long, global = true)]
    pub exact: bool,
    /// Maximum number of enumerated terms per evaluation.
    #[arg(long, global = true, env = BUDGET_ENV)]
    pub budget: Option<u64>,
    /// Emit machine-readable JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Include per-term matrices in the report.
    #[arg(long, global = true)]
    pub dump_terms: bool,
}

/// Parameters, arguments and symbol of a GMOI problem.
#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Symbol β (function JSON) of arity ζ + 1.
    #[arg(long)]
    pub function: PathBuf,
    /// Parameter matrix X_j (matrix, fixture or decomposition JSON); repeat ζ + 1 times.
    #[arg(long = "param", required = true)]
    pub params: Vec<PathBuf>,
    /// Argument matrix Y_i (matrix JSON); repeat ζ times.
    #[arg(long = "arg")]
    pub args: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Derived,
    Displayed,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Jordan-spectral decomposition of a matrix.
    Decompose {
        /// Matrix or fixture JSON.
        #[arg(long)]
        matrix: PathBuf,
        /// Prescribed structure: JSON with `transform` and `blocks`.
        #[arg(long)]
        structure: Option<PathBuf>,
    },
    /// Matrix function f(X) (or f(X₁, …, X_r) for a multivariate f).
    Funcmat {
        #[arg(long)]
        function: PathBuf,
        /// Matrix, fixture or decomposition JSON; repeat once per argument of f.
        #[arg(long = "matrix", required = true)]
        matrices: Vec<PathBuf>,
        /// Compare a univariate polynomial against Horner evaluation.
        #[arg(long)]
        verify: bool,
    },
    /// Evaluates a GMOI T_β^{X₁…X_{ζ+1}}(Y₁…Y_ζ).
    Gmoi {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Evaluate the classical MOI (all parameters must be diagonalizable).
        #[arg(long)]
        classical: bool,
    },
    /// Upper and lower Frobenius-norm estimates of a GMOI.
    Bounds {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Lipschitz estimate for T(Y) − T(Y′).
    Lipschitz {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Second argument set Y′ (matrix JSON); repeat ζ times.
        #[arg(long = "arg-prime", required = true)]
        args_prime: Vec<PathBuf>,
    },
    /// Checks the perturbation formula with C, D inserted before slot j.
    VerifyPerturbation {
        /// Univariate function β (lifted internally).
        #[arg(long)]
        function: PathBuf,
        #[arg(long)]
        c: PathBuf,
        #[arg(long)]
        d: PathBuf,
        /// Outer parameters X₁ … X_ζ; repeat ζ times.
        #[arg(long = "param", required = true)]
        params: Vec<PathBuf>,
        /// Arguments Y₁ … Y_ζ; repeat ζ times.
        #[arg(long = "arg", required = true)]
        args: Vec<PathBuf>,
        /// One-based slot j (1 ≤ j ≤ ζ + 1) before which C, D are inserted.
        #[arg(long, default_value_t = 1)]
        slot: usize,
        /// Closed forms of the correction terms.
        #[arg(long, value_enum, default_value_t = FormArg::Derived)]
        form: FormArg,
    },
    /// Residuals ‖T(X + t_ℓ E) − T(X)‖ for t_ℓ = 2^{−ℓ}.
    Continuity {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Direction E_j per parameter (matrix JSON); repeat ζ + 1 times.
        #[arg(long = "direction", required = true)]
        directions: Vec<PathBuf>,
        /// Number of dyadic steps.
        #[arg(long, default_value_t = 12)]
        steps: usize,
    },
    /// n-th derivative dⁿ/dtⁿ f(X + tY) at t = 0 from the GMOI expansion.
    Derivative {
        #[arg(long)]
        function: PathBuf,
        /// Matrix, fixture or decomposition JSON for X.
        #[arg(long)]
        x: PathBuf,
        /// Direction Y (matrix JSON).
        #[arg(long)]
        y: PathBuf,
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// Step of the central differences applied to correction terms.
        #[arg(long, default_value_t = DEFAULT_XSTEP)]
        xstep: f64,
        /// Add the motion of nilpotent slots (exact for Jordan blocks of any size).
        #[arg(long)]
        nilpotent_motion: bool,
        /// Report the residual against an independent oracle.
        #[arg(long)]
        verify: bool,
    },
    /// Generates a fixture X = V J V⁻¹ with a prescribed Jordan structure.
    GenFixture {
        /// Block list, e.g. '[{"eigenvalue":1,"size":2}]' (JSON text).
        #[arg(long, conflicts_with = "spec")]
        blocks: Option<String>,
        /// File with `{"blocks": […], "unitary"?: bool}`.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw a unitary transform.
        #[arg(long)]
        unitary: bool,
        /// Write the fixture here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the full ground-truth decomposition.
        #[arg(long)]
        decomposition_out: Option<PathBuf>,
    },
    /// Runs a compact invariant suite on generated fixtures.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// A command ran to completion but its check failed.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "check failed: {}", self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<GmoiError>()) {
        Some(GmoiError::BudgetExceeded { .. }) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("gmoi: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let config = &cli.config;
    if !(config.tol > 0.0 && config.tol.is_finite()) {
        return Err(GmoiError::InvalidInput(format!("--tol must be positive (got {})", config.tol)).into());
    }
    if config.budget == Some(0) {
        return Err(GmoiError::InvalidInput("--budget must be at least 1".into()).into());
    }
    let outcome = if config.exact {
        commands::execute::<gmoi_core::CQ>(&cli.command, config)
    } else {
        commands::execute::<gmoi_core::C64>(&cli.command, config)
    }?;
    let text = if config.json || outcome.raw {
        serde_json::to_string_pretty(&outcome.report)? + "\n"
    } else {
        render::text(&outcome.report)
    };
    // A closed pipe (`gmoi … | head`) is not an error worth reporting.
    if let Err(e) = std::io::stdout().lock().write_all(text.as_bytes()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            return Err(e.into());
        }
    }
    match outcome.failure {
        Some(reason) => Err(CheckFailed(reason).into()),
        None => Ok(()),
    }
}
