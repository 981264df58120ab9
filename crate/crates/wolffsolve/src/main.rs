use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wolffsolve::cli::{self, Command, MeasureSource, OutputFormat, StudySpec};

/// Wolff/Riesz potential evaluation, sublinear fixed-point solves and
/// condition studies over computable measures.
#[derive(Parser)]
#[command(name = "wolffsolve", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate Wolff and Riesz potentials on log-spaced radial probes
    Eval(CommonArgs),
    /// Solve u = W_{a,p}(u^q dsigma) + r and write the solution field
    Solve(CommonArgs),
    /// Radial model-kernel solve with the envelope and ratio columns
    RadialStudy(CommonArgs),
    /// Run the condition checks and report verdicts (exit 2 on any "fails")
    CheckConditions(CommonArgs),
    /// Generate the log-perturbed counterexample measure and run its study
    Counterexample(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Measure: JSON file path or builtin {counterexample, powerlaw, lebesgue, atom, zero}
    #[arg(long, default_value = "powerlaw")]
    measure: String,

    /// Ambient dimension
    #[arg(long, default_value_t = 3)]
    n: usize,

    /// Smoothness parameter alpha (mutually exclusive with --two-alpha)
    #[arg(long)]
    alpha: Option<f64>,

    /// Fractional order 2*alpha (mutually exclusive with --alpha)
    #[arg(long = "two-alpha")]
    two_alpha: Option<f64>,

    /// Nonlinearity exponent p of the Wolff potential
    #[arg(long, default_value_t = 2.0)]
    p: f64,

    /// Sublinear exponent q in (0, p-1)
    #[arg(long, default_value_t = 0.5)]
    q: f64,

    /// Boundary value r >= 0
    #[arg(long, default_value_t = 0.0)]
    r: f64,

    /// Power exponent (powerlaw builtin) / energy-condition exponent
    #[arg(long)]
    s: Option<f64>,

    /// Log exponent of the counterexample builtin (must exceed 1)
    #[arg(long)]
    beta: Option<f64>,

    /// Collocation nodes per decade
    #[arg(long = "grid-per-decade", default_value_t = 48)]
    grid_per_decade: usize,

    /// Iteration stopping tolerance (relative sup-norm change)
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,

    /// Iteration guard
    #[arg(long = "max-iter", default_value_t = 500)]
    max_iter: usize,

    /// Number of evaluation probes
    #[arg(long, default_value_t = 16)]
    probes: usize,

    /// Seed for probe jitter; fixed seed gives byte-identical outputs
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format: csv or json
    #[arg(long, default_value = "csv")]
    format: String,
}

fn to_spec(command: Command, a: CommonArgs) -> Result<StudySpec, String> {
    let format = match a.format.as_str() {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        other => return Err(format!("unknown format {other:?}; expected csv or json")),
    };
    let measure = if a.measure.ends_with(".json") || a.measure.contains('/') {
        MeasureSource::Path(PathBuf::from(&a.measure))
    } else {
        MeasureSource::Builtin(a.measure.clone())
    };
    Ok(StudySpec {
        command,
        measure,
        n: a.n,
        alpha: a.alpha,
        two_alpha: a.two_alpha,
        p: a.p,
        q: a.q,
        r: a.r,
        s: a.s,
        beta: a.beta,
        grid_per_decade: a.grid_per_decade,
        tol: a.tol,
        max_iter: a.max_iter,
        probes: a.probes,
        seed: a.seed,
        out: a.out,
        format,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let spec = match cli.command {
        Cmd::Eval(a) => to_spec(Command::Eval, a),
        Cmd::Solve(a) => to_spec(Command::Solve, a),
        Cmd::RadialStudy(a) => to_spec(Command::RadialStudy, a),
        Cmd::CheckConditions(a) => to_spec(Command::CheckConditions, a),
        Cmd::Counterexample(a) => {
            // the counterexample study always builds its measure from the flags
            to_spec(Command::Counterexample, a).map(|mut s| {
                s.measure = MeasureSource::Builtin("counterexample".to_string());
                s
            })
        }
    };
    let spec = match spec {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(cli::EXIT_INPUT_ERROR as u8);
        }
    };
    match cli::run(&spec) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::EXIT_INPUT_ERROR as u8)
        }
    }
}
