use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pseudoroll_cli::{run, Command, Options, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "pseudoroll", version, about = "Rolling of pseudo-Riemannian hyperquadrics: simulate, verify, classify")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Tolerance for pass/fail checks; overrides the scenario.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Time step; overrides the scenario.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Points per axis for `partition`.
    #[arg(long, global = true)]
    grid: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Integrate the kinematic equations and write the trajectory.
    Roll,
    /// Check the six rolling conditions and the causal identities.
    Verify,
    /// Parallel transport of a vector by rolling.
    Transport,
    /// Geodesic reachability of one target point.
    Reach,
    /// Label a grid on S^2_1 by reachability from x0.
    Partition,
    /// Parallel frames along both curves and the freedom dimension.
    Frames,
    /// Configuration matrices A and B.
    ConfigMatrices,
    /// Horizontality and causal trace of a trivialized curve.
    LiftCheck,
    /// Built-in sanity cases.
    Selftest,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Roll => Command::Roll,
            Sub::Verify => Command::Verify,
            Sub::Transport => Command::Transport,
            Sub::Reach => Command::Reach,
            Sub::Partition => Command::Partition,
            Sub::Frames => Command::Frames,
            Sub::ConfigMatrices => Command::ConfigMatrices,
            Sub::LiftCheck => Command::LiftCheck,
            Sub::Selftest => Command::Selftest,
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("PSEUDOROLL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("PSEUDOROLL_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("input error: {msg}");
        return ExitCode::from(EXIT_INPUT as u8);
    }
    let opts = Options { scenario: cli.scenario, out: cli.out, tol: cli.tol, step: cli.step, grid: cli.grid };
    match run(cli.command.into(), &opts) {
        Ok(outcome) => {
            for line in &outcome.summary {
                if outcome.passed {
                    println!("{line}");
                } else {
                    eprintln!("{line}");
                }
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
