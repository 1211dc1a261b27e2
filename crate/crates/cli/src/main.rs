use std::path::PathBuf;
use std::process::ExitCode;

use branchlevy::{registry, run, Command, RunOptions};
use clap::{Args, Parser, Subcommand};

/// Criteria and Monte Carlo verification for branching Lévy processes.
#[derive(Parser)]
#[command(name = "branchlevy", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Admissibility, UI verdict and L^p clauses.
    Criteria(Common),
    /// Simulate the particle system; writes trajectory.csv.
    Simulate(Common),
    /// Simulate the spine; writes spine.csv.
    Spine(Common),
    /// Run every experiment of the scenario; exit 1 on a mismatch.
    Verify(Common),
    /// The L^p checker plus Monte Carlo moments of W_t.
    Lp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
    },
    /// List the built-in scenarios.
    List,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or the name of a built-in scenario.
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    truncation: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Also report the numerical tolerances behind every number.
    #[arg(long)]
    tolerance_report: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Criteria(c) => (Command::Criteria, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Spine(c) => (Command::Spine, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Lp { common, p, q } => (Command::Lp { p, q }, common),
        Cmd::List => {
            for name in registry::names() {
                println!("{name}");
            }
            return ExitCode::SUCCESS;
        }
    };
    let opts = RunOptions {
        seed: common.seed,
        replicas: common.replicas,
        truncation: common.truncation,
        out: common.out,
        jobs: common.jobs,
        tolerance_report: common.tolerance_report,
    };
    let result = registry::load(&common.scenario).and_then(|s| run(command, &s, &opts));
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for l in &outcome.lines {
                println!("{l}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
