use std::path::PathBuf;
use std::process::ExitCode;

use chemostat::commands::{exit_code, parse_grid, run, Command, Options};
use clap::{Parser, Subcommand};

#[derive(clap::Args)]
struct Common {
    /// Scenario JSON file
    #[arg(long)]
    scenario: PathBuf,
    /// Migration time scale eps
    #[arg(long)]
    epsilon: Option<f64>,
    /// Geometric eps grid as base,factor,count
    #[arg(long)]
    grid: Option<String>,
    /// Final time
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Initial data as inline JSON or a file path
    #[arg(long)]
    initial: Option<String>,
    /// Aggregated equilibrium to continue (0 = washout)
    #[arg(long = "seed-index")]
    seed_index: Option<usize>,
    /// exp_imex or implicit
    #[arg(long)]
    scheme: Option<String>,
}

#[derive(Parser)]
#[command(
    version,
    about = "Chemostat competition in heterogeneous space with fast migration"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Averaged model, break-even table, equilibria and strength decomposition
    Aggregate(Common),
    /// Integrate the full system and write a trajectory CSV
    Simulate(Common),
    /// Continue averaged equilibria to steady states and report their stability
    Steady(Common),
    /// Steady-state error against the averaged equilibrium over an eps grid
    Sweep(Common),
    /// Simulated survivors over an eps grid
    Cep(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Aggregate(c) => (Command::Aggregate, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Steady(c) => (Command::Steady, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Cep(c) => (Command::Cep, c),
    };
    let result = common
        .grid
        .as_deref()
        .map(parse_grid)
        .transpose()
        .and_then(|grid| {
            let opts = Options {
                scenario: common.scenario,
                epsilon: common.epsilon,
                grid,
                t_end: common.t_end,
                out: common.out,
                initial: common.initial,
                seed_index: common.seed_index,
                scheme: common.scheme,
            };
            run(cmd, &opts, &mut std::io::stdout().lock())
        });
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&result) as u8)
}
