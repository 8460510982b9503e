use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSub};

use towpde::config::{run, Overrides, RunConfig, Subcommand};

#[derive(Parser)]
#[command(name = "towpde", version, about = "Two-board tug-of-war game and DPP solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(ClapSub)]
enum Cmd {
    /// Solve the DPP and export the fields.
    Solve(Common),
    /// Estimate game values by Monte Carlo.
    Simulate(Common),
    /// PDE residuals of the solved fields.
    Residuals(Common),
    /// Self-convergence study over a list of eps.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma separated, e.g. 0.2,0.1,0.05
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
    },
    /// Exit-time and martingale statistics near the boundary.
    Estimates(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, common, eps_list) = match cli.cmd {
        Cmd::Solve(c) => (Subcommand::Solve, c, None),
        Cmd::Simulate(c) => (Subcommand::Simulate, c, None),
        Cmd::Residuals(c) => (Subcommand::Residuals, c, None),
        Cmd::Converge { common, eps_list } => (Subcommand::Converge, common, eps_list),
        Cmd::Estimates(c) => (Subcommand::Estimates, c, None),
    };
    let over = Overrides {
        out: common.out,
        seed: common.seed,
        threads: common.threads,
        eps_list,
    };
    let result = RunConfig::load(&common.config).and_then(|cfg| run(cfg, sub, &over));
    match result {
        Ok(dir) => {
            println!("{}: wrote {}", sub.name(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
