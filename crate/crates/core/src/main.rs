use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use regretlab::harness::{self, Algorithm, Command, ExperimentConfig, Format, Overrides};
use regretlab::{Error, Norm};

#[derive(Parser)]
#[command(name = "regretlab", version, about = "Regret experiments for online logistic regression")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an online algorithm on a random sequence and write its regret trace.
    Run(Flags),
    /// Evaluate the lower and upper bound formulas.
    Bounds(Flags),
    /// Estimate the maximum-likelihood identification error on a design grid.
    Distinguish(Flags),
    /// Measure expected regret against the redundancy-capacity lower bound.
    Capacity(Flags),
    /// Run over a (d, T, B) grid and write one row per cell.
    Sweep(Flags),
}

#[derive(Args)]
struct Flags {
    /// grid-mixture, gaussian-mixture, kt or ogd.
    #[arg(long)]
    alg: Option<Algorithm>,
    /// l1, l2 or linf.
    #[arg(long)]
    norm: Option<Norm>,
    /// Norm radius.
    #[arg(long = "B")]
    radius: Option<f64>,
    #[arg(long = "d")]
    d: Option<usize>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Lattice step (default 4/sqrt(T)).
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; a run also writes `<stem>.summary.json` beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<Format>,
    /// key=value file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also report bounds in bits.
    #[arg(long)]
    bits: bool,
    #[arg(long)]
    eps_exponent: Option<f64>,
    /// Use the scaled design with this many levels.
    #[arg(long)]
    gamma_levels: Option<usize>,
    /// Per-coordinate grid size for distinguish/capacity instead of the theory grid.
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    d_list: Option<Vec<usize>>,
    #[arg(long = "T-list", value_delimiter = ',')]
    t_list: Option<Vec<usize>>,
    #[arg(long = "B-list", value_delimiter = ',')]
    b_list: Option<Vec<f64>>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            algorithm: self.alg,
            norm: self.norm,
            radius: self.radius,
            d: self.d,
            horizon: self.horizon,
            spacing: self.spacing,
            trials: self.trials,
            seed: self.seed,
            format: self.format,
            eps_exponent: self.eps_exponent,
            gamma_levels: self.gamma_levels,
            grid_points: self.grid_points,
            bits: self.bits.then_some(true),
            d_list: self.d_list.clone(),
            t_list: self.t_list.clone(),
            b_list: self.b_list.clone(),
        }
    }
}

fn resolve(command: Command, flags: Flags) -> Result<ExperimentConfig, Error> {
    let file = match &flags.config {
        Some(p) => Overrides::from_config_file(p)?,
        None => Overrides::default(),
    };
    ExperimentConfig::resolve(command, flags.out.clone(), flags.overrides().or(file))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Cmd::Run(f) => (Command::Run, f),
        Cmd::Bounds(f) => (Command::Bounds, f),
        Cmd::Distinguish(f) => (Command::Distinguish, f),
        Cmd::Capacity(f) => (Command::Capacity, f),
        Cmd::Sweep(f) => (Command::Sweep, f),
    };
    let result = harness::init_thread_pool()
        .and_then(|_| resolve(command, flags))
        .and_then(|cfg| harness::cli_run(&cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::from(1)
        }
    }
}
