use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use optmm::experiment::ExperimentConfig;
use optmm::sim::HedgeMode;

mod commands;

use commands::Policy;

#[derive(Parser, Debug)]
#[command(
    name = "optmm",
    version,
    about = "Optimal quoting for a book of options on one underlying"
)]
struct Cli {
    /// JSON experiment configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the command's own random draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the configuration in effect.
    Config,
    /// Monte Carlo prices and implied volatilities of the book.
    Surface {
        /// Append closed-form prices and their distance in standard errors.
        #[arg(long)]
        oracle: bool,
        /// Add a zero-strike call as a sanity row.
        #[arg(long)]
        zero_strike: bool,
    },
    /// Solve for the value function and write it with its initial slice.
    Solve {
        /// Also solve on a grid with twice the resolution and report the difference.
        #[arg(long)]
        refine: bool,
    },
    /// Optimal quotes at time 0 across portfolio vegas.
    Quotes {
        #[arg(long)]
        value_function: Option<PathBuf>,
    },
    /// Simulate trading episodes.
    Simulate {
        #[arg(long)]
        value_function: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, value_enum, default_value = "optimal")]
        policy: Policy,
        #[arg(long, value_enum)]
        hedge: Option<Hedge>,
    },
    /// First-order correction for moving vegas.
    Correct {
        #[arg(long)]
        value_function: Option<PathBuf>,
        /// JSON list of `{time, spot, variance, inventory}`; the initial flat state when absent.
        #[arg(long)]
        states: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Hedge {
    Delta,
    Optimal,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let vf_path = |p: &Option<PathBuf>| {
        p.clone()
            .unwrap_or_else(|| cli.out.join(commands::VALUE_FUNCTION))
    };
    match &cli.command {
        Command::Config => {
            println!("{}", cfg.to_json());
            Ok(())
        }
        Command::Surface {
            oracle,
            zero_strike,
        } => {
            if let Some(s) = cli.seed {
                cfg.surface.seed = s;
            }
            commands::cmd_surface(&cfg, &cli.out, *oracle, *zero_strike)
        }
        Command::Solve { refine } => commands::cmd_solve(&cfg, &cli.out, *refine),
        Command::Quotes { value_function } => {
            commands::cmd_quotes(&cfg, &cli.out, &vf_path(value_function))
        }
        Command::Simulate {
            value_function,
            episodes,
            policy,
            hedge,
        } => {
            if let Some(s) = cli.seed {
                cfg.simulation.seed = s;
            }
            if let Some(n) = episodes {
                cfg.simulation.n_episodes = *n;
            }
            if let Some(h) = hedge {
                cfg.simulation.hedge = match h {
                    Hedge::Delta => HedgeMode::Delta,
                    Hedge::Optimal => HedgeMode::Optimal,
                };
            }
            commands::cmd_simulate(&cfg, &cli.out, &vf_path(value_function), *policy)
        }
        Command::Correct {
            value_function,
            states,
        } => {
            if let Some(s) = cli.seed {
                cfg.correction.seed = s;
            }
            commands::cmd_correct(&cfg, &cli.out, &vf_path(value_function), states.as_deref())
        }
    }
}
