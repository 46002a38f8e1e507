use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pwa_sync::io::{
    self, cmd_compare, cmd_simulate, cmd_synthesize, cmd_verify, load_config, load_gain, RunConfig,
};
use pwa_sync::model::Convention;

#[derive(Parser)]
#[command(name = "pwa-sync", about = "PWA master-slave synchronization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Physical,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the synchronization LMIs and write the gain with its certificate
    Synthesize {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
    },
    /// Simulate the closed loop with a given gain; writes CSV and a plot script
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Gain file path or inline JSON array
        #[arg(long)]
        gain: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
    },
    /// Report closed-loop eigenvalues for a given gain
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        gain: String,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
    },
    /// Simulate two gains on the same scenario and compare their metrics
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        gain_a: Option<String>,
        #[arg(long)]
        gain_b: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
    },
}

fn with_convention(mut cfg: RunConfig, arg: Option<ConventionArg>) -> RunConfig {
    if let Some(c) = arg {
        cfg.convention = match c {
            ConventionArg::Physical => Convention::Physical,
            ConventionArg::Paper => Convention::Paper,
        };
    }
    cfg
}

fn run(cli: Cli) -> Result<i32, io::IoError> {
    match cli.command {
        Command::Synthesize {
            config,
            out,
            convention,
        } => {
            let cfg = with_convention(load_config(config.as_deref())?, convention);
            cmd_synthesize(&cfg, &out)
        }
        Command::Simulate {
            config,
            gain,
            out,
            convention,
        } => {
            let cfg = with_convention(load_config(config.as_deref())?, convention);
            cmd_simulate(&cfg, load_gain(&gain)?, &out)
        }
        Command::Verify {
            config,
            gain,
            convention,
        } => {
            let cfg = with_convention(load_config(config.as_deref())?, convention);
            cmd_verify(&cfg, load_gain(&gain)?)
        }
        Command::Compare {
            config,
            gain_a,
            gain_b,
            out,
            convention,
        } => {
            let cfg = with_convention(load_config(config.as_deref())?, convention);
            let a = gain_a.map(|g| load_gain(&g)).transpose()?;
            let b = gain_b.map(|g| load_gain(&g)).transpose()?;
            cmd_compare(&cfg, a, b, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(io::EXIT_FAILURE as u8)
        }
    }
}
