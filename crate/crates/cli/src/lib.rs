//! The `reobj` command line: synthetic data, ingestion, feature extraction,
//! training, evaluation and reporting.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod cmd;
pub mod config;
pub mod layout;

use cmd::eval::EvalArgs;
use cmd::features::FeaturesArgs;
use cmd::ingest::IngestArgs;
use cmd::report::ReportArgs;
use cmd::synth::SynthArgs;
use cmd::train::TrainArgs;
use config::FileDefaults;

#[derive(Debug, Parser)]
#[command(name = "reobj", version, about = "Object instance re-identification from foreground and background features")]
pub struct Cli {
    /// TOML file with one table of defaults per subcommand; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    Ingest(IngestArgs),
    Features(FeaturesArgs),
    Train(TrainArgs),
    Eval(EvalArgs),
    Synth(SynthArgs),
    Report(ReportArgs),
}

fn init_logging() {
    let level = std::env::var("REOBJ_LOG").unwrap_or_else(|_| "error".into());
    let _ = env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .format_target(false)
        .try_init();
}

pub fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    let defaults = FileDefaults::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Ingest(a) => cmd::ingest::run(a, &defaults),
        Command::Features(a) => cmd::features::run(a, &defaults),
        Command::Train(a) => cmd::train::run(a, &defaults),
        Command::Eval(a) => cmd::eval::run(a, &defaults),
        Command::Synth(a) => cmd::synth::run(a, &defaults),
        Command::Report(a) => cmd::report::run(a, &defaults),
    }
}

/// Parses `argv` (including the program name) and runs one subcommand.
/// Returns 0 on success, 2 for usage errors and 1 for failures, which are
/// reported on stderr with their cause chain.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            for cause in e.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            1
        }
    }
}
