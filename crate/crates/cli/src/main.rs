//! `chargeamp`: batch front end for the charge-amplifier models.
//!
//! Every command writes into `--out-dir` and finishes with a
//! `<command>.manifest.json` listing inputs (with SHA-256), outputs and the
//! tool version. Exit codes: 0 ok, 2 bad input, 3 numeric failure.

mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use chargeamp_core::Error;
use clap::{Args, Parser, Subcommand};

use commands::{AnalyzeCmd, BodeArgs, EinArgs, EncArgs, ExploreArgs, NoiseArgs, OracleArgs};
use output::Format;

#[derive(Debug, Parser)]
#[command(name = "chargeamp", version, about = "Differential charge amplifier design and analysis")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Directory for reports and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Only errors on stderr, nothing on stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transfer function |G_out| and phase over a log grid.
    Bode(BodeArgs),
    /// Input-referred noise density, term by term.
    Noise(NoiseArgs),
    /// Equivalent noise charge over a band.
    Enc(EncArgs),
    /// Equivalent input noise per third-octave band, dB SPL.
    Ein(EinArgs),
    /// Measurement analyses on recorded data.
    Analyze {
        #[command(subcommand)]
        mode: AnalyzeCmd,
    },
    /// Grid sweep of component choices with a Pareto front.
    Explore(ExploreArgs),
    /// Compare the closed-form model with the nodal-analysis oracle.
    OracleCheck(OracleArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<commands::OracleMismatch>()) {
        return 3;
    }
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_numeric() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.global.quiet { log::LevelFilter::Error } else { log::LevelFilter::Warn })
        .format_timestamp(None)
        .init();

    let g = &cli.global;
    let result = match &cli.command {
        Command::Bode(a) => commands::bode(g, a),
        Command::Noise(a) => commands::noise(g, a),
        Command::Enc(a) => commands::enc(g, a),
        Command::Ein(a) => commands::ein(g, a),
        Command::Analyze { mode } => commands::analyze(g, mode),
        Command::Explore(a) => commands::explore(g, a),
        Command::OracleCheck(a) => commands::oracle_check(g, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
