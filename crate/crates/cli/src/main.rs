//! `classplay`: validate scenarios, host rooms, run bot simulations and score
//! questionnaires.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "classplay", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario file; exits 0 only when it has no errors.
    Validate { file: PathBuf },
    /// Host rooms over TCP and WebSocket on one port.
    Serve {
        /// TOML server config. Without one the defaults apply.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List the rooms of a running server.
    Rooms {
        #[arg(long, default_value = "127.0.0.1:7878")]
        server: String,
    },
    /// Roll a room on a running server back to one of its checkpoints.
    Restore {
        room: String,
        /// Checkpoint name, a phase name (the latest checkpoint taken in it) or `latest`.
        checkpoint: String,
        #[arg(long, default_value = "127.0.0.1:7878")]
        server: String,
    },
    /// Play one session with bot clients under a virtual clock.
    Sim(commands::SimArgs),
    /// Run compliant sessions for every class size and seed.
    Sweep(commands::SweepArgs),
    /// Score GUESS-18 questionnaire answers.
    Survey {
        #[command(subcommand)]
        command: SurveyCommand,
    },
}

#[derive(Debug, Subcommand)]
enum SurveyCommand {
    /// Per-respondent subscale and overall scores as CSV.
    Score {
        csv: PathBuf,
        /// Item map JSON replacing the built-in GUESS-18 layout.
        #[arg(long)]
        items: Option<PathBuf>,
    },
    /// Descriptives, Cronbach's alpha and sex comparisons as JSON.
    Report {
        csv: PathBuf,
        #[arg(long)]
        items: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { file } => commands::validate(&file),
        Command::Serve { config } => commands::serve(config.as_deref()),
        Command::Rooms { server } => commands::rooms(&server),
        Command::Restore {
            room,
            checkpoint,
            server,
        } => commands::restore(&server, &room, &checkpoint),
        Command::Sim(args) => commands::sim(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Survey { command } => match command {
            SurveyCommand::Score { csv, items } => commands::survey_score(&csv, items.as_deref()),
            SurveyCommand::Report { csv, items } => commands::survey_report(&csv, items.as_deref()),
        },
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
