//! `fakg`: face-attack knowledge-graph toolkit CLI.
//!
//! Subcommands wrap the library modules behind a stable exit-code contract:
//! 0 success, 2 usage/input error, 3 validation findings, 4 data/integrity
//! failure, 5 remote-service failure. Machine output goes to stdout, logs
//! to stderr, and identical inputs (stub clients, fixed seeds) produce
//! byte-identical output.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FINDINGS: i32 = 3;
pub const EXIT_DATA: i32 = 4;
pub const EXIT_REMOTE: i32 = 5;

/// Error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    pub fn remote(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_REMOTE,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "fakg",
    version,
    about = "Face-attack knowledge-graph toolkit: graph queries, rationale grounding, \
             KG-consistency rewards, protocol metrics, QA synthesis, and a toy policy sandbox"
)]
struct Cli {
    /// Global configuration file (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Graph file; defaults to the bundled reference graph
    #[arg(long, global = true, value_name = "PATH")]
    graph: Option<PathBuf>,

    /// Log level for stderr diagnostics (error|warn|info|debug|trace)
    #[arg(long, global = true, value_name = "LEVEL")]
    log_level: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Knowledge-graph utilities
    #[command(subcommand)]
    Kg(commands::kg::KgCommand),
    /// Ground rationale text against the graph's relations
    Ground(commands::ground::GroundArgs),
    /// Score response groups with rewards and advantages
    Score(commands::score::ScoreArgs),
    /// Evaluate predictions under a protocol
    Eval(commands::eval::EvalArgs),
    /// Synthesize QA records over an image manifest
    Synth(commands::synth::SynthArgs),
    /// Train the toy policy sandbox
    Sim(commands::sim::SimArgs),
}

fn init_logging(cli_level: Option<&str>, file_level: Option<&str>) {
    let level = cli_level.or(file_level).unwrap_or("warn");
    let mut builder = env_logger::Builder::from_env(env_logger::Env::default());
    builder.parse_filters(level);
    builder.target(env_logger::Target::Stderr);
    let _ = builder.try_init();
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let ctx = config::Ctx::new(cli.config.as_deref(), cli.graph.as_deref())?;
    init_logging(cli.log_level.as_deref(), ctx.file.log_level.as_deref());
    match cli.command {
        Command::Kg(cmd) => commands::kg::run(cmd, &ctx),
        Command::Ground(args) => commands::ground::run(args, &ctx),
        Command::Score(args) => commands::score::run(args, &ctx),
        Command::Eval(args) => commands::eval::run(args, &ctx),
        Command::Synth(args) => commands::synth::run(args, &ctx),
        Command::Sim(args) => commands::sim::run(args, &ctx),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}
