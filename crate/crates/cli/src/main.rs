mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::*;

/// Text/image retrieval with semantic filtering, transmedia diffusion and late fusion.
#[derive(Debug, Parser)]
#[command(name = "fusegraph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a collection directory and summarize it.
    Ingest(IngestArgs),
    /// Score queries with the text model and write text similarities.
    ScoreText(ScoreTextArgs),
    /// Fit visual vocabularies, score image queries and write visual similarities.
    ScoreVisual(ScoreVisualArgs),
    /// List the candidates kept by the semantic filter for every query.
    Filter(FilterArgs),
    /// Write diffused score vectors for one direction.
    Diffuse(DiffuseArgs),
    /// Fuse precomputed scores into a run file.
    Fuse(FuseArgs),
    /// Score a raw collection end to end and write a run file.
    Run(RunArgs),
    /// Compute AP/MAP of a run, optionally against a baseline run.
    Evaluate(EvaluateArgs),
    /// Evaluate a parameter grid against a baseline.
    Sweep(SweepArgs),
    /// Generate a seeded synthetic collection.
    Synth(SynthArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(fusegraph::Error),
}

impl From<fusegraph::Error> for CliError {
    fn from(e: fusegraph::Error) -> Self {
        use fusegraph::Error as E;
        match e {
            E::InvalidParameter(m) => CliError::Config(m),
            E::AbsentComponent(c) => CliError::Config(format!("nonzero weight on absent component {c}")),
            other => CliError::Data(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::ScoreText(a) => score_text(a),
        Command::ScoreVisual(a) => score_visual(a),
        Command::Filter(a) => filter(a),
        Command::Diffuse(a) => diffuse(a),
        Command::Fuse(a) => fuse(a),
        Command::Run(a) => run(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fusegraph: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
