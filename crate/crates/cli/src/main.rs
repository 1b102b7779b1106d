//! `camsight`: flow extraction, analysis, training, attribution and reports.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use camsight_core::ErrorClass;
use commands::{
    AnalyzeArgs, EvalArgs, ExplainArgs, ExtractArgs, FaithfulArgs, PipelineArgs, ReportArgs, SynthArgs, TrainArgs,
};

#[derive(Debug, Parser)]
#[command(name = "camsight", version, about = "Offline IoT camera detection from packet captures")]
struct Cli {
    /// Root seed; every random choice derives from it.
    #[arg(long, global = true, env = camsight_core::pipeline::SEED_ENV)]
    seed: Option<u64>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract 77-feature flow rows from pcap files.
    Extract(ExtractArgs),
    /// Correlation, mutual information and PCA of a feature CSV.
    Analyze(AnalyzeArgs),
    /// Train a model on the training split of a feature CSV.
    Train(TrainArgs),
    /// Evaluate a saved model.
    Eval(EvalArgs),
    /// Per-instance and aggregate attributions.
    Explain(ExplainArgs),
    /// Consistency and sufficiency of an explainer.
    Faithful(FaithfulArgs),
    /// Write a synthetic labeled feature CSV.
    Synth(SynthArgs),
    /// Train and evaluate the two-stage category / camera classifier.
    Pipeline(PipelineArgs),
    /// Run a report config, or rerun a manifest.
    Report(ReportArgs),
}

/// Exit status: 0 ok, 1 validation, 2 data, 3 internal.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<camsight_core::Error>().map(|e| e.class()) {
        Some(ErrorClass::Validation) => 1,
        Some(ErrorClass::Data) => 2,
        Some(ErrorClass::Internal) => 3,
        None if err.downcast_ref::<std::io::Error>().is_some() => 2,
        None => err.downcast_ref::<commands::Failure>().map_or(3, |f| f.code),
    }
}

/// The error chain on one line, skipping causes a message already quotes.
fn render(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    for cause in err.chain().skip(1) {
        let c = cause.to_string();
        if !out.contains(&c) {
            out.push_str(": ");
            out.push_str(&c);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let seed = cli.seed.unwrap_or(0);
    let result = match cli.command {
        Command::Extract(a) => commands::extract(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Train(a) => commands::train(a, seed),
        Command::Eval(a) => commands::eval(a, seed),
        Command::Explain(a) => commands::explain(a, seed),
        Command::Faithful(a) => commands::faithful(a, seed),
        Command::Synth(a) => commands::synth(a, seed),
        Command::Pipeline(a) => commands::pipeline(a, seed),
        Command::Report(a) => commands::report(a, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
