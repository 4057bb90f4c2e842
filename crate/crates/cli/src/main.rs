//! `langsim`: acoustic similarity between a query language and reference
//! languages, from curation of raw recordings to combined reports.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CurateArgs, MisclassArgs, ReportArgs, SimilarityArgs, SynthArgs, TsneArgs};

#[derive(Debug, Parser)]
#[command(name = "langsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trim, resample and pack a directory of WAV recordings into 10–15 s utterances.
    Curate(CurateArgs),
    /// Rank target languages by centroid cosine or FID against the query.
    Similarity(SimilarityArgs),
    /// Misclassification profile of a classifier on the query's utterances.
    Misclass(MisclassArgs),
    /// 2-D t-SNE projection of pooled embeddings.
    Tsne(TsneArgs),
    /// Generate a synthetic Gaussian catalog with known ground truth.
    Synth(SynthArgs),
    /// Combined cosine / FID / misclassification report.
    Report(ReportArgs),
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let (report, out): (_, Option<PathBuf>) = match &cli.command {
        Command::Curate(a) => (commands::curate(a)?, None),
        Command::Similarity(a) => (commands::similarity(a)?, a.out.clone()),
        Command::Misclass(a) => (commands::misclass(a)?, a.out.clone()),
        Command::Tsne(a) => (commands::tsne_cmd(a)?, Some(output::sibling(&a.out, "", "json"))),
        Command::Synth(a) => (commands::synth(a)?, None),
        Command::Report(a) => (commands::report(a)?, a.out.clone()),
    };
    report.emit(out.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
