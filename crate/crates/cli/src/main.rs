//! `pdtriage`: ingest, train, review and score a document-triage run.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdtriage_core::eval::GroupBy;

#[derive(Parser, Debug)]
#[command(name = "pdtriage", version, about = "Topic-model triage of declassified documents")]
pub struct Cli {
    /// Directory holding the artifact chain; supplies default paths.
    #[arg(long, global = true, value_name = "DIR")]
    workspace: Option<PathBuf>,

    /// No progress output on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tokenize the manifest's documents and write the corpus artifact.
    Ingest(IngestArgs),
    /// Fit the topic model by collapsed Gibbs sampling.
    Train(TrainArgs),
    /// List each topic's most probable words.
    Topics(TopicsArgs),
    /// Apply a category mapping and write per-document decisions.
    Classify(ClassifyArgs),
    /// Score decisions against the manifest's gold labels.
    Eval(EvalArgs),
    /// Run the review API (and UI, if built) on localhost.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Root that manifest source paths are relative to [default: <manifest dir>/texts].
    #[arg(long)]
    texts: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    topics: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Document-topic prior [default: 50 / topics].
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    /// Sweeps discarded before averaging [default: iters / 5].
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 10)]
    thinning: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TopicsArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Also write the listing as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    classification: Option<PathBuf>,
    /// Gold labels [default: the manifest rows stored in the corpus].
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "administration")]
    group_by: GroupBy,
    /// Corpus used to resolve clean/impacted flags for rows without an override.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Report JSON path; metrics and grouped CSVs are written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate only rows that have a gold label.
    #[arg(long)]
    labeled_only: bool,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8321)]
    port: u16,
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    match std::panic::catch_unwind(|| commands::run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
