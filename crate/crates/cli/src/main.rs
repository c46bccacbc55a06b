//! `wltscan`: the pipeline from crawling to labeling to evaluation.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wltscan::model::ScorerKind;
use wltscan::splitter::Split;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(wltscan::Error),
}

impl From<wltscan::Error> for CliError {
    fn from(e: wltscan::Error) -> Self {
        CliError::Domain(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "wltscan", version, about = "Collect, label, train and evaluate wildlife-trade post detectors")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Global {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Global RNG seed (config key `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Config override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate and normalize a JSONL corpus.
    Ingest {
        #[arg(long)]
        input: PathBuf,
    },
    /// Expand from seed users over the social graph and collect timelines.
    Crawl {
        /// Comma-separated user ids, or @file with one per line.
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value_t = 2)]
        hops: usize,
        /// Maximum number of non-seed users.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value_t = wltscan::socialgraph::TIMELINE_CAP)]
        timeline_cap: usize,
        /// Edge file (`a follows b` lines) of an offline graph.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Timelines of the offline graph's users.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Crawl a generated graph instead, with this seed.
        #[arg(long, conflicts_with_all = ["graph", "corpus"])]
        synthetic: Option<u64>,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        /// Timeline requests per second.
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Per-class text, image and graph statistics.
    Analyze {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Balance classes and assign user-disjoint train/dev/test splits.
    Split {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Train a scorer and calibrate its threshold on the dev split.
    Train {
        #[arg(long, default_value = "linear")]
        model: ScorerKind,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Defaults to `<out>/split.csv`.
        #[arg(long)]
        split_file: Option<PathBuf>,
    },
    /// Score a split with a trained model and write metrics.
    Eval {
        #[arg(long, default_value = "test")]
        split: Split,
        /// Defaults to `<out>/model.json`.
        #[arg(long)]
        model_file: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        split_file: Option<PathBuf>,
        /// Run name used in the metrics file name (default: the seed).
        #[arg(long)]
        run: Option<String>,
    },
    /// Run the labeling service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Seed post ids: comma-separated or @file.
        #[arg(long, default_value = "")]
        seed_posts: String,
        /// Seed user ids: comma-separated or @file. Needed for a new state.
        #[arg(long, default_value = "")]
        seed_users: String,
        /// Event log directory; resumed when it already holds a log.
        #[arg(long)]
        state_dir: Option<PathBuf>,
        #[arg(long, default_value = "linear")]
        model: ScorerKind,
    },
    /// Export adopted labels from a labeling state.
    Export {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        state_dir: Option<PathBuf>,
        #[arg(long)]
        english_only: bool,
    },
    /// Aggregate metrics files into a results table.
    Report {
        /// Metrics files; defaults to every `eval_*.json` under `<out>`.
        #[arg(long, num_args = 1..)]
        runs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}\n\nRun `wltscan --help` for usage.");
            ExitCode::from(2)
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
