//! `prunemt`: run each stage of the compression workflow from JSON configs.
//!
//! Exit codes: 0 success, 2 usage or configuration error (no outputs
//! touched), 3 runtime failure. Failures print one JSON error record on
//! stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "prunemt", version, about = "Corpus filtering, training, pruning, distillation, fp16 and benchmarking for toy translation models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON config; defaults to $PRUNEMT_CONFIG_DIR/<command>.json or default.json.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config field by dotted path, e.g. `train.learning_rate=0.002`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Run manifest path; defaults to `<primary output>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the synthetic cipher corpus and language-ID seed sentences.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the four-stage filter over a corpus.
    Filter {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Filter report; defaults to `<out>.report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
        /// JSON map from language code to seed sentences.
        #[arg(long)]
        langid_seeds: Option<PathBuf>,
    },
    /// Train a model, from scratch or from `--init`.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Add teacher translations to a corpus.
    Distill {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        teacher: PathBuf,
        /// Checkpoint whose vocabulary the output must fit; defaults to the teacher's.
        #[arg(long)]
        student: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        langid_seeds: Option<PathBuf>,
    },
    /// Remove layers by greedy importance or from the middle of the stack.
    Prune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// `iterative` or `middle`.
        #[arg(long)]
        strategy: Option<String>,
        /// Layers to remove.
        #[arg(long)]
        n: Option<usize>,
        /// `decoder_only` or `encoder_decoder`.
        #[arg(long)]
        sides: Option<String>,
    },
    /// Round weights to half precision.
    Quantize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// BLEU, chrF++ and throughput per direction.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint, optionally labelled as `label=path`; repeatable.
        #[arg(long, required = true)]
        model: Vec<String>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the CSV view here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Repeated throughput measurement of one checkpoint.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an evaluation, prune or filter report to JSON or CSV.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        /// `quality-efficiency`: per-model chrF++ against tokens/s.
        #[arg(long)]
        chart: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            commands::CliError::usage_msg(e.to_string()).report();
            return ExitCode::from(commands::EXIT_USAGE);
        }
    };
    match commands::run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            e.report();
            ExitCode::from(e.code)
        }
    }
}
