mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fpembed_core::evaluate::Protocol;
use fpembed_core::Layout;
use fpembed_model::Ablation;

#[derive(Debug, Parser)]
#[command(name = "fpembed", version, about = "Fixed-length fingerprint embeddings: train, extract, match, evaluate")]
struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model; writes checkpoints, a step log and per-epoch metrics.
    ///
    /// Any config field can be overridden as `--section.key value`,
    /// e.g. `--train.lr_features 0.0005 --model.use_mam false`.
    Train {
        /// TOML file with sections model, train, augment, data, eval.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Sets train.seed and data.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Ablation preset a, b, c or d; overrides still apply on top.
        #[arg(long)]
        ablation: Option<Ablation>,
        /// Dotted overrides: `--section.key value` pairs.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
    /// Embed every image of a dataset directory into an FPE1 file.
    Extract {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// fvc, molf or flat.
        #[arg(long, default_value = "fvc")]
        layout: Layout,
        /// Output embedding file; the manifest is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
    },
    /// Print the matching score of two embedded images.
    Match {
        #[arg(long)]
        embeddings: PathBuf,
        id_a: String,
        id_b: String,
    },
    /// Compute the EER and DET curve of an embedding file over a dataset.
    Eval {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "fvc")]
        layout: Layout,
        /// all-pairs or fvc-standard.
        #[arg(long, default_value = "all-pairs")]
        protocol: Protocol,
        /// Report directory (report.toml, det.csv, scores.csv).
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic fingerprints with `.min` sidecars.
    Synth {
        /// Number of images.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 8)]
        impressions: usize,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the original image and one image per augmentation stage, (a)-(e).
    AugmentPreview {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log_level).init();
    let result = match cli.command {
        Command::Train { config, out, seed, ablation, overrides } => {
            commands::train(config.as_deref(), &out, seed, ablation, &overrides)
        }
        Command::Extract { checkpoint, data, layout, out, batch_size } => {
            commands::extract(&checkpoint, &data, layout, &out, batch_size)
        }
        Command::Match { embeddings, id_a, id_b } => commands::match_ids(&embeddings, &id_a, &id_b),
        Command::Eval { embeddings, data, layout, protocol, out } => commands::eval(&embeddings, &data, layout, protocol, &out),
        Command::Synth { count, impressions, width, height, seed, out } => {
            commands::synth(count, impressions, width, height, seed, &out)
        }
        Command::AugmentPreview { image, seed, out } => commands::augment_preview(&image, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
