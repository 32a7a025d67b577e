use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use seneca::pipeline::{run_stage, PipelineConfig, StageOptions};

/// Run one stage of the summarization pipeline.
///
/// Stages, in order: make-toy-corpus, ingest, make-labels, train-coherence,
/// train-selector, train-generator-ml, train-generator-rl, connect,
/// summarize, evaluate, quality-stats.
#[derive(Debug, Parser)]
#[command(name = "seneca", version)]
struct Cli {
    stage: String,
    /// Flat `key = value` configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory shared by all stages.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Beam width for summarize (1 = greedy).
    #[arg(long)]
    beam: Option<usize>,
    /// Length-normalization exponent for beam search.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Directory with checkpoints to summarize with, if not --out.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// JSONL articles to summarize instead of the held-out split.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(b) = cli.beam {
        cfg.beam = b;
    }
    if let Some(a) = cli.alpha {
        cfg.alpha = a;
    }
    if let Some(m) = cli.max_len {
        cfg.max_len = m;
    }
    let opts = StageOptions {
        input: cli.input,
        checkpoint_dir: cli.checkpoint,
    };
    let manifest = run_stage(&cli.stage, &cfg, &cli.out, &opts)?;
    for (k, v) in &manifest.metrics {
        println!("{k}\t{v}");
    }
    eprintln!("{} done in {:.1}s", manifest.stage, manifest.wall_clock_secs);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
