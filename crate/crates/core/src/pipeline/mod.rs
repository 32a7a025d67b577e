//! Stage runner, connector training and end-to-end inference.
//!
//! Every stage reads and writes files in one output directory:
//!
//! | file | written by |
//! |---|---|
//! | `raw.jsonl` | make-toy-corpus (or supply `corpus = path`) |
//! | `train.jsonl`, `test.jsonl`, `vocab.txt` | ingest |
//! | `labels.jsonl` | make-labels |
//! | `triples.jsonl`, `coherence.ckpt` | train-coherence |
//! | `selector.ckpt` | train-selector |
//! | `generator_ml.ckpt` | train-generator-ml |
//! | `generator_rl.ckpt` | train-generator-rl |
//! | `selector_connected.ckpt` | connect |
//! | `summaries.jsonl` | summarize |
//! | `evaluation.{csv,json}` | evaluate |
//! | `quality.csv` | quality-stats |
//!
//! plus `metrics/<stage>.json` (deterministic) and `manifests/<stage>.json`
//! (adds wall-clock time). Checkpoints get a `.config` copy of the run
//! configuration beside them.

pub mod config;
pub mod connect;
pub mod evaluate;
pub mod infer;
pub mod stages;
pub mod toy;

pub use config::PipelineConfig;
pub use connect::{connect_rl, ConnectConfig, ConnectItem, ConnectStepStats, TrainedGenerator};
pub use evaluate::{evaluate_corpus, EvalRow, EvaluationReport};
pub use infer::{summarize_end_to_end, EndToEndSummary, InferenceConfig, PipelineModels};
pub use stages::{run_stage, RunManifest, Stage, StageOptions};
pub use toy::{make_planted_corpus, make_toy_corpus};

pub const RAW: &str = "raw.jsonl";
pub const TRAIN: &str = "train.jsonl";
pub const TEST: &str = "test.jsonl";
pub const VOCAB: &str = "vocab.txt";
pub const LABELS: &str = "labels.jsonl";
pub const TRIPLES: &str = "triples.jsonl";
pub const COHERENCE: &str = "coherence.ckpt";
pub const SELECTOR: &str = "selector.ckpt";
pub const SELECTOR_CONNECTED: &str = "selector_connected.ckpt";
pub const GENERATOR_ML: &str = "generator_ml.ckpt";
pub const GENERATOR_RL: &str = "generator_rl.ckpt";
pub const SUMMARIES: &str = "summaries.jsonl";
pub const EVAL_CSV: &str = "evaluation.csv";
pub const EVAL_JSON: &str = "evaluation.json";
pub const QUALITY: &str = "quality.csv";
