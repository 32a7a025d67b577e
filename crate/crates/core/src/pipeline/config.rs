//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors, so a
//! typo never silently falls back to a default.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coherence::{
    CoherenceConfig, CoherenceTrainConfig, TripleConfig, DEFAULT_NEGATIVE_WINDOW,
    DEFAULT_SELF_REPETITION_FRACTION,
};
use crate::error::{Result, SenecaError};
use crate::generator::{GeneratorConfig, MlTrainConfig, RlConfig, DEFAULT_MAX_LEN};
use crate::pipeline::connect::ConnectConfig;
use crate::rewards::{RewardConfig, DEFAULT_GAMMA_APP, DEFAULT_GAMMA_COH, DEFAULT_GAMMA_REF};
use crate::selector::{SelectorConfig, SelectorTrainConfig, DEFAULT_MAX_STEPS};
use crate::textproc::DEFAULT_SALIENT_K;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Raw JSONL corpus; `None` means `<out>/raw.jsonl`.
    pub corpus: Option<String>,
    pub toy_seed: u64,
    pub toy_size: usize,
    /// Fraction of articles (taken from the end) held out for evaluation.
    pub held_out: f64,
    pub vocab_cap: usize,
    pub salient_k: usize,
    pub max_select_steps: usize,

    pub embedding_dim: usize,
    pub conv_widths: Vec<usize>,
    pub conv_filters: usize,
    pub lstm_hidden: usize,
    pub attention_dim: usize,

    pub coh_embedding_dim: usize,
    pub coh_conv_widths: Vec<usize>,
    pub coh_filters: usize,
    pub coh_hidden: usize,
    pub coh_epochs: usize,
    pub coh_lr: f64,
    pub coh_batch: usize,
    pub negative_window: usize,
    pub self_repetition: f64,

    pub sel_epochs: usize,
    pub sel_lr: f64,
    pub sel_batch: usize,
    pub ml_epochs: usize,
    pub ml_lr: f64,
    pub ml_batch: usize,
    pub clip_norm: f64,

    pub rl_steps: usize,
    pub rl_lr: f64,
    pub rl_batch: usize,
    pub rl_samples: usize,
    pub connect_steps: usize,
    pub connect_lr: f64,
    pub connect_batch: usize,
    pub connect_samples: usize,

    pub max_len: usize,
    pub beam: usize,
    pub alpha: f64,

    pub gamma_coh: f64,
    pub gamma_ref: f64,
    pub gamma_app: f64,
    pub use_coh: bool,
    pub use_ref: bool,
    pub use_app: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let sel = SelectorConfig::default();
        let coh = CoherenceConfig::default();
        PipelineConfig {
            seed: 0,
            corpus: None,
            toy_seed: 7,
            toy_size: 100,
            held_out: 0.1,
            vocab_cap: 50_000,
            salient_k: DEFAULT_SALIENT_K,
            max_select_steps: DEFAULT_MAX_STEPS,
            embedding_dim: sel.embedding_dim,
            conv_widths: sel.conv_widths,
            conv_filters: sel.filters_per_width,
            lstm_hidden: sel.encoder_hidden,
            attention_dim: sel.attention_dim,
            coh_embedding_dim: coh.embedding_dim,
            coh_conv_widths: coh.conv_widths,
            coh_filters: coh.filters_per_width,
            coh_hidden: coh.mlp_hidden,
            coh_epochs: 5,
            coh_lr: 1e-3,
            coh_batch: 32,
            negative_window: DEFAULT_NEGATIVE_WINDOW,
            self_repetition: DEFAULT_SELF_REPETITION_FRACTION,
            sel_epochs: 10,
            sel_lr: 1e-3,
            sel_batch: 32,
            ml_epochs: 10,
            ml_lr: 1e-3,
            ml_batch: 32,
            clip_norm: 2.0,
            rl_steps: 100,
            rl_lr: 1e-4,
            rl_batch: 10,
            rl_samples: 5,
            connect_steps: 20,
            connect_lr: 1e-4,
            connect_batch: 50,
            connect_samples: 1,
            max_len: DEFAULT_MAX_LEN,
            beam: 5,
            alpha: 1.0,
            gamma_coh: DEFAULT_GAMMA_COH,
            gamma_ref: DEFAULT_GAMMA_REF,
            gamma_app: DEFAULT_GAMMA_APP,
            use_coh: false,
            use_ref: false,
            use_app: false,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| SenecaError::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(SenecaError::Config(format!("`{key}`: expected a boolean, got `{v}`"))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|x| parse_num(key, x.trim())).collect()
}

fn list(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = PipelineConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SenecaError::Config(format!("line {}: expected key = value", n + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, k: &str, v: &str) -> Result<()> {
        match k {
            "seed" => self.seed = parse_num(k, v)?,
            "corpus" => self.corpus = (!v.is_empty()).then(|| v.to_string()),
            "toy_seed" => self.toy_seed = parse_num(k, v)?,
            "toy_size" => self.toy_size = parse_num(k, v)?,
            "held_out" => self.held_out = parse_num(k, v)?,
            "vocab_cap" => self.vocab_cap = parse_num(k, v)?,
            "salient_k" => self.salient_k = parse_num(k, v)?,
            "max_select_steps" => self.max_select_steps = parse_num(k, v)?,
            "embedding_dim" => self.embedding_dim = parse_num(k, v)?,
            "conv_widths" => self.conv_widths = parse_list(k, v)?,
            "conv_filters" => self.conv_filters = parse_num(k, v)?,
            "lstm_hidden" => self.lstm_hidden = parse_num(k, v)?,
            "attention_dim" => self.attention_dim = parse_num(k, v)?,
            "coh_embedding_dim" => self.coh_embedding_dim = parse_num(k, v)?,
            "coh_conv_widths" => self.coh_conv_widths = parse_list(k, v)?,
            "coh_filters" => self.coh_filters = parse_num(k, v)?,
            "coh_hidden" => self.coh_hidden = parse_num(k, v)?,
            "coh_epochs" => self.coh_epochs = parse_num(k, v)?,
            "coh_lr" => self.coh_lr = parse_num(k, v)?,
            "coh_batch" => self.coh_batch = parse_num(k, v)?,
            "negative_window" => self.negative_window = parse_num(k, v)?,
            "self_repetition" => self.self_repetition = parse_num(k, v)?,
            "sel_epochs" => self.sel_epochs = parse_num(k, v)?,
            "sel_lr" => self.sel_lr = parse_num(k, v)?,
            "sel_batch" => self.sel_batch = parse_num(k, v)?,
            "ml_epochs" => self.ml_epochs = parse_num(k, v)?,
            "ml_lr" => self.ml_lr = parse_num(k, v)?,
            "ml_batch" => self.ml_batch = parse_num(k, v)?,
            "clip_norm" => self.clip_norm = parse_num(k, v)?,
            "rl_steps" => self.rl_steps = parse_num(k, v)?,
            "rl_lr" => self.rl_lr = parse_num(k, v)?,
            "rl_batch" => self.rl_batch = parse_num(k, v)?,
            "rl_samples" => self.rl_samples = parse_num(k, v)?,
            "connect_steps" => self.connect_steps = parse_num(k, v)?,
            "connect_lr" => self.connect_lr = parse_num(k, v)?,
            "connect_batch" => self.connect_batch = parse_num(k, v)?,
            "connect_samples" => self.connect_samples = parse_num(k, v)?,
            "max_len" => self.max_len = parse_num(k, v)?,
            "beam" => self.beam = parse_num(k, v)?,
            "alpha" => self.alpha = parse_num(k, v)?,
            "gamma_coh" => self.gamma_coh = parse_num(k, v)?,
            "gamma_ref" => self.gamma_ref = parse_num(k, v)?,
            "gamma_app" => self.gamma_app = parse_num(k, v)?,
            "use_coh" => self.use_coh = parse_bool(k, v)?,
            "use_ref" => self.use_ref = parse_bool(k, v)?,
            "use_app" => self.use_app = parse_bool(k, v)?,
            _ => return Err(SenecaError::Config(format!("unknown key `{k}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SenecaError::Config(m.to_string()));
        for (name, g) in [("gamma_coh", self.gamma_coh), ("gamma_ref", self.gamma_ref), ("gamma_app", self.gamma_app)] {
            if !(g >= 0.0 && g.is_finite()) {
                return bad(&format!("{name} must be a finite value >= 0"));
            }
        }
        if !(0.0..1.0).contains(&self.held_out) {
            return bad("held_out must be in [0, 1)");
        }
        if self.conv_widths.is_empty() || self.coh_conv_widths.is_empty() {
            return bad("conv widths must not be empty");
        }
        let sizes = [
            self.toy_size,
            self.embedding_dim,
            self.conv_filters,
            self.lstm_hidden,
            self.attention_dim,
            self.coh_embedding_dim,
            self.coh_filters,
            self.coh_hidden,
            self.max_select_steps,
            self.max_len,
            self.rl_samples,
            self.connect_samples,
        ];
        if sizes.contains(&0) {
            return bad("sizes, dimensions and sample counts must be >= 1");
        }
        Ok(())
    }

    /// Canonical `key = value` text; every key in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("corpus", self.corpus.clone().unwrap_or_default());
        kv("toy_seed", self.toy_seed.to_string());
        kv("toy_size", self.toy_size.to_string());
        kv("held_out", self.held_out.to_string());
        kv("vocab_cap", self.vocab_cap.to_string());
        kv("salient_k", self.salient_k.to_string());
        kv("max_select_steps", self.max_select_steps.to_string());
        kv("embedding_dim", self.embedding_dim.to_string());
        kv("conv_widths", list(&self.conv_widths));
        kv("conv_filters", self.conv_filters.to_string());
        kv("lstm_hidden", self.lstm_hidden.to_string());
        kv("attention_dim", self.attention_dim.to_string());
        kv("coh_embedding_dim", self.coh_embedding_dim.to_string());
        kv("coh_conv_widths", list(&self.coh_conv_widths));
        kv("coh_filters", self.coh_filters.to_string());
        kv("coh_hidden", self.coh_hidden.to_string());
        kv("coh_epochs", self.coh_epochs.to_string());
        kv("coh_lr", self.coh_lr.to_string());
        kv("coh_batch", self.coh_batch.to_string());
        kv("negative_window", self.negative_window.to_string());
        kv("self_repetition", self.self_repetition.to_string());
        kv("sel_epochs", self.sel_epochs.to_string());
        kv("sel_lr", self.sel_lr.to_string());
        kv("sel_batch", self.sel_batch.to_string());
        kv("ml_epochs", self.ml_epochs.to_string());
        kv("ml_lr", self.ml_lr.to_string());
        kv("ml_batch", self.ml_batch.to_string());
        kv("clip_norm", self.clip_norm.to_string());
        kv("rl_steps", self.rl_steps.to_string());
        kv("rl_lr", self.rl_lr.to_string());
        kv("rl_batch", self.rl_batch.to_string());
        kv("rl_samples", self.rl_samples.to_string());
        kv("connect_steps", self.connect_steps.to_string());
        kv("connect_lr", self.connect_lr.to_string());
        kv("connect_batch", self.connect_batch.to_string());
        kv("connect_samples", self.connect_samples.to_string());
        kv("max_len", self.max_len.to_string());
        kv("beam", self.beam.to_string());
        kv("alpha", self.alpha.to_string());
        kv("gamma_coh", self.gamma_coh.to_string());
        kv("gamma_ref", self.gamma_ref.to_string());
        kv("gamma_app", self.gamma_app.to_string());
        kv("use_coh", self.use_coh.to_string());
        kv("use_ref", self.use_ref.to_string());
        kv("use_app", self.use_app.to_string());
        s
    }

    /// SHA-256 of [`Self::to_text`], hex encoded.
    pub fn hash(&self) -> String {
        hex_sha256(self.to_text().as_bytes())
    }

    pub fn selector(&self) -> SelectorConfig {
        SelectorConfig {
            embedding_dim: self.embedding_dim,
            conv_widths: self.conv_widths.clone(),
            filters_per_width: self.conv_filters,
            encoder_hidden: self.lstm_hidden,
            decoder_hidden: self.lstm_hidden,
            attention_dim: self.attention_dim,
            mask_repeats: true,
        }
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            embedding_dim: self.embedding_dim,
            encoder_hidden: self.lstm_hidden,
            decoder_hidden: self.lstm_hidden,
            attention_dim: self.attention_dim,
        }
    }

    pub fn coherence(&self) -> CoherenceConfig {
        CoherenceConfig {
            embedding_dim: self.coh_embedding_dim,
            conv_widths: self.coh_conv_widths.clone(),
            filters_per_width: self.coh_filters,
            mlp_hidden: self.coh_hidden,
        }
    }

    pub fn triples(&self) -> TripleConfig {
        TripleConfig {
            negative_window: self.negative_window,
            self_repetition_fraction: self.self_repetition,
        }
    }

    pub fn coherence_training(&self, seed: u64) -> CoherenceTrainConfig {
        CoherenceTrainConfig {
            epochs: self.coh_epochs,
            lr: self.coh_lr,
            batch_size: self.coh_batch,
            clip_norm: self.clip_norm,
            seed,
        }
    }

    pub fn selector_training(&self, seed: u64) -> SelectorTrainConfig {
        SelectorTrainConfig {
            epochs: self.sel_epochs,
            lr: self.sel_lr,
            batch_size: self.sel_batch,
            clip_norm: self.clip_norm,
            seed,
        }
    }

    pub fn ml_training(&self, seed: u64) -> MlTrainConfig {
        MlTrainConfig {
            epochs: self.ml_epochs,
            lr: self.ml_lr,
            batch_size: self.ml_batch,
            clip_norm: self.clip_norm,
            seed,
        }
    }

    pub fn rl(&self) -> RlConfig {
        RlConfig {
            lr: self.rl_lr,
            batch_size: self.rl_batch,
            samples_per_item: self.rl_samples,
            clip_norm: self.clip_norm,
            max_len: self.max_len,
            block_trigrams_baseline: true,
        }
    }

    pub fn connect(&self) -> ConnectConfig {
        ConnectConfig {
            lr: self.connect_lr,
            batch_size: self.connect_batch,
            samples_per_article: self.connect_samples,
            clip_norm: self.clip_norm,
            max_steps: self.max_select_steps,
            max_len: self.max_len,
        }
    }

    pub fn rewards(&self) -> RewardConfig {
        RewardConfig {
            gamma_coh: self.gamma_coh,
            gamma_ref: self.gamma_ref,
            gamma_app: self.gamma_app,
            use_coh: self.use_coh,
            use_ref: self.use_ref,
            use_app: self.use_app,
        }
    }
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
