//! Policy-gradient fine-tuning of the selector through a frozen generator.
//!
//! Each article's extraction is sampled step by step from the selector,
//! rewritten greedily by the generator and scored with ROUGE-1 F1 against
//! the reference. The baseline is the same pipeline run on the selector's
//! greedy extraction.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use seneca_tensor::{checkpoint, Adam, AdamConfig, Graph};

use crate::error::{Result, SenecaError};
use crate::generator::{ExtractedInput, Generator, DEFAULT_MAX_LEN};
use crate::metrics::rouge_1_f1;
use crate::selector::{Selector, SelectorInput, DEFAULT_MAX_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectConfig {
    pub lr: f64,
    pub batch_size: usize,
    /// Sampled extractions drawn per article per step.
    pub samples_per_article: usize,
    pub clip_norm: f64,
    pub max_steps: usize,
    /// Generator decode limit.
    pub max_len: usize,
}

impl Default for ConnectConfig {
    fn default() -> Self {
        ConnectConfig {
            lr: 1e-4,
            batch_size: 50,
            samples_per_article: 1,
            clip_norm: 2.0,
            max_steps: DEFAULT_MAX_STEPS,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

/// A generator together with how much training it has seen.
#[derive(Debug, Clone)]
pub struct TrainedGenerator {
    pub model: Generator,
    pub ml_steps: u64,
    pub rl_steps: u64,
}

impl TrainedGenerator {
    pub fn is_trained(&self) -> bool {
        self.ml_steps + self.rl_steps > 0
    }

    /// SHA-256 of the serialized parameters.
    pub fn checksum(&self) -> String {
        super::config::hex_sha256(&checkpoint::to_bytes(&self.model.store))
    }
}

/// One article for the connector: selector input plus reference sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectItem {
    pub input: SelectorInput,
    pub reference: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConnectStepStats {
    pub mean_sample_reward: f64,
    pub mean_baseline_reward: f64,
    pub skipped: bool,
}

/// Picks, falling back to the first sentence when nothing was selected.
pub fn extraction_or_lead(indices: &[usize]) -> Vec<usize> {
    if indices.is_empty() {
        vec![0]
    } else {
        indices.to_vec()
    }
}

fn summary_reward(
    generator: &Generator,
    input: &SelectorInput,
    picks: &[usize],
    reference: &[String],
    max_len: usize,
    cache: &mut HashMap<Vec<usize>, f64>,
) -> Result<f64> {
    let picks = extraction_or_lead(picks);
    if let Some(&r) = cache.get(&picks) {
        return Ok(r);
    }
    let ext = ExtractedInput::from_selection(&input.id, &input.sentences, &picks, &generator.vocab)?;
    let out = generator.greedy(&ext, max_len, true)?;
    let r = rouge_1_f1(&out.tokens, reference);
    cache.insert(picks, r);
    Ok(r)
}

/// Runs `steps` connector updates. Only `selector` changes; the generator
/// is borrowed immutably and must have been trained.
pub fn connect_rl(
    selector: &mut Selector,
    generator: &TrainedGenerator,
    items: &[ConnectItem],
    cfg: &ConnectConfig,
    steps: usize,
    seed: u64,
) -> Result<Vec<ConnectStepStats>> {
    if !generator.is_trained() {
        return Err(SenecaError::Untrained("generator checkpoint".into()));
    }
    if items.is_empty() {
        return Err(SenecaError::EmptyInput("connector articles".into()));
    }
    let gen = &generator.model;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = Adam::new(AdamConfig {
        lr: cfg.lr,
        clip_norm: Some(cfg.clip_norm),
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size.clamp(1, items.len()) {
            if order.is_empty() {
                order = (0..items.len()).collect();
                order.shuffle(&mut rng);
            }
            batch.push(&items[order.pop().expect("refilled")]);
        }

        let mut stats = ConnectStepStats::default();
        let mut episodes = Vec::new();
        for item in &batch {
            let reference = item.reference.concat();
            let mut cache = HashMap::new();
            let greedy = selector.select_sentences(&item.input, cfg.max_steps)?;
            let rb = summary_reward(gen, &item.input, &greedy.indices, &reference, cfg.max_len, &mut cache)?;
            stats.mean_baseline_reward += rb;
            for _ in 0..cfg.samples_per_article {
                let s = selector.sample_sentences(&item.input, cfg.max_steps, &mut rng)?;
                let stopped = s.distributions.len() > s.indices.len();
                let rs = summary_reward(gen, &item.input, &s.indices, &reference, cfg.max_len, &mut cache)?;
                stats.mean_sample_reward += rs;
                episodes.push((&item.input, s.indices, stopped, rs - rb));
            }
        }
        let n = episodes.len() as f64;
        stats.mean_baseline_reward /= batch.len() as f64;
        stats.mean_sample_reward /= n;
        if episodes.iter().all(|e| e.3 == 0.0) {
            stats.skipped = true;
            out.push(stats);
            continue;
        }
        let grads = {
            let mut g = Graph::new(&selector.store);
            let mut terms = Vec::new();
            for (input, picks, stopped, adv) in &episodes {
                if *adv == 0.0 {
                    continue;
                }
                let lp = selector.sequence_log_prob(&mut g, input, picks, *stopped)?;
                terms.push(g.scale(lp, -adv / n));
            }
            let stacked = g.concat_rows(&terms)?;
            let loss = g.sum(stacked);
            g.backward(loss)?
        };
        selector.store.accumulate(&grads);
        opt.step(&mut selector.store)?;
        out.push(stats);
    }
    Ok(out)
}

/// Mean first-step probability assigned to `targets[i]` in `inputs[i]`.
pub fn mean_first_pick_probability(selector: &Selector, inputs: &[SelectorInput], targets: &[usize]) -> Result<f64> {
    if inputs.len() != targets.len() {
        return Err(SenecaError::LengthMismatch {
            left: inputs.len(),
            right: targets.len(),
        });
    }
    if inputs.is_empty() {
        return Err(SenecaError::EmptyInput("first-pick inputs".into()));
    }
    let mut total = 0.0;
    for (input, &t) in inputs.iter().zip(targets) {
        total += selector.first_step_distribution(input)?[t];
    }
    Ok(total / inputs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct GeneratorMeta {
    ml_steps: u64,
    rl_steps: u64,
}

fn meta_path(ckpt: &Path) -> std::path::PathBuf {
    ckpt.with_extension("steps.json")
}

impl TrainedGenerator {
    /// Writes the checkpoint and a small step-count sidecar next to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.model.save(path)?;
        let meta = GeneratorMeta {
            ml_steps: self.ml_steps,
            rl_steps: self.rl_steps,
        };
        std::fs::write(meta_path(path), serde_json::to_vec(&meta)?)?;
        Ok(())
    }

    /// Loads parameters into `model`. Without a sidecar the step counts are
    /// zero, which [`connect_rl`] treats as untrained.
    pub fn load(mut model: Generator, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        model.load(path)?;
        let meta = match std::fs::read(meta_path(path)) {
            Ok(b) => serde_json::from_slice(&b)?,
            Err(_) => GeneratorMeta { ml_steps: 0, rl_steps: 0 },
        };
        Ok(TrainedGenerator {
            model,
            ml_steps: meta.ml_steps,
            rl_steps: meta.rl_steps,
        })
    }
}
