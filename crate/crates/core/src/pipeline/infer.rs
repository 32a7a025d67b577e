//! Article in, abstractive summary out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coherence::{summary_coherence, CoherenceModel};
use crate::error::{Result, SenecaError};
use crate::generator::{ExtractedInput, Generator};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::connect::extraction_or_lead;
use crate::selector::{Selector, SelectorInput};
use crate::textproc::{Article, Lexicon, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub salient_k: usize,
    pub max_select_steps: usize,
    pub beam: usize,
    pub alpha: f64,
    pub max_len: usize,
}

impl From<&PipelineConfig> for InferenceConfig {
    fn from(c: &PipelineConfig) -> Self {
        InferenceConfig {
            salient_k: c.salient_k,
            max_select_steps: c.max_select_steps,
            beam: c.beam,
            alpha: c.alpha,
            max_len: c.max_len,
        }
    }
}

/// Everything [`summarize_end_to_end`] needs.
#[derive(Debug, Clone)]
pub struct PipelineModels {
    pub selector: Selector,
    pub generator: Generator,
    pub coherence: Option<CoherenceModel>,
    pub lexicon: Lexicon,
}

/// Where each checkpoint came from, for the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointPaths {
    pub selector: PathBuf,
    pub generator: PathBuf,
    pub coherence: Option<PathBuf>,
}

fn first_present(dir: &Path, names: &[&str], stage: &str) -> Result<PathBuf> {
    names
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.exists())
        .ok_or_else(|| SenecaError::MissingCheckpoint {
            stage: stage.to_string(),
            path: dir.join(names[names.len() - 1]).display().to_string(),
        })
}

impl PipelineModels {
    /// Loads the newest selector and generator in `dir` (connector and RL
    /// checkpoints win over their pretrained versions), plus the coherence
    /// model when present.
    pub fn load(dir: &Path, cfg: &PipelineConfig, vocab: Vocabulary, lexicon: Lexicon) -> Result<(Self, CheckpointPaths)> {
        let sel_path = first_present(dir, &[super::SELECTOR_CONNECTED, super::SELECTOR], "train-selector")?;
        let gen_path = first_present(dir, &[super::GENERATOR_RL, super::GENERATOR_ML], "train-generator-ml")?;
        let mut selector = Selector::new(cfg.selector(), vocab.clone(), 0)?;
        selector.load(&sel_path)?;
        let mut generator = Generator::new(cfg.generator(), vocab.clone(), 0)?;
        generator.load(&gen_path)?;
        let coh_path = dir.join(super::COHERENCE);
        let coherence = if coh_path.exists() {
            let mut m = CoherenceModel::new(cfg.coherence(), vocab, 0)?;
            m.load(&coh_path)?;
            Some(m)
        } else {
            None
        };
        let paths = CheckpointPaths {
            selector: sel_path,
            generator: gen_path,
            coherence: coherence.as_ref().map(|_| coh_path),
        };
        Ok((
            PipelineModels {
                selector,
                generator,
                coherence,
                lexicon,
            },
            paths,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndSummary {
    pub id: String,
    pub extraction: Vec<usize>,
    pub tokens: Vec<String>,
    pub sentences: Vec<Vec<String>>,
    /// `summary_coherence` of the output, when a coherence model is loaded.
    pub coherence: Option<f64>,
}

/// Clusters, selects, rewrites. An empty selection falls back to the first
/// sentence.
pub fn summarize_end_to_end(article: &Article, models: &PipelineModels, cfg: &InferenceConfig) -> Result<EndToEndSummary> {
    let input = SelectorInput::from_article(article, &models.lexicon, cfg.salient_k)?;
    let picked = models.selector.select_sentences(&input, cfg.max_select_steps)?;
    let extraction = extraction_or_lead(&picked.indices);
    let ext = ExtractedInput::from_selection(&article.id, &article.sentences, &extraction, &models.generator.vocab)?;
    let out = models.generator.decode(&ext, cfg.beam, cfg.max_len, cfg.alpha)?;
    let sentences = out.sentences();
    let coherence = models
        .coherence
        .as_ref()
        .map(|m| summary_coherence(m, &sentences))
        .transpose()?;
    Ok(EndToEndSummary {
        id: article.id.clone(),
        extraction,
        tokens: out.tokens,
        sentences,
        coherence,
    })
}
