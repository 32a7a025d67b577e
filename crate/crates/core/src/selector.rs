//! Entity-aware content selector: convolutional entity and sentence
//! encoders over a shared embedding, a biLSTM over sentence vectors, and a
//! pointer decoder with entity attention and a glimpse over the article.
//!
//! Candidate `j` (or the stop key) is scored as
//! `v · tanh(W1 s_t + W2 c_t + W3 c^e_t + W4 k_j)`, with `k_j = h_j` for
//! sentences. The per-candidate term is what lets the two contexts
//! condition the ranking; see the crate's decisions log.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use seneca_tensor::{
    checkpoint, Adam, AdamConfig, AdditiveAttention, BiLstm, ConvEncoder, Embedding, Graph, Linear,
    LstmCell, LstmState, ParamId, ParamStore, Tensor, Var,
};

use crate::error::{Result, SenecaError};
use crate::textproc::{
    cluster_to_token_sequence, extract_mention_clusters, select_salient_clusters, Article, Lexicon,
    Vocabulary,
};

pub const DEFAULT_MAX_STEPS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub embedding_dim: usize,
    pub conv_widths: Vec<usize>,
    pub filters_per_width: usize,
    /// Article biLSTM size per direction.
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub attention_dim: usize,
    /// Mask already-picked sentences in later steps.
    pub mask_repeats: bool,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            embedding_dim: 128,
            conv_widths: vec![1, 2, 3, 4],
            filters_per_width: 25,
            encoder_hidden: 256,
            decoder_hidden: 256,
            attention_dim: 256,
            mask_repeats: true,
        }
    }
}

/// Tokenized sentences plus the token sequences of the salient entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorInput {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
    pub entities: Vec<Vec<String>>,
}

impl SelectorInput {
    /// Clusters the article and keeps the `k` most salient entities.
    pub fn from_article(article: &Article, lex: &Lexicon, k: usize) -> Result<Self> {
        let clusters = extract_mention_clusters(article, lex);
        let entities = select_salient_clusters(&clusters, k)
            .iter()
            .map(cluster_to_token_sequence)
            .collect::<Result<Vec<_>>>()?;
        Ok(SelectorInput {
            id: article.id.clone(),
            sentences: article.sentences.clone(),
            entities,
        })
    }
}

/// Graph handles for one encoded article.
#[derive(Debug, Clone, Copy)]
pub struct EncodedArticle {
    /// `[S x conv]`
    pub sentence_reprs: Var,
    /// `[S x 2*encoder_hidden]`
    pub article_states: Var,
    /// `[E x conv]`, `None` when E = 0.
    pub entity_reprs: Option<Var>,
    pub num_sentences: usize,
    pub num_entities: usize,
    entity_keys: Option<Var>,
    glimpse_keys: Var,
    pointer_keys: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutput {
    /// `[1 x (S+1)]`; the last entry is stop.
    pub probs: Var,
    pub state: LstmState,
    /// `[1 x E]` entity attention, when entities exist.
    pub entity_attention: Option<Var>,
    /// `[1 x S]` glimpse attention.
    pub glimpse_attention: Var,
    pub entity_context: Var,
    pub glimpse: Var,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorOutput {
    /// Picked sentence indices in decode order.
    pub indices: Vec<usize>,
    /// Distribution over sentences and stop at every step taken.
    pub distributions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Selector {
    pub config: SelectorConfig,
    pub store: ParamStore,
    pub vocab: Vocabulary,
    embedding: Embedding,
    entity_encoder: ConvEncoder,
    sentence_encoder: ConvEncoder,
    article_encoder: BiLstm,
    init: Linear,
    decoder: LstmCell,
    start: ParamId,
    stop_key: ParamId,
    entity_attention: AdditiveAttention,
    glimpse_query: Linear,
    glimpse_key: Linear,
    glimpse_v: ParamId,
    ptr_state: Linear,
    ptr_glimpse: Linear,
    ptr_entity: Linear,
    ptr_key: Linear,
    ptr_v: ParamId,
}

impl Selector {
    pub fn new(config: SelectorConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = &mut rng;
        let mut store = ParamStore::new();
        let s = &mut store;
        let c = &config;
        let embedding = Embedding::new(s, "sel.emb", vocab.len(), c.embedding_dim, r)?;
        let entity_encoder =
            ConvEncoder::new(s, "sel.ent_conv", c.embedding_dim, &c.conv_widths, c.filters_per_width, r)?;
        let sentence_encoder =
            ConvEncoder::new(s, "sel.sent_conv", c.embedding_dim, &c.conv_widths, c.filters_per_width, r)?;
        let conv = sentence_encoder.output_dim();
        let article_encoder = BiLstm::new(s, "sel.article", conv, c.encoder_hidden, r)?;
        let hd = 2 * c.encoder_hidden;
        let (d, a) = (c.decoder_hidden, c.attention_dim);
        Ok(Selector {
            init: Linear::new(s, "sel.init", hd, d, true, r)?,
            decoder: LstmCell::new(s, "sel.decoder", hd, d, r)?,
            start: s.add_uniform("sel.start", &[1, hd], 0.1, r)?,
            stop_key: s.add_uniform("sel.stop_key", &[1, hd], 0.1, r)?,
            entity_attention: AdditiveAttention::new(s, "sel.ent_attn", d, conv, a, r)?,
            glimpse_query: Linear::new(s, "sel.glimpse.query", d, a, true, r)?,
            glimpse_key: Linear::new(s, "sel.glimpse.key", hd, a, false, r)?,
            glimpse_v: s.add_xavier("sel.glimpse.v", a, 1, r)?,
            ptr_state: Linear::new(s, "sel.ptr.state", d, a, true, r)?,
            ptr_glimpse: Linear::new(s, "sel.ptr.glimpse", a, a, false, r)?,
            ptr_entity: Linear::new(s, "sel.ptr.entity", conv, a, false, r)?,
            ptr_key: Linear::new(s, "sel.ptr.key", hd, a, false, r)?,
            ptr_v: s.add_xavier("sel.ptr.v", a, 1, r)?,
            embedding,
            entity_encoder,
            sentence_encoder,
            article_encoder,
            config,
            store,
            vocab,
        })
    }

    pub fn conv_dim(&self) -> usize {
        self.sentence_encoder.output_dim()
    }

    fn encode_tokens(&self, g: &mut Graph, enc: &ConvEncoder, tokens: &[String]) -> Result<Var> {
        if tokens.is_empty() {
            return Err(SenecaError::EmptyInput("selector token sequence".into()));
        }
        let x = self.embedding.forward(g, &self.vocab.ids(tokens))?;
        Ok(enc.forward(g, x)?)
    }

    pub fn encode_article(&self, g: &mut Graph, input: &SelectorInput) -> Result<EncodedArticle> {
        if input.sentences.is_empty() {
            return Err(SenecaError::EmptyInput(format!("article `{}`", input.id)));
        }
        let rs = input
            .sentences
            .iter()
            .map(|s| self.encode_tokens(g, &self.sentence_encoder, s))
            .collect::<Result<Vec<_>>>()?;
        let sentence_reprs = g.concat_rows(&rs)?;
        let article_states = self.article_encoder.run(g, sentence_reprs)?.states;
        let entity_reprs = if input.entities.is_empty() {
            None
        } else {
            let es = input
                .entities
                .iter()
                .map(|e| self.encode_tokens(g, &self.entity_encoder, e))
                .collect::<Result<Vec<_>>>()?;
            Some(g.concat_rows(&es)?)
        };
        let entity_keys = match entity_reprs {
            Some(e) => Some(self.entity_attention.project_keys(g, e)?),
            None => None,
        };
        let glimpse_keys = self.glimpse_key.forward(g, article_states)?;
        let stop = g.param(self.stop_key);
        let candidates = g.concat_rows(&[article_states, stop])?;
        let pointer_keys = self.ptr_key.forward(g, candidates)?;
        Ok(EncodedArticle {
            sentence_reprs,
            article_states,
            entity_reprs,
            num_sentences: input.sentences.len(),
            num_entities: input.entities.len(),
            entity_keys,
            glimpse_keys,
            pointer_keys,
        })
    }

    /// Decoder state before the first step: `h0 = tanh(W mean_j h_j)`, `c0 = 0`.
    pub fn initial_state(&self, g: &mut Graph, enc: &EncodedArticle) -> Result<LstmState> {
        let mean = g.mean_rows(enc.article_states)?;
        let h = self.init.forward(g, mean)?;
        let h = g.tanh(h);
        let c = g.input(Tensor::zeros(&[1, self.config.decoder_hidden]));
        Ok(LstmState { h, c })
    }

    /// Decoder input for the step after picking `prev` (`None` at the start).
    pub fn step_input(&self, g: &mut Graph, enc: &EncodedArticle, prev: Option<usize>) -> Result<Var> {
        match prev {
            None => Ok(g.param(self.start)),
            Some(j) => Ok(g.row(enc.article_states, j)?),
        }
    }

    /// One pointer step. `mask[j]` is false for excluded candidates; it has
    /// `S + 1` entries with stop last.
    pub fn decoder_step(
        &self,
        g: &mut Graph,
        enc: &EncodedArticle,
        input: Var,
        state: LstmState,
        mask: &[bool],
    ) -> Result<StepOutput> {
        let state = self.decoder.step(g, input, state)?;
        let s = state.h;
        let (entity_context, entity_attention) = match (enc.entity_reprs, enc.entity_keys) {
            (Some(e), Some(keys)) => {
                let logits = self.entity_attention.logits(g, s, keys)?;
                let a = g.softmax(logits);
                (g.matmul(a, e)?, Some(a))
            }
            _ => (g.input(Tensor::zeros(&[1, self.conv_dim()])), None),
        };
        let q = self.glimpse_query.forward(g, s)?;
        let z = g.add(enc.glimpse_keys, q)?;
        let z = g.tanh(z);
        let v = g.param(self.glimpse_v);
        let logits = g.matmul(z, v)?;
        let logits = g.transpose(logits);
        let glimpse_attention = g.softmax(logits);
        let glimpse = g.matmul(glimpse_attention, enc.glimpse_keys)?;

        let a = self.ptr_state.forward(g, s)?;
        let b = self.ptr_glimpse.forward(g, glimpse)?;
        let c = self.ptr_entity.forward(g, entity_context)?;
        let shared = g.add(a, b)?;
        let shared = g.add(shared, c)?;
        let z = g.add(enc.pointer_keys, shared)?;
        let z = g.tanh(z);
        let v = g.param(self.ptr_v);
        let scores = g.matmul(z, v)?;
        let scores = g.transpose(scores);
        let probs = g.softmax_masked(scores, mask)?;
        Ok(StepOutput {
            probs,
            state,
            entity_attention,
            glimpse_attention,
            entity_context,
            glimpse,
        })
    }

    fn mask_for(&self, n: usize, picked: &[usize]) -> Vec<bool> {
        let mut mask = vec![true; n + 1];
        if self.config.mask_repeats {
            for &p in picked {
                mask[p] = false;
            }
        }
        mask
    }

    fn validate(&self, input: &SelectorInput, labels: &[usize]) -> Result<()> {
        let n = input.sentences.len();
        for (k, &i) in labels.iter().enumerate() {
            if i >= n {
                return Err(SenecaError::LabelOutOfBounds {
                    article: input.id.clone(),
                    index: i,
                    sentences: n,
                });
            }
            if self.config.mask_repeats && labels[..k].contains(&i) {
                return Err(SenecaError::InvalidArgument(format!(
                    "label sequence for `{}` repeats sentence {i}",
                    input.id
                )));
            }
        }
        Ok(())
    }

    /// Teacher-forced `-Σ_t log p(y_t)` over `labels` followed by stop.
    pub fn sequence_nll(&self, g: &mut Graph, input: &SelectorInput, labels: &[usize]) -> Result<Var> {
        let lp = self.sequence_log_prob(g, input, labels, true)?;
        Ok(g.scale(lp, -1.0))
    }

    /// `Σ_t log p(picks_t)`, plus the stop step when `stopped`. A sequence
    /// cut off at the step limit has no stop term.
    pub fn sequence_log_prob(
        &self,
        g: &mut Graph,
        input: &SelectorInput,
        labels: &[usize],
        stopped: bool,
    ) -> Result<Var> {
        self.validate(input, labels)?;
        let enc = self.encode_article(g, input)?;
        let n = enc.num_sentences;
        let mut state = self.initial_state(g, &enc)?;
        let mut prev = None;
        let steps = labels.len() + usize::from(stopped);
        if steps == 0 {
            return Err(SenecaError::EmptyInput(format!("selection for `{}`", input.id)));
        }
        let mut terms = Vec::with_capacity(steps);
        for t in 0..steps {
            let target = labels.get(t).copied().unwrap_or(n);
            let x = self.step_input(g, &enc, prev)?;
            let out = self.decoder_step(g, &enc, x, state, &self.mask_for(n, &labels[..t]))?;
            let p = g.pick(out.probs, target)?;
            terms.push(g.log(p));
            state = out.state;
            prev = Some(target);
        }
        let stacked = g.concat_rows(&terms)?;
        Ok(g.sum(stacked))
    }

    fn decode<R: Rng>(
        &self,
        input: &SelectorInput,
        max_steps: usize,
        mut sampler: Option<&mut R>,
    ) -> Result<SelectorOutput> {
        let mut g = Graph::new(&self.store);
        let enc = self.encode_article(&mut g, input)?;
        let n = enc.num_sentences;
        let mut state = self.initial_state(&mut g, &enc)?;
        let mut out = SelectorOutput {
            indices: Vec::new(),
            distributions: Vec::new(),
        };
        let mut prev = None;
        for _ in 0..max_steps {
            let x = self.step_input(&mut g, &enc, prev)?;
            let step = self.decoder_step(&mut g, &enc, x, state, &self.mask_for(n, &out.indices))?;
            let probs = g.value(step.probs).data().to_vec();
            let pick = match sampler.as_deref_mut() {
                Some(rng) => WeightedIndex::new(&probs)
                    .map_err(|e| SenecaError::InvalidArgument(format!("selector distribution: {e}")))?
                    .sample(rng),
                None => argmax(&probs),
            };
            out.distributions.push(probs);
            if pick == n {
                break;
            }
            out.indices.push(pick);
            state = step.state;
            prev = Some(pick);
        }
        Ok(out)
    }

    /// Greedy extraction: argmax per step (ties to the lowest index) until
    /// stop or `max_steps` picks.
    pub fn select_sentences(&self, input: &SelectorInput, max_steps: usize) -> Result<SelectorOutput> {
        self.decode::<ChaCha8Rng>(input, max_steps, None)
    }

    /// Samples each step from its categorical distribution.
    pub fn sample_sentences<R: Rng>(
        &self,
        input: &SelectorInput,
        max_steps: usize,
        rng: &mut R,
    ) -> Result<SelectorOutput> {
        self.decode(input, max_steps, Some(rng))
    }

    /// First-step distribution over sentences and stop.
    pub fn first_step_distribution(&self, input: &SelectorInput) -> Result<Vec<f64>> {
        Ok(self
            .select_sentences(input, 1)?
            .distributions
            .swap_remove(0))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(checkpoint::save(&self.store, path)?)
    }

    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        Ok(checkpoint::load(&mut self.store, path)?)
    }
}

/// Index of the largest value; the earliest wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for SelectorTrainConfig {
    fn default() -> Self {
        SelectorTrainConfig {
            epochs: 10,
            lr: 1e-3,
            batch_size: 32,
            clip_norm: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorTrainReport {
    /// Mean per-article loss for each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
    /// Largest global gradient norm actually applied (after clipping).
    pub max_applied_norm: f64,
}

/// Cross-entropy training on `(input, label sequence)` pairs; each batch
/// loss is the mean over its articles.
pub fn train_selector(
    model: &mut Selector,
    data: &[(SelectorInput, Vec<usize>)],
    cfg: &SelectorTrainConfig,
) -> Result<SelectorTrainReport> {
    use rand::seq::SliceRandom;
    if data.is_empty() {
        return Err(SenecaError::EmptyInput("selector training data".into()));
    }
    for (input, labels) in data {
        model.validate(input, labels)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(AdamConfig {
        lr: cfg.lr,
        clip_norm: Some(cfg.clip_norm),
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = SelectorTrainReport {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        steps: 0,
        max_applied_norm: 0.0,
    };
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let grads = {
                let mut g = Graph::new(&model.store);
                let mut losses = Vec::with_capacity(batch.len());
                for &i in batch {
                    let (input, labels) = &data[i];
                    let l = model.sequence_nll(&mut g, input, labels)?;
                    total += g.value(l).item();
                    losses.push(l);
                }
                let stacked = g.concat_rows(&losses)?;
                let mean = g.mean_rows(stacked)?;
                g.backward(mean)?
            };
            model.store.accumulate(&grads);
            let stats = opt.step(&mut model.store)?;
            report.max_applied_norm = report.max_applied_norm.max(stats.applied_norm);
        }
        report.epoch_losses.push(total / data.len() as f64);
    }
    report.steps = opt.steps();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use seneca_tensor::gradcheck;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn small_config() -> SelectorConfig {
        SelectorConfig {
            embedding_dim: 6,
            conv_widths: vec![1, 2],
            filters_per_width: 3,
            encoder_hidden: 4,
            decoder_hidden: 5,
            attention_dim: 4,
            mask_repeats: true,
        }
    }

    fn input(sents: &[&str], ents: &[&str]) -> SelectorInput {
        SelectorInput {
            id: "t".into(),
            sentences: sents.iter().map(|s| toks(s)).collect(),
            entities: ents.iter().map(|s| toks(s)).collect(),
        }
    }

    fn vocab_for(inputs: &[&SelectorInput]) -> Vocabulary {
        let arts: Vec<Article> = inputs
            .iter()
            .map(|i| {
                let mut a = Article::from_tokens("v", i.sentences.clone());
                a.summary = i.entities.clone();
                a
            })
            .collect();
        Vocabulary::build(arts.iter(), 1000).unwrap()
    }

    fn toy() -> SelectorInput {
        input(
            &["john ahern said no .", "he left early .", "rain fell .", "mary kelly won ."],
            &["john ahern <ment> he", "mary kelly"],
        )
    }

    #[test]
    fn shapes_and_zero_entity_context() {
        let inp = toy();
        let m = Selector::new(small_config(), vocab_for(&[&inp]), 1).unwrap();
        let mut g = Graph::new(&m.store);
        let enc = m.encode_article(&mut g, &inp).unwrap();
        assert_eq!(g.value(enc.sentence_reprs).shape(), [4, 6]);
        assert_eq!(g.value(enc.article_states).shape(), [4, 8]);
        assert_eq!(g.value(enc.entity_reprs.unwrap()).shape(), [2, 6]);

        let mut bare = inp.clone();
        bare.entities.clear();
        let enc = m.encode_article(&mut g, &bare).unwrap();
        assert!(enc.entity_reprs.is_none());
        let st = m.initial_state(&mut g, &enc).unwrap();
        let x = m.step_input(&mut g, &enc, None).unwrap();
        let out = m.decoder_step(&mut g, &enc, x, st, &[true; 5]).unwrap();
        assert!(g.value(out.entity_context).data().iter().all(|&v| v == 0.0));
        assert!((g.value(out.probs).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_entity_context_is_that_entity() {
        let inp = input(&["a b .", "c d ."], &["john ahern"]);
        let m = Selector::new(small_config(), vocab_for(&[&inp]), 2).unwrap();
        let mut g = Graph::new(&m.store);
        let enc = m.encode_article(&mut g, &inp).unwrap();
        let st = m.initial_state(&mut g, &enc).unwrap();
        let x = m.step_input(&mut g, &enc, None).unwrap();
        let out = m.decoder_step(&mut g, &enc, x, st, &[true; 3]).unwrap();
        let e = g.value(enc.entity_reprs.unwrap()).data().to_vec();
        let c = g.value(out.entity_context).data().to_vec();
        for (a, b) in e.iter().zip(&c) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((g.value(out.glimpse_attention).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entity_text_only_changes_entity_reprs() {
        let a = toy();
        let mut b = a.clone();
        b.entities[1] = toks("rain");
        let m = Selector::new(small_config(), vocab_for(&[&a]), 3).unwrap();
        let mut g = Graph::new(&m.store);
        let ea = m.encode_article(&mut g, &a).unwrap();
        let eb = m.encode_article(&mut g, &b).unwrap();
        assert_eq!(g.value(ea.sentence_reprs), g.value(eb.sentence_reprs));
        assert_ne!(g.value(ea.entity_reprs.unwrap()), g.value(eb.entity_reprs.unwrap()));
    }

    #[test]
    fn empty_article_is_error() {
        let inp = input(&[], &[]);
        let m = Selector::new(small_config(), vocab_for(&[&toy()]), 3).unwrap();
        assert!(m.select_sentences(&inp, 6).is_err());
    }

    #[test]
    fn decoder_step_gradcheck() {
        let inp = input(&["a b c .", "d e .", "f g h i ."], &["a b", "e"]);
        let m = Selector::new(small_config(), vocab_for(&[&inp]), 4).unwrap();
        let report = gradcheck::check(&m.store, gradcheck::DEFAULT_STEP, |g| {
            m.sequence_nll(g, &inp, &[2, 0]).map_err(|e| match e {
                SenecaError::Tensor(t) => t,
                other => seneca_tensor::TensorError::InvalidArgument(other.to_string()),
            })
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn greedy_never_repeats_and_distributions_are_valid() {
        let inp = toy();
        for seed in 0..5 {
            let m = Selector::new(small_config(), vocab_for(&[&inp]), seed).unwrap();
            let out = m.select_sentences(&inp, 6).unwrap();
            let mut seen = out.indices.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), out.indices.len());
            for (t, d) in out.distributions.iter().enumerate() {
                assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for &p in &out.indices[..t.min(out.indices.len())] {
                    assert_eq!(d[p], 0.0);
                }
            }
            assert_eq!(out, m.select_sentences(&inp, 6).unwrap());
        }
    }

    #[test]
    fn label_errors() {
        let inp = toy();
        let mut m = Selector::new(small_config(), vocab_for(&[&inp]), 5).unwrap();
        let cfg = SelectorTrainConfig::default();
        assert!(matches!(
            train_selector(&mut m, &[(inp.clone(), vec![9])], &cfg),
            Err(SenecaError::LabelOutOfBounds { index: 9, .. })
        ));
        assert!(train_selector(&mut m, &[(inp, vec![1, 1])], &cfg).is_err());
    }

    #[test]
    fn memorizes_small_corpus_in_decode_order() {
        let data = vec![
            (toy(), vec![3, 0]),
            (input(&["x y .", "z w .", "q r ."], &["x"]), vec![1]),
            (input(&["m n .", "o p .", "s t .", "u v ."], &[]), vec![2, 3, 0]),
        ];
        let refs: Vec<&SelectorInput> = data.iter().map(|d| &d.0).collect();
        let mut m = Selector::new(small_config(), vocab_for(&refs), 6).unwrap();
        let cfg = SelectorTrainConfig {
            epochs: 200,
            lr: 1e-2,
            batch_size: 3,
            ..SelectorTrainConfig::default()
        };
        let report = train_selector(&mut m, &data, &cfg).unwrap();
        assert!(report.max_applied_norm <= 2.0 + 1e-9);
        assert!(report.epoch_losses.last().unwrap() < &report.epoch_losses[0]);
        for (inp, labels) in &data {
            assert_eq!(&m.select_sentences(inp, 6).unwrap().indices, labels);
        }
    }
}
