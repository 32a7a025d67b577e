//! Abstract generator: biLSTM encoder over the extracted sentences, LSTM
//! decoder with additive attention and a pointer-generator copy gate,
//! teacher-forced training, self-critical policy-gradient training and
//! beam search with trigram blocking and length normalization.

use std::collections::HashMap;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use seneca_tensor::{
    checkpoint, Adam, AdamConfig, AdditiveAttention, BiLstm, Embedding, Graph, Linear, LstmCell,
    LstmState, ParamStore, Tensor, Var,
};

use crate::coherence::{summary_coherence, CoherenceModel};
use crate::error::{Result, SenecaError};
use crate::metrics::rouge_reward;
use crate::rewards::{apposition_reward, mix_reward, referential_clarity_reward, RewardBreakdown, RewardConfig};
use crate::textproc::{split_sentences, Lexicon, Vocabulary, PAD_ID, START_ID, STOP, STOP_ID, UNK_ID};

pub const DEFAULT_MAX_LEN: usize = 60;
pub const DEFAULT_SAMPLES_PER_ITEM: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub embedding_dim: usize,
    /// Encoder size per direction.
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub attention_dim: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            embedding_dim: 128,
            encoder_hidden: 256,
            decoder_hidden: 256,
            attention_dim: 256,
        }
    }
}

/// Extracted sentences flattened in selection order, with source tokens
/// missing from the vocabulary given temporary ids `V, V+1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedInput {
    pub article_id: String,
    pub tokens: Vec<String>,
    /// Extended id of every source position.
    pub ext_ids: Vec<usize>,
    /// Source tokens outside the vocabulary; `oovs[k]` has id `V + k`.
    pub oovs: Vec<String>,
}

impl ExtractedInput {
    pub fn new(article_id: impl Into<String>, tokens: Vec<String>, vocab: &Vocabulary) -> Self {
        let v = vocab.len();
        let mut oovs: Vec<String> = Vec::new();
        let ext_ids = tokens
            .iter()
            .map(|t| match vocab.get(t) {
                Some(id) => id,
                None => match oovs.iter().position(|o| o == t) {
                    Some(k) => v + k,
                    None => {
                        oovs.push(t.clone());
                        v + oovs.len() - 1
                    }
                },
            })
            .collect();
        ExtractedInput {
            article_id: article_id.into(),
            tokens,
            ext_ids,
            oovs,
        }
    }

    /// Concatenates `selected` sentences in the given (selection) order.
    pub fn from_selection(
        article_id: impl Into<String>,
        sentences: &[Vec<String>],
        selected: &[usize],
        vocab: &Vocabulary,
    ) -> Result<Self> {
        let id = article_id.into();
        let mut tokens = Vec::new();
        for &i in selected {
            let s = sentences.get(i).ok_or_else(|| SenecaError::LabelOutOfBounds {
                article: id.clone(),
                index: i,
                sentences: sentences.len(),
            })?;
            tokens.extend(s.iter().cloned());
        }
        Ok(Self::new(id, tokens, vocab))
    }

    pub fn extended_size(&self, vocab: &Vocabulary) -> usize {
        vocab.len() + self.oovs.len()
    }

    /// Target id for a reference token: vocabulary id, else a source OOV
    /// id, else UNK.
    pub fn target_id(&self, token: &str, vocab: &Vocabulary) -> usize {
        vocab.get(token).unwrap_or_else(|| {
            self.oovs
                .iter()
                .position(|o| o == token)
                .map_or(UNK_ID, |k| vocab.len() + k)
        })
    }

    pub fn token_of(&self, id: usize, vocab: &Vocabulary) -> String {
        if id < vocab.len() {
            vocab.token(id).to_string()
        } else {
            self.oovs[id - vocab.len()].clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Sampled,
    Beam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedSummary {
    /// Emitted tokens, without the stop token.
    pub tokens: Vec<String>,
    pub ids: Vec<usize>,
    /// Log-probability of each emitted id (and of stop, when reached).
    pub log_probs: Vec<f64>,
    pub mode: DecodeMode,
}

impl DecodedSummary {
    pub fn sentences(&self) -> Vec<Vec<String>> {
        split_sentences(&self.tokens)
    }
}

/// Encoder output for one input.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    /// `[T x 2*encoder_hidden]`
    pub states: Var,
    keys: Var,
    pub init: LstmState,
}

#[derive(Debug, Clone, Copy)]
pub struct GenStep {
    /// `[1 x (V + oovs)]` mixed distribution.
    pub dist: Var,
    pub p_gen: Var,
    pub attention: Var,
    pub state: LstmState,
}

/// `p_gen · [vocab; 0] + (1 - p_gen) · scatter(attention, ext_ids)`.
pub fn mix_copy_distribution(
    g: &mut Graph,
    vocab_probs: Var,
    attention: Var,
    p_gen: Var,
    ext_ids: &[usize],
    extended_size: usize,
) -> Result<Var> {
    let v = g.value(vocab_probs).len();
    let all: Vec<usize> = (0..v).collect();
    let padded = g.scatter(vocab_probs, &all, extended_size)?;
    let copied = g.scatter(attention, ext_ids, extended_size)?;
    let gen = g.mul(padded, p_gen)?;
    let q = g.one_minus(p_gen);
    let copy = g.mul(copied, q)?;
    Ok(g.add(gen, copy)?)
}

#[derive(Debug, Clone)]
pub struct Generator {
    pub config: GeneratorConfig,
    pub store: ParamStore,
    pub vocab: Vocabulary,
    embedding: Embedding,
    encoder: BiLstm,
    init: Linear,
    decoder: LstmCell,
    attention: AdditiveAttention,
    hidden: Linear,
    output: Linear,
    gate: Linear,
}

impl Generator {
    pub fn new(config: GeneratorConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = &mut rng;
        let mut store = ParamStore::new();
        let s = &mut store;
        let c = &config;
        let e = 2 * c.encoder_hidden;
        let d = c.decoder_hidden;
        Ok(Generator {
            embedding: Embedding::new(s, "gen.emb", vocab.len(), c.embedding_dim, r)?,
            encoder: BiLstm::new(s, "gen.encoder", c.embedding_dim, c.encoder_hidden, r)?,
            init: Linear::new(s, "gen.init", e, d, true, r)?,
            decoder: LstmCell::new(s, "gen.decoder", c.embedding_dim, d, r)?,
            attention: AdditiveAttention::new(s, "gen.attn", d, e, c.attention_dim, r)?,
            hidden: Linear::new(s, "gen.hidden", d + e, d, true, r)?,
            output: Linear::new(s, "gen.output", d, vocab.len(), true, r)?,
            gate: Linear::new(s, "gen.gate", e + d + c.embedding_dim, 1, true, r)?,
            config,
            store,
            vocab,
        })
    }

    fn embed_id(&self, id: usize) -> usize {
        if id < self.vocab.len() {
            id
        } else {
            UNK_ID
        }
    }

    pub fn encode(&self, g: &mut Graph, input: &ExtractedInput) -> Result<Encoded> {
        if input.tokens.is_empty() {
            return Err(SenecaError::EmptyInput(format!(
                "extracted input for `{}`",
                input.article_id
            )));
        }
        let ids: Vec<usize> = input.ext_ids.iter().map(|&i| self.embed_id(i)).collect();
        let x = self.embedding.forward(g, &ids)?;
        let out = self.encoder.run(g, x)?;
        let ends = g.concat_cols(&[out.last_forward.h, out.last_backward.h])?;
        let h = self.init.forward(g, ends)?;
        let h = g.tanh(h);
        let c = g.input(Tensor::zeros(&[1, self.config.decoder_hidden]));
        let keys = self.attention.project_keys(g, out.states)?;
        Ok(Encoded {
            states: out.states,
            keys,
            init: LstmState { h, c },
        })
    }

    /// One decoder step fed with extended id `prev` (OOVs embed as UNK).
    pub fn generate_step(
        &self,
        g: &mut Graph,
        input: &ExtractedInput,
        enc: &Encoded,
        prev: usize,
        state: LstmState,
    ) -> Result<GenStep> {
        let x = self.embedding.forward(g, &[self.embed_id(prev)])?;
        let state = self.decoder.step(g, x, state)?;
        let logits = self.attention.logits(g, state.h, enc.keys)?;
        let attention = g.softmax(logits);
        let ctx = g.matmul(attention, enc.states)?;
        let sc = g.concat_cols(&[state.h, ctx])?;
        let hid = self.hidden.forward(g, sc)?;
        let hid = g.tanh(hid);
        let out = self.output.forward(g, hid)?;
        let vocab_probs = g.softmax(out);
        let gate_in = g.concat_cols(&[ctx, state.h, x])?;
        let gate = self.gate.forward(g, gate_in)?;
        let p_gen = g.sigmoid(gate);
        let dist = mix_copy_distribution(
            g,
            vocab_probs,
            attention,
            p_gen,
            &input.ext_ids,
            input.extended_size(&self.vocab),
        )?;
        Ok(GenStep {
            dist,
            p_gen,
            attention,
            state,
        })
    }

    /// Extended target ids for a reference, ending with stop.
    pub fn target_ids<S: AsRef<str>>(&self, input: &ExtractedInput, reference: &[S]) -> Vec<usize> {
        let mut ids: Vec<usize> = reference
            .iter()
            .map(|t| input.target_id(t.as_ref(), &self.vocab))
            .collect();
        ids.push(STOP_ID);
        ids
    }

    /// Teacher-forced `-Σ_t log p(y_t | y_<t)`; the gold previous token is
    /// always fed. Returns the summed NLL and the number of target tokens.
    pub fn sequence_nll(&self, g: &mut Graph, input: &ExtractedInput, targets: &[usize]) -> Result<Var> {
        let enc = self.encode(g, input)?;
        self.nll_from(g, input, &enc, targets)
    }

    fn nll_from(&self, g: &mut Graph, input: &ExtractedInput, enc: &Encoded, targets: &[usize]) -> Result<Var> {
        let mut state = enc.init;
        let mut prev = START_ID;
        let mut terms = Vec::with_capacity(targets.len());
        for &y in targets {
            let step = self.generate_step(g, input, enc, prev, state)?;
            let p = g.pick(step.dist, y)?;
            terms.push(g.log(p));
            state = step.state;
            prev = y;
        }
        let stacked = g.concat_rows(&terms)?;
        let total = g.sum(stacked);
        Ok(g.scale(total, -1.0))
    }

    fn finish(&self, input: &ExtractedInput, ids: Vec<usize>, log_probs: Vec<f64>, mode: DecodeMode) -> DecodedSummary {
        let tokens = ids.iter().map(|&i| input.token_of(i, &self.vocab)).collect();
        DecodedSummary {
            tokens,
            ids,
            log_probs,
            mode,
        }
    }

    /// Greedy decoding. With `block_trigrams`, any token that would repeat
    /// a trigram of the hypothesis is excluded.
    pub fn greedy(&self, input: &ExtractedInput, max_len: usize, block_trigrams: bool) -> Result<DecodedSummary> {
        let mut g = Graph::new(&self.store);
        let enc = self.encode(&mut g, input)?;
        let mut state = enc.init;
        let mut prev = START_ID;
        let (mut ids, mut lps) = (Vec::new(), Vec::new());
        for _ in 0..max_len {
            let step = self.generate_step(&mut g, input, &enc, prev, state)?;
            let dist = g.value(step.dist).data();
            let Some((best, p)) = best_allowed(dist, &ids, block_trigrams) else {
                break;
            };
            lps.push(p.ln());
            if best == STOP_ID {
                break;
            }
            ids.push(best);
            state = step.state;
            prev = best;
        }
        Ok(self.finish(input, ids, lps, DecodeMode::Greedy))
    }

    /// Beam search with trigram blocking; finished hypotheses are ranked by
    /// `log p / len^alpha` (len counts emitted tokens, at least 1).
    pub fn beam_search(&self, input: &ExtractedInput, beam: usize, max_len: usize, alpha: f64) -> Result<DecodedSummary> {
        let beam = beam.max(1);
        let mut g = Graph::new(&self.store);
        let enc = self.encode(&mut g, input)?;
        struct Hyp {
            ids: Vec<usize>,
            lps: Vec<f64>,
            score: f64,
            state: LstmState,
        }
        let mut live = vec![Hyp {
            ids: Vec::new(),
            lps: Vec::new(),
            score: 0.0,
            state: enc.init,
        }];
        let mut finished: Vec<(Vec<usize>, Vec<f64>, f64)> = Vec::new();
        for _ in 0..max_len {
            let mut cands: Vec<(f64, usize, usize, f64)> = Vec::new();
            let mut states = Vec::with_capacity(live.len());
            for (h, hyp) in live.iter().enumerate() {
                let prev = hyp.ids.last().copied().unwrap_or(START_ID);
                let step = self.generate_step(&mut g, input, &enc, prev, hyp.state)?;
                states.push(step.state);
                let dist = g.value(step.dist).data();
                for (tok, &p) in dist.iter().enumerate() {
                    if !allowed(tok, &hyp.ids, true) || p <= 0.0 {
                        continue;
                    }
                    cands.push((hyp.score + p.ln(), h, tok, p.ln()));
                }
            }
            // best first; ties to the earlier hypothesis, then the lower id
            cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut next = Vec::with_capacity(beam);
            for (score, h, tok, lp) in cands.into_iter().take(beam) {
                let mut lps = live[h].lps.clone();
                lps.push(lp);
                if tok == STOP_ID {
                    finished.push((live[h].ids.clone(), lps, score));
                } else {
                    let mut ids = live[h].ids.clone();
                    ids.push(tok);
                    next.push(Hyp {
                        ids,
                        lps,
                        score,
                        state: states[h],
                    });
                }
            }
            live = next;
            if finished.len() >= beam || live.is_empty() {
                break;
            }
        }
        for hyp in live {
            if finished.len() >= beam {
                break;
            }
            finished.push((hyp.ids, hyp.lps, hyp.score));
        }
        let norm = |ids: &Vec<usize>, score: f64| score / (ids.len().max(1) as f64).powf(alpha);
        let best = finished
            .into_iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                norm(&a.0, a.2)
                    .total_cmp(&norm(&b.0, b.2))
                    .then(ib.cmp(ia))
            })
            .map(|(_, f)| f)
            .unwrap_or_default();
        Ok(self.finish(input, best.0, best.1, DecodeMode::Beam))
    }

    /// Beam search, or greedy decoding when `beam <= 1`.
    pub fn decode(&self, input: &ExtractedInput, beam: usize, max_len: usize, alpha: f64) -> Result<DecodedSummary> {
        if beam <= 1 {
            self.greedy(input, max_len, true)
        } else {
            self.beam_search(input, beam, max_len, alpha)
        }
    }

    /// Samples a summary from the mixed distribution at temperature 1 while
    /// recording `log p(y^s)` on the graph.
    pub fn sample_on_graph<R: Rng>(
        &self,
        g: &mut Graph,
        input: &ExtractedInput,
        enc: &Encoded,
        max_len: usize,
        rng: &mut R,
    ) -> Result<(DecodedSummary, Var)> {
        let mut state = enc.init;
        let mut prev = START_ID;
        let (mut ids, mut lps, mut terms) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..max_len {
            let step = self.generate_step(g, input, enc, prev, state)?;
            let dist = g.value(step.dist).data();
            let tok = WeightedIndex::new(dist)
                .map_err(|e| SenecaError::InvalidArgument(format!("generator distribution: {e}")))?
                .sample(rng);
            lps.push(dist[tok].ln());
            let p = g.pick(step.dist, tok)?;
            terms.push(g.log(p));
            if tok == STOP_ID {
                break;
            }
            ids.push(tok);
            state = step.state;
            prev = tok;
        }
        let stacked = g.concat_rows(&terms)?;
        let logp = g.sum(stacked);
        Ok((self.finish(input, ids, lps, DecodeMode::Sampled), logp))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(checkpoint::save(&self.store, path)?)
    }

    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        Ok(checkpoint::load(&mut self.store, path)?)
    }
}

fn allowed(tok: usize, hyp: &[usize], block_trigrams: bool) -> bool {
    if tok == PAD_ID || tok == START_ID {
        return false;
    }
    !(block_trigrams && tok != STOP_ID && repeats_trigram(hyp, tok))
}

/// Whether appending `next` to `hyp` creates a trigram already in `hyp`.
pub fn repeats_trigram(hyp: &[usize], next: usize) -> bool {
    let n = hyp.len();
    if n < 2 {
        return false;
    }
    let (a, b) = (hyp[n - 2], hyp[n - 1]);
    hyp.windows(3).any(|w| w[0] == a && w[1] == b && w[2] == next)
}

fn best_allowed(dist: &[f64], hyp: &[usize], block: bool) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (tok, &p) in dist.iter().enumerate() {
        if p > 0.0 && allowed(tok, hyp, block) && best.is_none_or(|(_, b)| p > b) {
            best = Some((tok, p));
        }
    }
    best
}

/// Whether a token sequence contains the same trigram twice.
pub fn has_repeated_trigram<S: AsRef<str> + Eq + std::hash::Hash>(tokens: &[S]) -> bool {
    let mut seen = std::collections::HashSet::new();
    tokens.windows(3).any(|w| !seen.insert((&w[0], &w[1], &w[2])))
}

/// An extracted input paired with its reference summary sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub input: ExtractedInput,
    pub reference: Vec<Vec<String>>,
}

impl TrainingPair {
    pub fn reference_tokens(&self) -> Vec<String> {
        self.reference.concat()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for MlTrainConfig {
    fn default() -> Self {
        MlTrainConfig {
            epochs: 10,
            lr: 1e-3,
            batch_size: 32,
            clip_norm: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlTrainReport {
    /// Mean per-token NLL per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

/// Teacher-forced maximum likelihood. Pairs with an empty reference are
/// skipped and reported.
pub fn train_ml(model: &mut Generator, pairs: &[TrainingPair], cfg: &MlTrainConfig) -> Result<MlTrainReport> {
    let mut warnings = Vec::new();
    let usable: Vec<&TrainingPair> = pairs
        .iter()
        .filter(|p| {
            let ok = !p.reference_tokens().is_empty();
            if !ok {
                warnings.push(format!("skipped `{}`: empty reference", p.input.article_id));
            }
            ok
        })
        .collect();
    if usable.is_empty() {
        return Err(SenecaError::EmptyInput("generator training batch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(AdamConfig {
        lr: cfg.lr,
        clip_norm: Some(cfg.clip_norm),
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut nll, mut count) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let grads = {
                let mut g = Graph::new(&model.store);
                let mut losses = Vec::with_capacity(batch.len());
                let mut tokens = 0;
                for &i in batch {
                    let p = usable[i];
                    let targets = model.target_ids(&p.input, &p.reference_tokens());
                    tokens += targets.len();
                    let l = model.sequence_nll(&mut g, &p.input, &targets)?;
                    nll += g.value(l).item();
                    losses.push(l);
                }
                count += tokens;
                let stacked = g.concat_rows(&losses)?;
                let total = g.sum(stacked);
                let mean = g.scale(total, 1.0 / tokens as f64);
                g.backward(mean)?
            };
            model.store.accumulate(&grads);
            opt.step(&mut model.store)?;
        }
        epoch_losses.push(nll / count as f64);
    }
    Ok(MlTrainReport {
        epoch_losses,
        steps: opt.steps(),
        skipped: pairs.len() - usable.len(),
        warnings,
    })
}

/// Summary-level reward: ROUGE (mean of ROUGE-L and ROUGE-2 F1) mixed with
/// the enabled coherence and rule terms.
#[derive(Clone, Copy)]
pub struct MixedReward<'a> {
    pub config: RewardConfig,
    pub coherence: Option<&'a CoherenceModel>,
    pub lexicon: &'a Lexicon,
}

impl MixedReward<'_> {
    pub fn score(&self, summary: &[String], reference: &[Vec<String>]) -> Result<RewardBreakdown> {
        let flat = reference.concat();
        let r_rouge = rouge_reward(summary, &flat);
        let sents = split_sentences(summary);
        let r_coh = match (self.config.use_coh, self.coherence) {
            (true, Some(m)) => summary_coherence(m, &sents)?,
            (true, None) => {
                return Err(SenecaError::InvalidArgument(
                    "coherence reward enabled without a coherence model".into(),
                ))
            }
            _ => 0.0,
        };
        let r_ref = referential_clarity_reward(&sents, self.lexicon);
        let r_app = apposition_reward(&sents);
        Ok(mix_reward(r_rouge, r_coh, r_ref, r_app, &self.config))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub samples_per_item: usize,
    pub clip_norm: f64,
    pub max_len: usize,
    /// Decode the baseline with trigram blocking, as at inference time.
    pub block_trigrams_baseline: bool,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            lr: 1e-4,
            batch_size: 10,
            samples_per_item: DEFAULT_SAMPLES_PER_ITEM,
            clip_norm: 2.0,
            max_len: DEFAULT_MAX_LEN,
            block_trigrams_baseline: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RlStepStats {
    pub loss: f64,
    pub mean_sample_reward: f64,
    pub mean_baseline_reward: f64,
    /// True when every advantage was zero and no update was made.
    pub skipped: bool,
}

/// One self-critical update:
/// `loss = -(1/N') Σ (R(y^s) - R(ŷ)) log p(y^s)` over `samples_per_item`
/// samples per item, with `ŷ` the greedy decode (trigram-blocked unless
/// disabled in the config).
pub fn self_critical_step<R, F>(
    model: &mut Generator,
    opt: &mut Adam,
    batch: &[&TrainingPair],
    cfg: &RlConfig,
    reward: F,
    rng: &mut R,
) -> Result<RlStepStats>
where
    R: Rng,
    F: Fn(&[String], &[Vec<String>]) -> Result<f64>,
{
    if batch.is_empty() {
        return Err(SenecaError::EmptyInput("self-critical batch".into()));
    }
    let mut stats = RlStepStats::default();
    let grads = {
        let mut g = Graph::new(&model.store);
        let mut terms = Vec::new();
        let mut any_nonzero = false;
        for pair in batch {
            let baseline = model.greedy(&pair.input, cfg.max_len, cfg.block_trigrams_baseline)?;
            let rb = reward(&baseline.tokens, &pair.reference)?;
            stats.mean_baseline_reward += rb;
            let enc = model.encode(&mut g, &pair.input)?;
            for _ in 0..cfg.samples_per_item {
                let (sample, logp) = model.sample_on_graph(&mut g, &pair.input, &enc, cfg.max_len, rng)?;
                let rs = reward(&sample.tokens, &pair.reference)?;
                stats.mean_sample_reward += rs;
                let adv = rs - rb;
                any_nonzero |= adv != 0.0;
                terms.push(g.scale(logp, -adv));
            }
        }
        let n = (batch.len() * cfg.samples_per_item) as f64;
        stats.mean_baseline_reward /= batch.len() as f64;
        stats.mean_sample_reward /= n;
        let stacked = g.concat_rows(&terms)?;
        let total = g.sum(stacked);
        let loss = g.scale(total, 1.0 / n);
        stats.loss = g.value(loss).item();
        if !any_nonzero {
            stats.skipped = true;
            return Ok(stats);
        }
        g.backward(loss)?
    };
    model.store.accumulate(&grads);
    opt.step(&mut model.store)?;
    Ok(stats)
}

/// Runs `steps` self-critical updates over `pairs`, cycling through a
/// seeded shuffle in batches.
pub fn train_rl<F>(
    model: &mut Generator,
    pairs: &[TrainingPair],
    cfg: &RlConfig,
    steps: usize,
    seed: u64,
    reward: F,
) -> Result<Vec<RlStepStats>>
where
    F: Fn(&[String], &[Vec<String>]) -> Result<f64>,
{
    if pairs.is_empty() {
        return Err(SenecaError::EmptyInput("RL training pairs".into()));
    }
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
        while batch.len() < cfg.batch_size.min(pairs.len()) {
            if order.is_empty() {
                order = (0..pairs.len()).collect();
                order.shuffle(&mut rng);
            }
            batch.push(&pairs[order.pop().expect("refilled")]);
        }
        out.push(self_critical_step(model, &mut opt, &batch, cfg, &reward, &mut rng)?);
    }
    Ok(out)
}

/// Renders tokens to a single string with the stop token removed.
pub fn detokenize(tokens: &[String]) -> String {
    tokens
        .iter()
        .filter(|t| t.as_str() != STOP)
        .cloned()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Vocabulary-space counts, useful in tests and diagnostics.
pub fn token_histogram(tokens: &[String]) -> HashMap<&str, usize> {
    let mut h = HashMap::new();
    for t in tokens {
        *h.entry(t.as_str()).or_insert(0) += 1;
    }
    h
}
