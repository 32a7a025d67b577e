//! Pairwise entity-based sentence coherence: training-triple construction,
//! a convolutional pair scorer with a tanh head, hinge-loss training, and
//! the Pairwise / Shuffle / Overlap diagnostic sets.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use seneca_tensor::{Adam, AdamConfig, ConvEncoder, Embedding, Graph, Linear, ParamStore, Var};

use crate::error::{Result, SenecaError};
use crate::textproc::{Article, Lexicon, MentionCluster, Vocabulary};

pub const DEFAULT_NEGATIVE_WINDOW: usize = 9;
pub const DEFAULT_SELF_REPETITION_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleProvenance {
    AdjacentEntity,
    SelfRepetition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceTriple {
    pub target: Vec<String>,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub provenance: TripleProvenance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleConfig {
    pub negative_window: usize,
    pub self_repetition_fraction: f64,
}

impl Default for TripleConfig {
    fn default() -> Self {
        TripleConfig {
            negative_window: DEFAULT_NEGATIVE_WINDOW,
            self_repetition_fraction: DEFAULT_SELF_REPETITION_FRACTION,
        }
    }
}

fn clusters_per_sentence(n: usize, clusters: &[MentionCluster]) -> Vec<BTreeSet<usize>> {
    let mut sets = vec![BTreeSet::new(); n];
    for c in clusters {
        for s in c.sentences() {
            if s < n {
                sets[s].insert(c.cluster_id);
            }
        }
    }
    sets
}

/// Triples for one article. `positives_seen` counts positives across the
/// whole stream so the self-repetition fraction is spread evenly.
fn article_triples<R: Rng>(
    article: &Article,
    clusters: &[MentionCluster],
    cfg: &TripleConfig,
    positives_seen: &mut usize,
    rng: &mut R,
    out: &mut Vec<CoherenceTriple>,
) {
    let n = article.sentences.len();
    let sets = clusters_per_sentence(n, clusters);
    for i in 0..n.saturating_sub(1) {
        if sets[i].is_disjoint(&sets[i + 1]) {
            continue;
        }
        let lo = i.saturating_sub(cfg.negative_window);
        let hi = (i + cfg.negative_window).min(n - 1);
        let candidates: Vec<usize> = (lo..=hi)
            .filter(|&j| j != i && sets[i].is_disjoint(&sets[j]))
            .collect();
        let target = &article.sentences[i];
        let positive = &article.sentences[i + 1];
        if let Some(&j) = candidates.choose(rng) {
            out.push(CoherenceTriple {
                target: target.clone(),
                positive: positive.clone(),
                negative: article.sentences[j].clone(),
                provenance: TripleProvenance::AdjacentEntity,
            });
        }
        // ceil((k+1)f) - ceil(kf) self-repetitions for the k-th positive
        let k = *positives_seen as f64;
        let f = cfg.self_repetition_fraction;
        let reps = ((k + 1.0) * f).ceil() as usize - (k * f).ceil() as usize;
        for _ in 0..reps {
            out.push(CoherenceTriple {
                target: target.clone(),
                positive: positive.clone(),
                negative: target.clone(),
                provenance: TripleProvenance::SelfRepetition,
            });
        }
        *positives_seen += 1;
    }
}

/// Builds triples from document-adjacent sentence pairs that share an
/// entity cluster. Negatives are drawn uniformly from sentences within the
/// window of the target that share no cluster with it.
pub fn build_coherence_triples(
    corpus: &[(Article, Vec<MentionCluster>)],
    cfg: &TripleConfig,
    seed: u64,
) -> Vec<CoherenceTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = 0;
    let mut out = Vec::new();
    for (article, clusters) in corpus {
        article_triples(article, clusters, cfg, &mut seen, &mut rng, &mut out);
    }
    out
}

pub fn write_triples_jsonl<W: Write>(triples: &[CoherenceTriple], mut out: W) -> Result<()> {
    for t in triples {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_triples_jsonl<R: BufRead>(input: R) -> Result<Vec<CoherenceTriple>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    pub embedding_dim: usize,
    pub conv_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub mlp_hidden: usize,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            embedding_dim: 32,
            conv_widths: vec![1, 2, 3],
            filters_per_width: 16,
            mlp_hidden: 64,
        }
    }
}

/// Scores `Coh(a, b)` in `[-1, 1]` from `[enc(a); enc(b); enc(a) - enc(b)]`
/// through a tanh MLP.
#[derive(Debug, Clone)]
pub struct CoherenceModel {
    pub config: CoherenceConfig,
    pub store: ParamStore,
    pub vocab: Vocabulary,
    embedding: Embedding,
    encoder: ConvEncoder,
    hidden: Linear,
    head: Linear,
}

impl CoherenceModel {
    pub fn new(config: CoherenceConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let embedding = Embedding::new(&mut store, "coh.emb", vocab.len(), config.embedding_dim, &mut rng)?;
        let encoder = ConvEncoder::new(
            &mut store,
            "coh.conv",
            config.embedding_dim,
            &config.conv_widths,
            config.filters_per_width,
            &mut rng,
        )?;
        let d = encoder.output_dim();
        let hidden = Linear::new(&mut store, "coh.mlp1", 3 * d, config.mlp_hidden, true, &mut rng)?;
        let head = Linear::new(&mut store, "coh.mlp2", config.mlp_hidden, 1, true, &mut rng)?;
        Ok(CoherenceModel {
            config,
            store,
            vocab,
            embedding,
            encoder,
            hidden,
            head,
        })
    }

    /// `[1 x conv_dim]` sentence representation.
    pub fn encode(&self, g: &mut Graph, sentence: &[String]) -> Result<Var> {
        if sentence.is_empty() {
            return Err(SenecaError::EmptyInput("coherence sentence".into()));
        }
        let x = self.embedding.forward(g, &self.vocab.ids(sentence))?;
        Ok(self.encoder.forward(g, x)?)
    }

    /// Pair score from precomputed sentence encodings.
    pub fn pair_score(&self, g: &mut Graph, a: Var, b: Var) -> Result<Var> {
        let diff = g.sub(a, b)?;
        let x = g.concat_cols(&[a, b, diff])?;
        let h = self.hidden.forward(g, x)?;
        let h = g.tanh(h);
        let o = self.head.forward(g, h)?;
        Ok(g.tanh(o))
    }

    pub fn score_var(&self, g: &mut Graph, a: &[String], b: &[String]) -> Result<Var> {
        let ea = self.encode(g, a)?;
        let eb = self.encode(g, b)?;
        self.pair_score(g, ea, eb)
    }

    pub fn coherence_score(&self, a: &[String], b: &[String]) -> Result<f64> {
        let mut g = Graph::new(&self.store);
        let s = self.score_var(&mut g, a, b)?;
        Ok(g.value(s).item())
    }

    /// Hinge loss `max{0, 1 - Coh(a, +) + Coh(a, -)}` as a graph scalar,
    /// along with the two scores.
    pub fn hinge_var(&self, g: &mut Graph, t: &CoherenceTriple) -> Result<(Var, f64, f64)> {
        let ea = self.encode(g, &t.target)?;
        let ep = self.encode(g, &t.positive)?;
        let en = if t.negative == t.target {
            ea
        } else {
            self.encode(g, &t.negative)?
        };
        let p = self.pair_score(g, ea, ep)?;
        let n = self.pair_score(g, ea, en)?;
        let d = g.sub(n, p)?;
        let d = g.add_scalar(d, 1.0);
        let loss = g.relu(d);
        let (pv, nv) = (g.value(p).item(), g.value(n).item());
        Ok((loss, pv, nv))
    }

    pub fn hinge_loss(&self, t: &CoherenceTriple) -> Result<f64> {
        let mut g = Graph::new(&self.store);
        let (l, _, _) = self.hinge_var(&mut g, t)?;
        Ok(g.value(l).item())
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        Ok(seneca_tensor::checkpoint::save(&self.store, path)?)
    }

    pub fn load(&mut self, path: impl AsRef<std::path::Path>) -> Result<()> {
        Ok(seneca_tensor::checkpoint::load(&mut self.store, path)?)
    }
}

/// Mean `Coh` over consecutive sentence pairs; 0 for fewer than two.
pub fn summary_coherence(model: &CoherenceModel, summary: &[Vec<String>]) -> Result<f64> {
    let sents: Vec<&Vec<String>> = summary.iter().filter(|s| !s.is_empty()).collect();
    if sents.len() < 2 {
        return Ok(0.0);
    }
    let mut g = Graph::new(&model.store);
    let enc = sents
        .iter()
        .map(|s| model.encode(&mut g, s))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for w in enc.windows(2) {
        let s = model.pair_score(&mut g, w[0], w[1])?;
        total += g.value(s).item();
    }
    Ok(total / (enc.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for CoherenceTrainConfig {
    fn default() -> Self {
        CoherenceTrainConfig {
            epochs: 5,
            lr: 1e-3,
            batch_size: 32,
            clip_norm: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub pairwise_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceTrainReport {
    pub epochs: Vec<EpochStats>,
    pub steps: u64,
}

/// Minibatch Adam on the hinge loss. Accuracy counts triples whose
/// positive scored strictly higher, measured during the epoch.
pub fn train_coherence(
    model: &mut CoherenceModel,
    triples: &[CoherenceTriple],
    cfg: &CoherenceTrainConfig,
) -> Result<CoherenceTrainReport> {
    if triples.is_empty() {
        return Err(SenecaError::EmptyInput("coherence training triples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(AdamConfig {
        lr: cfg.lr,
        clip_norm: Some(cfg.clip_norm),
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let grads = {
                let mut g = Graph::new(&model.store);
                let mut losses = Vec::with_capacity(batch.len());
                for &i in batch {
                    let (l, p, n) = model.hinge_var(&mut g, &triples[i])?;
                    loss_sum += g.value(l).item();
                    correct += usize::from(p > n);
                    losses.push(l);
                }
                let stacked = g.concat_rows(&losses)?;
                let mean = g.mean_rows(stacked)?;
                g.backward(mean)?
            };
            model.store.accumulate(&grads);
            opt.step(&mut model.store)?;
        }
        epochs.push(EpochStats {
            epoch,
            mean_loss: loss_sum / triples.len() as f64,
            pairwise_accuracy: correct as f64 / triples.len() as f64,
        });
    }
    Ok(CoherenceTrainReport {
        epochs,
        steps: opt.steps(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuffleItem {
    pub original: Vec<Vec<String>>,
    pub shuffled: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapItem {
    pub target: Vec<String>,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSets {
    pub pairwise: Vec<CoherenceTriple>,
    pub shuffle: Vec<ShuffleItem>,
    pub overlap: Vec<OverlapItem>,
}

/// A uniformly seeded derangement of `0..n` (`n >= 2`).
pub fn derangement<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    if n == 2 {
        return vec![1, 0];
    }
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &v)| i != v) {
            return p;
        }
    }
}

fn content_words<'a>(s: &'a [String], lex: &Lexicon) -> BTreeSet<&'a str> {
    s.iter()
        .map(String::as_str)
        .filter(|t| t.chars().any(char::is_alphanumeric) && !lex.is_function_word(t) && !lex.is_pronoun(t))
        .collect()
}

/// Diagnostic sets over held-out data. Pairwise keeps only entity-adjacent
/// triples; Shuffle pairs each multi-sentence summary with a derangement;
/// Overlap pairs each entity-adjacent positive with a sentence sharing no
/// content word with the target.
pub fn build_diagnostic_sets(
    corpus: &[(Article, Vec<MentionCluster>)],
    lex: &Lexicon,
    seed: u64,
) -> DiagnosticSets {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples = build_coherence_triples(corpus, &TripleConfig::default(), seed);
    let pairwise = triples
        .into_iter()
        .filter(|t| t.provenance == TripleProvenance::AdjacentEntity)
        .collect();
    let mut shuffle = Vec::new();
    let mut overlap = Vec::new();
    for (article, clusters) in corpus {
        let summary: Vec<Vec<String>> = article.summary.iter().filter(|s| !s.is_empty()).cloned().collect();
        if summary.len() >= 2 {
            let perm = derangement(summary.len(), &mut rng);
            shuffle.push(ShuffleItem {
                shuffled: perm.iter().map(|&i| summary[i].clone()).collect(),
                original: summary,
            });
        }
        let n = article.sentences.len();
        let sets = clusters_per_sentence(n, clusters);
        for i in 0..n.saturating_sub(1) {
            if sets[i].is_disjoint(&sets[i + 1]) {
                continue;
            }
            let target = content_words(&article.sentences[i], lex);
            let candidates: Vec<usize> = (0..n)
                .filter(|&j| j != i && j != i + 1)
                .filter(|&j| target.is_disjoint(&content_words(&article.sentences[j], lex)))
                .collect();
            if let Some(&j) = candidates.choose(&mut rng) {
                overlap.push(OverlapItem {
                    target: article.sentences[i].clone(),
                    positive: article.sentences[i + 1].clone(),
                    negative: article.sentences[j].clone(),
                });
            }
        }
    }
    DiagnosticSets {
        pairwise,
        shuffle,
        overlap,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticAccuracy {
    pub pairwise: f64,
    pub pairwise_items: usize,
    pub shuffle: f64,
    pub shuffle_items: usize,
    pub overlap: f64,
    pub overlap_items: usize,
}

fn fraction(hits: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

/// Fraction of items where the coherent member scores strictly higher.
pub fn evaluate_diagnostics(model: &CoherenceModel, sets: &DiagnosticSets) -> Result<DiagnosticAccuracy> {
    let mut pw = 0;
    for t in &sets.pairwise {
        let p = model.coherence_score(&t.target, &t.positive)?;
        let n = model.coherence_score(&t.target, &t.negative)?;
        pw += usize::from(p > n);
    }
    let mut sh = 0;
    for item in &sets.shuffle {
        sh += usize::from(summary_coherence(model, &item.original)? > summary_coherence(model, &item.shuffled)?);
    }
    let mut ov = 0;
    for item in &sets.overlap {
        let p = model.coherence_score(&item.target, &item.positive)?;
        let n = model.coherence_score(&item.target, &item.negative)?;
        ov += usize::from(p > n);
    }
    Ok(DiagnosticAccuracy {
        pairwise: fraction(pw, sets.pairwise.len()),
        pairwise_items: sets.pairwise.len(),
        shuffle: fraction(sh, sets.shuffle.len()),
        shuffle_items: sets.shuffle.len(),
        overlap: fraction(ov, sets.overlap.len()),
        overlap_items: sets.overlap.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::{Mention, MentionKind};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn cluster(id: usize, sentences: &[usize]) -> MentionCluster {
        MentionCluster {
            cluster_id: id,
            head: format!("e{id}"),
            mentions: sentences
                .iter()
                .map(|&s| Mention {
                    sentence_index: s,
                    start: 0,
                    end: 1,
                    surface: vec![format!("e{id}")],
                    kind: MentionKind::Nominal,
                })
                .collect(),
        }
    }

    fn article(n: usize) -> Article {
        Article::from_tokens("a", (0..n).map(|i| toks(&format!("w{i} x ."))).collect())
    }

    fn tiny_model(seed: u64) -> CoherenceModel {
        let mut a = article(12);
        a.summary = vec![toks("w1 x ."), toks("w2 x .")];
        let vocab = Vocabulary::build([&a], 100).unwrap();
        let cfg = CoherenceConfig {
            embedding_dim: 4,
            conv_widths: vec![1, 2],
            filters_per_width: 2,
            mlp_hidden: 4,
        };
        CoherenceModel::new(cfg, vocab, seed).unwrap()
    }

    #[test]
    fn two_sentence_article_only_self_repetition() {
        let corpus = vec![(article(2), vec![cluster(0, &[0, 1])])];
        let t = build_coherence_triples(&corpus, &TripleConfig::default(), 1);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].provenance, TripleProvenance::SelfRepetition);
        assert_eq!(t[0].negative, t[0].target);
    }

    #[test]
    fn no_shared_pairs_no_triples() {
        let corpus = vec![(article(4), vec![cluster(0, &[0]), cluster(1, &[2])])];
        assert!(build_coherence_triples(&corpus, &TripleConfig::default(), 1).is_empty());
    }

    #[test]
    fn negatives_respect_window_and_clusters() {
        let a = article(25);
        let clusters = vec![cluster(0, &[10, 11, 20]), cluster(1, &[3, 4])];
        let sets = clusters_per_sentence(25, &clusters);
        let corpus = vec![(a.clone(), clusters)];
        for seed in 0..50 {
            for t in build_coherence_triples(&corpus, &TripleConfig::default(), seed) {
                let ti = a.sentences.iter().position(|s| *s == t.target).unwrap();
                let ni = a.sentences.iter().position(|s| *s == t.negative).unwrap();
                match t.provenance {
                    TripleProvenance::AdjacentEntity => {
                        assert!(ti.abs_diff(ni) <= 9 && sets[ti].is_disjoint(&sets[ni]));
                    }
                    TripleProvenance::SelfRepetition => assert_eq!(ti, ni),
                }
            }
        }
    }

    #[test]
    fn self_repetition_fraction_is_half() {
        let pos: Vec<usize> = (0..20).collect();
        let corpus = vec![(article(20), vec![cluster(0, &pos)])];
        let t = build_coherence_triples(&corpus, &TripleConfig::default(), 3);
        let reps = t.iter().filter(|x| x.provenance == TripleProvenance::SelfRepetition).count();
        assert_eq!(reps, 10);
    }

    #[test]
    fn jsonl_round_trip() {
        let corpus = vec![(article(6), vec![cluster(0, &[0, 1, 2])])];
        let t = build_coherence_triples(&corpus, &TripleConfig::default(), 2);
        let mut buf = Vec::new();
        write_triples_jsonl(&t, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("\"provenance\":\"adjacent_entity\""));
        assert_eq!(read_triples_jsonl(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn score_bounded_and_deterministic() {
        let m = tiny_model(5);
        let s = m.coherence_score(&toks("w1 x ."), &toks("w2 zz")).unwrap();
        assert!((-1.0..=1.0).contains(&s));
        assert_eq!(s, tiny_model(5).coherence_score(&toks("w1 x ."), &toks("w2 zz")).unwrap());
        assert!(m.coherence_score(&[], &toks("a")).is_err());
    }

    #[test]
    fn summary_coherence_edges() {
        let m = tiny_model(1);
        assert_eq!(summary_coherence(&m, &[]).unwrap(), 0.0);
        assert_eq!(summary_coherence(&m, &[toks("w1 x .")]).unwrap(), 0.0);
        let pair = [toks("w1 x ."), toks("w2 x .")];
        assert_eq!(
            summary_coherence(&m, &pair).unwrap(),
            m.coherence_score(&pair[0], &pair[1]).unwrap()
        );
    }

    #[test]
    fn one_step_reduces_hinge() {
        let mut m = tiny_model(9);
        let t = CoherenceTriple {
            target: toks("w1 x ."),
            positive: toks("w2 x ."),
            negative: toks("w7 ."),
            provenance: TripleProvenance::AdjacentEntity,
        };
        let before = m.hinge_loss(&t).unwrap();
        assert!(before > 0.0);
        let cfg = CoherenceTrainConfig {
            epochs: 1,
            lr: 1e-3,
            batch_size: 1,
            ..CoherenceTrainConfig::default()
        };
        train_coherence(&mut m, std::slice::from_ref(&t), &cfg).unwrap();
        assert!(m.hinge_loss(&t).unwrap() < before);
        assert!(train_coherence(&mut m, &[], &cfg).is_err());
    }

    #[test]
    fn derangements() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(derangement(2, &mut rng), [1, 0]);
        for n in 3..7 {
            let p = derangement(n, &mut rng);
            assert!(p.iter().enumerate().all(|(i, &v)| i != v));
        }
    }

    #[test]
    fn shuffle_skips_single_sentence() {
        let mut a = article(3);
        a.summary = vec![toks("w1 x .")];
        let mut b = article(3);
        b.summary = vec![toks("w1 x ."), toks("w2 x .")];
        let sets = build_diagnostic_sets(&[(a, vec![]), (b, vec![])], &Lexicon::default(), 0);
        assert_eq!(sets.shuffle.len(), 1);
        assert_eq!(sets.shuffle[0].shuffled, [toks("w2 x ."), toks("w1 x .")]);
    }
}
