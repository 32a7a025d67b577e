use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{hex_sha256, PipelineConfig};
use super::connect::{connect_rl, ConnectItem, TrainedGenerator};
use super::evaluate::evaluate_corpus;
use super::infer::{summarize_end_to_end, EndToEndSummary, InferenceConfig, PipelineModels};
use super::toy::{make_toy_corpus, write_corpus_jsonl};
use super::*;
use crate::coherence::{
    build_coherence_triples, build_diagnostic_sets, evaluate_diagnostics, train_coherence,
    write_triples_jsonl, CoherenceModel,
};
use crate::error::{Result, SenecaError};
use crate::generator::{
    train_ml, train_rl, ExtractedInput, Generator, MixedReward, TrainingPair,
};
use crate::metrics::rouge_reward;
use crate::oracle::{build_labels, selection_rouge2, SelectionLabel};
use crate::rewards::{corpus_quality_stats, RewardConfig};
use crate::selector::{train_selector, Selector, SelectorInput};
use crate::textproc::{extract_mention_clusters, Article, Lexicon, RawArticle, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    MakeToyCorpus,
    Ingest,
    MakeLabels,
    TrainCoherence,
    TrainSelector,
    TrainGeneratorMl,
    TrainGeneratorRl,
    Connect,
    Summarize,
    Evaluate,
    QualityStats,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::MakeToyCorpus,
        Stage::Ingest,
        Stage::MakeLabels,
        Stage::TrainCoherence,
        Stage::TrainSelector,
        Stage::TrainGeneratorMl,
        Stage::TrainGeneratorRl,
        Stage::Connect,
        Stage::Summarize,
        Stage::Evaluate,
        Stage::QualityStats,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::MakeToyCorpus => "make-toy-corpus",
            Stage::Ingest => "ingest",
            Stage::MakeLabels => "make-labels",
            Stage::TrainCoherence => "train-coherence",
            Stage::TrainSelector => "train-selector",
            Stage::TrainGeneratorMl => "train-generator-ml",
            Stage::TrainGeneratorRl => "train-generator-rl",
            Stage::Connect => "connect",
            Stage::Summarize => "summarize",
            Stage::Evaluate => "evaluate",
            Stage::QualityStats => "quality-stats",
        }
    }

    // distinct seed streams per stage
    fn seed(self, base: u64) -> u64 {
        base.wrapping_mul(0x9e37_79b9).wrapping_add(self as u64 + 1)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = SenecaError;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| SenecaError::UnknownStage(s.to_string()))
    }
}

/// Per-invocation overrides that are not part of the run configuration.
#[derive(Debug, Clone, Default)]
pub struct StageOptions {
    /// summarize: raw JSONL articles to summarize instead of `test.jsonl`.
    pub input: Option<PathBuf>,
    /// summarize: directory holding checkpoints, if not the output dir.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub seed: u64,
    pub config_hash: String,
    pub corpus_hash: String,
    pub rewards: RewardConfig,
    /// File name to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
    pub wall_clock_secs: f64,
}

#[derive(Serialize)]
struct MetricView<'a> {
    stage: &'a str,
    seed: u64,
    config_hash: &'a str,
    corpus_hash: &'a str,
    rewards: &'a RewardConfig,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
    metrics: &'a BTreeMap<String, f64>,
}

impl RunManifest {
    /// Everything except the wall-clock time; byte-identical across reruns.
    pub fn metrics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MetricView {
            stage: &self.stage,
            seed: self.seed,
            config_hash: &self.config_hash,
            corpus_hash: &self.corpus_hash,
            rewards: &self.rewards,
            inputs: &self.inputs,
            outputs: &self.outputs,
            metrics: &self.metrics,
        })?)
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            SenecaError::Format(format!("{}:{}: {e}", path.display(), n + 1))
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

// manifests key files by name so they do not depend on the output dir
fn file_key(p: &Path) -> String {
    p.file_name()
        .map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned())
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(hex_sha256(&fs::read(path)?))
}

/// Generator inputs built from oracle extractions, in label order. Articles
/// without a reference summary are skipped.
pub fn oracle_pairs(articles: &[Article], labels: &[SelectionLabel], vocab: &Vocabulary) -> Result<Vec<TrainingPair>> {
    let by_id: HashMap<&str, &SelectionLabel> = labels.iter().map(|l| (l.article_id.as_str(), l)).collect();
    let mut pairs = Vec::new();
    for a in articles {
        if a.summary.is_empty() {
            continue;
        }
        let Some(l) = by_id.get(a.id.as_str()) else { continue };
        pairs.push(TrainingPair {
            input: ExtractedInput::from_selection(&a.id, &a.sentences, &l.indices, vocab)?,
            reference: a.summary.clone(),
        });
    }
    Ok(pairs)
}

/// Oracle labels for every article with a reference summary.
pub fn make_labels(articles: &[Article]) -> Vec<SelectionLabel> {
    articles
        .iter()
        .filter(|a| !a.summary.is_empty() && !a.sentences.is_empty())
        .map(|a| build_labels(&a.id, &a.sentences, &a.summary))
        .collect()
}

struct Run<'a> {
    stage: Stage,
    cfg: &'a PipelineConfig,
    out: &'a Path,
    opts: &'a StageOptions,
    lex: Lexicon,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    metrics: BTreeMap<String, f64>,
}

impl Run<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn corpus_path(&self) -> PathBuf {
        match &self.cfg.corpus {
            Some(p) => PathBuf::from(p),
            None => self.path(RAW),
        }
    }

    /// Path of a prerequisite, recorded as an input.
    fn need(&mut self, name: &str, producer: &str) -> Result<PathBuf> {
        let p = self.path(name);
        self.need_path(p, producer)
    }

    fn need_path(&mut self, p: PathBuf, producer: &str) -> Result<PathBuf> {
        if !p.exists() {
            return Err(SenecaError::MissingPrerequisite {
                stage: self.stage.name().to_string(),
                missing: p.display().to_string(),
                producer: producer.to_string(),
            });
        }
        self.inputs.insert(file_key(&p), file_hash(&p)?);
        Ok(p)
    }

    fn produced(&mut self, name: &str) -> Result<()> {
        let p = self.path(name);
        self.outputs.insert(name.to_string(), file_hash(&p)?);
        Ok(())
    }

    /// Checkpoint plus a copy of the configuration beside it.
    fn produced_checkpoint(&mut self, name: &str) -> Result<()> {
        let cfg_path = self.path(&format!("{name}.config"));
        fs::write(&cfg_path, self.cfg.to_text())?;
        self.produced(name)
    }

    fn metric(&mut self, k: &str, v: f64) {
        self.metrics.insert(k.to_string(), v);
    }

    fn seed(&self) -> u64 {
        self.stage.seed(self.cfg.seed)
    }

    fn articles(&mut self, name: &str) -> Result<Vec<Article>> {
        let p = self.need(name, "ingest")?;
        read_jsonl(&p)
    }

    fn vocab(&mut self) -> Result<Vocabulary> {
        let p = self.need(VOCAB, "ingest")?;
        Vocabulary::load(p)
    }

    fn labels(&mut self) -> Result<Vec<SelectionLabel>> {
        let p = self.need(LABELS, "make-labels")?;
        read_jsonl(&p)
    }
}

/// Runs one stage, writes its outputs, metric JSON and manifest, and
/// returns the manifest.
pub fn run_stage(stage: &str, cfg: &PipelineConfig, out: &Path, opts: &StageOptions) -> Result<RunManifest> {
    let stage: Stage = stage.parse()?;
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut run = Run {
        stage,
        cfg,
        out,
        opts,
        lex: Lexicon::from_env()?,
        inputs: BTreeMap::new(),
        outputs: BTreeMap::new(),
        metrics: BTreeMap::new(),
    };
    match stage {
        Stage::MakeToyCorpus => make_toy(&mut run)?,
        Stage::Ingest => ingest(&mut run)?,
        Stage::MakeLabels => labels_stage(&mut run)?,
        Stage::TrainCoherence => coherence_stage(&mut run)?,
        Stage::TrainSelector => selector_stage(&mut run)?,
        Stage::TrainGeneratorMl => generator_ml_stage(&mut run)?,
        Stage::TrainGeneratorRl => generator_rl_stage(&mut run)?,
        Stage::Connect => connect_stage(&mut run)?,
        Stage::Summarize => summarize_stage(&mut run)?,
        Stage::Evaluate => evaluate_stage(&mut run)?,
        Stage::QualityStats => quality_stage(&mut run)?,
    }
    let corpus = run.corpus_path();
    let manifest = RunManifest {
        stage: stage.name().to_string(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        corpus_hash: if corpus.exists() { file_hash(&corpus)? } else { String::new() },
        rewards: cfg.rewards(),
        inputs: run.inputs,
        outputs: run.outputs,
        metrics: run.metrics,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    fs::create_dir_all(out.join("metrics"))?;
    fs::create_dir_all(out.join("manifests"))?;
    fs::write(out.join("metrics").join(format!("{stage}.json")), manifest.metrics_json()?)?;
    fs::write(
        out.join("manifests").join(format!("{stage}.json")),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

fn make_toy(run: &mut Run) -> Result<()> {
    let corpus = make_toy_corpus(run.cfg.toy_seed, run.cfg.toy_size)?;
    let mut w = BufWriter::new(fs::File::create(run.path(RAW))?);
    write_corpus_jsonl(&corpus, &mut w)?;
    w.flush()?;
    drop(w);
    run.metric("articles", corpus.len() as f64);
    run.produced(RAW)
}

fn mean<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn ingest(run: &mut Run) -> Result<()> {
    let producer = if run.cfg.corpus.is_some() { "the `corpus` file" } else { "make-toy-corpus" };
    let raw_path = run.corpus_path();
    let raw_path = run.need_path(raw_path, producer)?;
    let raw: Vec<RawArticle> = read_jsonl(&raw_path)?;
    let all: Vec<Article> = raw.iter().map(Article::from_raw).collect();
    let articles: Vec<Article> = all.iter().filter(|a| !a.sentences.is_empty()).cloned().collect();
    if articles.is_empty() {
        return Err(SenecaError::EmptyInput(format!("corpus {}", raw_path.display())));
    }
    let n = articles.len();
    let mut n_test = (run.cfg.held_out * n as f64).round() as usize;
    if run.cfg.held_out > 0.0 && n >= 2 {
        n_test = n_test.max(1);
    }
    n_test = n_test.min(n - 1);
    let (train, test) = articles.split_at(n - n_test);
    let vocab = Vocabulary::build(train.iter(), run.cfg.vocab_cap)?;
    write_jsonl(&run.path(TRAIN), train)?;
    write_jsonl(&run.path(TEST), test)?;
    vocab.save(run.path(VOCAB))?;
    run.metric("articles", n as f64);
    run.metric("dropped_empty", (all.len() - n) as f64);
    run.metric("train", train.len() as f64);
    run.metric("test", test.len() as f64);
    run.metric("vocab_size", vocab.len() as f64);
    run.metric("mean_sentences", mean(articles.iter().map(|a| a.sentences.len() as f64)));
    run.metric("mean_summary_sentences", mean(articles.iter().map(|a| a.summary.len() as f64)));
    run.produced(TRAIN)?;
    run.produced(TEST)?;
    run.produced(VOCAB)
}

fn labels_stage(run: &mut Run) -> Result<()> {
    let train = run.articles(TRAIN)?;
    let labels = make_labels(&train);
    if labels.is_empty() {
        return Err(SenecaError::EmptyInput("no training article has a reference summary".into()));
    }
    let by_id: HashMap<&str, &Article> = train.iter().map(|a| (a.id.as_str(), a)).collect();
    let r2 = mean(labels.iter().map(|l| {
        let a = by_id[l.article_id.as_str()];
        selection_rouge2(&a.sentences, &l.indices, &a.summary_tokens())
    }));
    write_jsonl(&run.path(LABELS), &labels)?;
    run.metric("labeled", labels.len() as f64);
    run.metric("mean_label_length", mean(labels.iter().map(|l| l.indices.len() as f64)));
    run.metric("mean_oracle_rouge2", r2);
    run.produced(LABELS)
}

fn with_clusters(articles: Vec<Article>, lex: &Lexicon) -> Vec<(Article, Vec<crate::textproc::MentionCluster>)> {
    articles
        .into_iter()
        .map(|a| {
            let c = extract_mention_clusters(&a, lex);
            (a, c)
        })
        .collect()
}

fn coherence_stage(run: &mut Run) -> Result<()> {
    let train = run.articles(TRAIN)?;
    let test = run.articles(TEST)?;
    let vocab = run.vocab()?;
    let seed = run.seed();
    let train = with_clusters(train, &run.lex);
    let triples = build_coherence_triples(&train, &run.cfg.triples(), seed);
    let mut w = BufWriter::new(fs::File::create(run.path(TRIPLES))?);
    write_triples_jsonl(&triples, &mut w)?;
    w.flush()?;
    drop(w);
    let mut model = CoherenceModel::new(run.cfg.coherence(), vocab, seed)?;
    let report = train_coherence(&mut model, &triples, &run.cfg.coherence_training(seed))?;
    model.save(run.path(COHERENCE))?;
    run.metric("triples", triples.len() as f64);
    run.metric("steps", report.steps as f64);
    if let Some(last) = report.epochs.last() {
        run.metric("final_loss", last.mean_loss);
        run.metric("final_train_accuracy", last.pairwise_accuracy);
    }
    if !test.is_empty() {
        let sets = build_diagnostic_sets(&with_clusters(test, &run.lex), &run.lex, seed);
        let acc = evaluate_diagnostics(&model, &sets)?;
        run.metric("diag_pairwise", acc.pairwise);
        run.metric("diag_pairwise_items", acc.pairwise_items as f64);
        run.metric("diag_shuffle", acc.shuffle);
        run.metric("diag_shuffle_items", acc.shuffle_items as f64);
        run.metric("diag_overlap", acc.overlap);
        run.metric("diag_overlap_items", acc.overlap_items as f64);
    }
    run.produced(TRIPLES)?;
    run.produced_checkpoint(COHERENCE)
}

fn selector_data(articles: &[Article], labels: &[SelectionLabel], lex: &Lexicon, k: usize) -> Result<Vec<(SelectorInput, Vec<usize>)>> {
    let by_id: HashMap<&str, &SelectionLabel> = labels.iter().map(|l| (l.article_id.as_str(), l)).collect();
    articles
        .iter()
        .filter_map(|a| by_id.get(a.id.as_str()).map(|l| (a, l)))
        .map(|(a, l)| Ok((SelectorInput::from_article(a, lex, k)?, l.indices.clone())))
        .collect()
}

fn selector_stage(run: &mut Run) -> Result<()> {
    let train = run.articles(TRAIN)?;
    let labels = run.labels()?;
    let vocab = run.vocab()?;
    let seed = run.seed();
    let data = selector_data(&train, &labels, &run.lex, run.cfg.salient_k)?;
    let mut model = Selector::new(run.cfg.selector(), vocab, seed)?;
    let report = train_selector(&mut model, &data, &run.cfg.selector_training(seed))?;
    model.save(run.path(SELECTOR))?;
    let exact = data
        .iter()
        .map(|(input, l)| Ok(f64::from(u8::from(&model.select_sentences(input, run.cfg.max_select_steps)?.indices == l))))
        .collect::<Result<Vec<_>>>()?;
    run.metric("examples", data.len() as f64);
    run.metric("steps", report.steps as f64);
    run.metric("first_loss", report.epoch_losses.first().copied().unwrap_or(0.0));
    run.metric("final_loss", report.epoch_losses.last().copied().unwrap_or(0.0));
    run.metric("train_exact_match", mean(exact));
    run.produced_checkpoint(SELECTOR)
}

fn greedy_reward(model: &Generator, pairs: &[TrainingPair], max_len: usize) -> Result<f64> {
    let mut rs = Vec::with_capacity(pairs.len());
    for p in pairs {
        let out = model.greedy(&p.input, max_len, true)?;
        rs.push(rouge_reward(&out.tokens, &p.reference_tokens()));
    }
    Ok(mean(rs))
}

fn generator_ml_stage(run: &mut Run) -> Result<()> {
    let train = run.articles(TRAIN)?;
    let labels = run.labels()?;
    let vocab = run.vocab()?;
    let seed = run.seed();
    let pairs = oracle_pairs(&train, &labels, &vocab)?;
    let mut model = Generator::new(run.cfg.generator(), vocab, seed)?;
    let report = train_ml(&mut model, &pairs, &run.cfg.ml_training(seed))?;
    run.metric("pairs", pairs.len() as f64);
    run.metric("skipped", report.skipped as f64);
    run.metric("steps", report.steps as f64);
    run.metric("first_loss", report.epoch_losses.first().copied().unwrap_or(0.0));
    run.metric("final_loss", report.epoch_losses.last().copied().unwrap_or(0.0));
    run.metric("train_greedy_rouge", greedy_reward(&model, &pairs, run.cfg.max_len)?);
    let trained = TrainedGenerator {
        model,
        ml_steps: report.steps,
        rl_steps: 0,
    };
    trained.save(run.path(GENERATOR_ML))?;
    run.produced_checkpoint(GENERATOR_ML)
}

fn load_generator(run: &mut Run, names: &[&str], vocab: &Vocabulary) -> Result<TrainedGenerator> {
    let name = names
        .iter()
        .find(|n| run.path(n).exists())
        .copied()
        .unwrap_or(names[names.len() - 1]);
    let p = run.need(name, "train-generator-ml")?;
    let g = TrainedGenerator::load(Generator::new(run.cfg.generator(), vocab.clone(), 0)?, p)?;
    if !g.is_trained() {
        return Err(SenecaError::Untrained(format!("generator checkpoint {name}")));
    }
    Ok(g)
}

fn generator_rl_stage(run: &mut Run) -> Result<()> {
    let train = run.articles(TRAIN)?;
    let labels = run.labels()?;
    let vocab = run.vocab()?;
    let seed = run.seed();
    let mut gen = load_generator(run, &[GENERATOR_ML], &vocab)?;
    let rewards = run.cfg.rewards();
    let coherence = if rewards.use_coh {
        let p = run.need(COHERENCE, "train-coherence")?;
        let mut m = CoherenceModel::new(run.cfg.coherence(), vocab.clone(), 0)?;
        m.load(p)?;
        Some(m)
    } else {
        None
    };
    let pairs = oracle_pairs(&train, &labels, &vocab)?;
    let before = greedy_reward(&gen.model, &pairs, run.cfg.max_len)?;
    let mixed = MixedReward {
        config: rewards,
        coherence: coherence.as_ref(),
        lexicon: &run.lex,
    };
    let stats = train_rl(&mut gen.model, &pairs, &run.cfg.rl(), run.cfg.rl_steps, seed, |s, r| {
        Ok(mixed.score(s, r)?.total)
    })?;
    let after = greedy_reward(&gen.model, &pairs, run.cfg.max_len)?;
    gen.rl_steps += stats.iter().filter(|s| !s.skipped).count() as u64;
    gen.save(run.path(GENERATOR_RL))?;
    run.metric("steps", stats.len() as f64);
    run.metric("skipped_steps", stats.iter().filter(|s| s.skipped).count() as f64);
    run.metric("mean_sample_reward", mean(stats.iter().map(|s| s.mean_sample_reward)));
    run.metric("mean_baseline_reward", mean(stats.iter().map(|s| s.mean_baseline_reward)));
    run.metric("train_greedy_rouge_before", before);
    run.metric("train_greedy_rouge_after", after);
    run.produced_checkpoint(GENERATOR_RL)
}

fn connect_stage(run: &mut Run) -> Result<()> {
    let train = run.articles(TRAIN)?;
    let vocab = run.vocab()?;
    let seed = run.seed();
    let sel_path = run.need(SELECTOR, "train-selector")?;
    let gen = load_generator(run, &[GENERATOR_RL, GENERATOR_ML], &vocab)?;
    let mut selector = Selector::new(run.cfg.selector(), vocab, 0)?;
    selector.load(sel_path)?;
    let items = train
        .iter()
        .filter(|a| !a.summary.is_empty())
        .map(|a| {
            Ok(ConnectItem {
                input: SelectorInput::from_article(a, &run.lex, run.cfg.salient_k)?,
                reference: a.summary.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let before = gen.checksum();
    let stats = connect_rl(&mut selector, &gen, &items, &run.cfg.connect(), run.cfg.connect_steps, seed)?;
    let unchanged = before == gen.checksum();
    selector.save(run.path(SELECTOR_CONNECTED))?;
    run.metric("steps", stats.len() as f64);
    run.metric("skipped_steps", stats.iter().filter(|s| s.skipped).count() as f64);
    run.metric("mean_sample_reward", mean(stats.iter().map(|s| s.mean_sample_reward)));
    run.metric("mean_baseline_reward", mean(stats.iter().map(|s| s.mean_baseline_reward)));
    run.metric("generator_unchanged", f64::from(u8::from(unchanged)));
    run.produced_checkpoint(SELECTOR_CONNECTED)
}

fn summarize_stage(run: &mut Run) -> Result<()> {
    let articles = match run.opts.input.clone() {
        Some(p) => {
            let p = run.need_path(p, "the --input file")?;
            read_jsonl::<RawArticle>(&p)?.iter().map(Article::from_raw).collect()
        }
        None => run.articles(TEST)?,
    };
    let articles: Vec<Article> = articles.into_iter().filter(|a| !a.sentences.is_empty()).collect();
    if articles.is_empty() {
        return Err(SenecaError::EmptyInput("no articles to summarize".into()));
    }
    let vocab = run.vocab()?;
    let dir = run.opts.checkpoint_dir.clone().unwrap_or_else(|| run.out.to_path_buf());
    let (models, paths) = PipelineModels::load(&dir, run.cfg, vocab, run.lex.clone())?;
    for p in [Some(paths.selector), Some(paths.generator), paths.coherence].into_iter().flatten() {
        run.inputs.insert(file_key(&p), file_hash(&p)?);
    }
    let icfg = InferenceConfig::from(run.cfg);
    let summaries = articles
        .iter()
        .map(|a| summarize_end_to_end(a, &models, &icfg))
        .collect::<Result<Vec<_>>>()?;
    write_jsonl(&run.path(SUMMARIES), &summaries)?;
    run.metric("summaries", summaries.len() as f64);
    run.metric("mean_tokens", mean(summaries.iter().map(|s| s.tokens.len() as f64)));
    run.metric("mean_sentences", mean(summaries.iter().map(|s| s.sentences.len() as f64)));
    run.metric("mean_extracted", mean(summaries.iter().map(|s| s.extraction.len() as f64)));
    if models.coherence.is_some() {
        run.metric("mean_coherence", mean(summaries.iter().filter_map(|s| s.coherence)));
    }
    run.produced(SUMMARIES)
}

type Sentences = Vec<Vec<String>>;

/// System summaries paired with the references of the same articles.
fn paired(run: &mut Run) -> Result<(Vec<String>, Vec<Sentences>, Vec<Sentences>)> {
    let p = run.need(SUMMARIES, "summarize")?;
    let summaries: Vec<EndToEndSummary> = read_jsonl(&p)?;
    let mut refs: HashMap<String, Vec<Vec<String>>> = HashMap::new();
    for name in [TRAIN, TEST] {
        for a in run.articles(name)? {
            refs.insert(a.id, a.summary);
        }
    }
    let mut ids = Vec::new();
    let mut sys = Vec::new();
    let mut gold = Vec::new();
    for s in summaries {
        let r = refs
            .get(&s.id)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| SenecaError::Format(format!("no reference summary for `{}`", s.id)))?;
        ids.push(s.id);
        sys.push(s.sentences);
        gold.push(r.clone());
    }
    Ok((ids, sys, gold))
}

fn evaluate_stage(run: &mut Run) -> Result<()> {
    let (ids, sys, gold) = paired(run)?;
    let coherence = if run.path(COHERENCE).exists() {
        let vocab = run.vocab()?;
        let p = run.need(COHERENCE, "train-coherence")?;
        let mut m = CoherenceModel::new(run.cfg.coherence(), vocab, 0)?;
        m.load(p)?;
        Some(m)
    } else {
        None
    };
    let report = evaluate_corpus(&ids, &sys, &gold, coherence.as_ref())?;
    fs::write(run.path(EVAL_CSV), report.to_csv())?;
    fs::write(run.path(EVAL_JSON), report.to_json()?)?;
    run.metric("count", report.mean.count as f64);
    run.metric("rouge_1", report.mean.rouge_1);
    run.metric("rouge_2", report.mean.rouge_2);
    run.metric("rouge_l", report.mean.rouge_l);
    if let Some(c) = report.mean.coherence {
        run.metric("coherence", c);
    }
    run.produced(EVAL_CSV)?;
    run.produced(EVAL_JSON)
}

fn quality_stage(run: &mut Run) -> Result<()> {
    let (_, sys, gold) = paired(run)?;
    let q = corpus_quality_stats(&sys, &gold, &run.lex)?;
    fs::write(run.path(QUALITY), q.to_csv())?;
    run.metric("system_ref_pct", q.system.ref_pct);
    run.metric("system_relcl_pct", q.system.relcl_pct);
    run.metric("system_app_pct", q.system.app_pct);
    run.metric("reference_ref_pct", q.reference.ref_pct);
    run.metric("reference_relcl_pct", q.reference.relcl_pct);
    run.metric("reference_app_pct", q.reference.app_pct);
    run.produced(QUALITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!(matches!("train".parse::<Stage>(), Err(SenecaError::UnknownStage(_))));
    }

    #[test]
    fn prerequisite_error_names_the_producer() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_stage("connect", &PipelineConfig::default(), dir.path(), &StageOptions::default()).unwrap_err();
        match err {
            SenecaError::MissingPrerequisite { stage, producer, .. } => {
                assert_eq!(stage, "connect");
                assert_eq!(producer, "ingest");
            }
            e => panic!("unexpected {e}"),
        }
    }
}
