use seneca::generator::{Generator, GeneratorConfig};
use seneca::pipeline::infer::{summarize_end_to_end, InferenceConfig, PipelineModels};
use seneca::pipeline::stages::read_jsonl;
use seneca::pipeline::{
    connect_rl, evaluate_corpus, make_toy_corpus, run_stage, ConnectConfig, ConnectItem, PipelineConfig, StageOptions,
    TrainedGenerator,
};
use seneca::selector::{Selector, SelectorConfig, SelectorInput};
use seneca::textproc::{Article, Lexicon, Vocabulary};
use seneca::SenecaError;
use seneca_tensor::checkpoint;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn small_selector(vocab: Vocabulary) -> Selector {
    let cfg = SelectorConfig {
        embedding_dim: 8,
        conv_widths: vec![1, 2],
        filters_per_width: 3,
        encoder_hidden: 8,
        decoder_hidden: 8,
        attention_dim: 8,
        mask_repeats: true,
    };
    Selector::new(cfg, vocab, 3).unwrap()
}

fn small_generator(vocab: Vocabulary) -> Generator {
    let cfg = GeneratorConfig {
        embedding_dim: 8,
        encoder_hidden: 8,
        decoder_hidden: 8,
        attention_dim: 8,
    };
    Generator::new(cfg, vocab, 4).unwrap()
}

fn toy(n: usize) -> (Vec<Article>, Vocabulary) {
    let arts: Vec<Article> = make_toy_corpus(11, n).unwrap().iter().map(Article::from_raw).collect();
    let vocab = Vocabulary::build(arts.iter(), 10_000).unwrap();
    (arts, vocab)
}

fn items(arts: &[Article], reference: Option<&str>) -> Vec<ConnectItem> {
    let lex = Lexicon::default();
    arts.iter()
        .map(|a| ConnectItem {
            input: SelectorInput::from_article(a, &lex, 6).unwrap(),
            reference: reference.map_or_else(|| a.summary.clone(), |r| vec![toks(r)]),
        })
        .collect()
}

fn trained(gen: Generator) -> TrainedGenerator {
    TrainedGenerator {
        model: gen,
        ml_steps: 1,
        rl_steps: 0,
    }
}

#[test]
fn connector_refuses_untrained_generator() {
    let (arts, vocab) = toy(4);
    let mut sel = small_selector(vocab.clone());
    let gen = TrainedGenerator {
        model: small_generator(vocab),
        ml_steps: 0,
        rl_steps: 0,
    };
    let err = connect_rl(&mut sel, &gen, &items(&arts, None), &ConnectConfig::default(), 1, 0).unwrap_err();
    assert!(matches!(err, SenecaError::Untrained(_)), "{err}");
}

#[test]
fn connector_skips_when_every_advantage_is_zero() {
    let (arts, vocab) = toy(6);
    let mut sel = small_selector(vocab.clone());
    let gen = trained(small_generator(vocab));
    let before = checkpoint::to_bytes(&sel.store);
    // nothing the generator can write overlaps this, so every reward is 0
    let stats = connect_rl(&mut sel, &gen, &items(&arts, Some("zzqx")), &ConnectConfig::default(), 3, 0).unwrap();
    assert!(stats.iter().all(|s| s.skipped && s.mean_sample_reward == 0.0));
    assert_eq!(before, checkpoint::to_bytes(&sel.store));
}

#[test]
fn connector_moves_selector_but_not_generator() {
    let (arts, vocab) = toy(8);
    let mut sel = small_selector(vocab.clone());
    let gen = trained(small_generator(vocab));
    let (sel_before, gen_before) = (checkpoint::to_bytes(&sel.store), gen.checksum());
    let cfg = ConnectConfig {
        lr: 1e-2,
        batch_size: 8,
        samples_per_article: 2,
        ..ConnectConfig::default()
    };
    let stats = connect_rl(&mut sel, &gen, &items(&arts, None), &cfg, 3, 1).unwrap();
    assert_eq!(stats.len(), 3);
    assert!(stats.iter().any(|s| !s.skipped));
    assert_ne!(sel_before, checkpoint::to_bytes(&sel.store));
    assert_eq!(gen_before, gen.checksum());
}

#[test]
fn generator_step_counts_survive_save_and_load() {
    let (_, vocab) = toy(2);
    let dir = tempfile::tempdir().unwrap();
    let gen = TrainedGenerator {
        model: small_generator(vocab.clone()),
        ml_steps: 17,
        rl_steps: 3,
    };
    let path = dir.path().join("g.ckpt");
    gen.save(&path).unwrap();
    let back = TrainedGenerator::load(small_generator(vocab.clone()), &path).unwrap();
    assert_eq!((back.ml_steps, back.rl_steps), (17, 3));
    assert_eq!(back.checksum(), gen.checksum());

    // a bare checkpoint has no step record
    let bare = dir.path().join("bare.ckpt");
    gen.model.save(&bare).unwrap();
    assert!(!TrainedGenerator::load(small_generator(vocab), &bare).unwrap().is_trained());
}

#[test]
fn one_sentence_article_is_summarized_from_its_only_sentence() {
    let (_, vocab) = toy(3);
    let models = PipelineModels {
        selector: small_selector(vocab.clone()),
        generator: small_generator(vocab),
        coherence: None,
        lexicon: Lexicon::default(),
    };
    let a = Article::from_tokens("one", vec![toks("the minister resigned on friday .")]);
    let cfg = InferenceConfig {
        salient_k: 6,
        max_select_steps: 4,
        beam: 3,
        alpha: 1.0,
        max_len: 12,
    };
    let s = summarize_end_to_end(&a, &models, &cfg).unwrap();
    assert_eq!(s.extraction, vec![0]);
    assert!(s.tokens.len() <= 12);
    assert_eq!(s.coherence, None);
}

#[test]
fn evaluation_mean_is_the_row_average() {
    let ids: Vec<String> = vec!["a".into(), "b".into()];
    let system = vec![vec![toks("the cat sat")], vec![toks("a dog ran .")]];
    let refs = vec![vec![toks("the cat sat")], vec![toks("no overlap here")]];
    let r = evaluate_corpus(&ids, &system, &refs, None).unwrap();
    assert_eq!(r.rows[0].rouge_1, 1.0);
    assert_eq!(r.rows[1].rouge_1, 0.0);
    assert_eq!(r.mean.rouge_1, 0.5);
    assert_eq!(r.mean.count, 2);
    assert_eq!(r.to_csv().lines().count(), 1 + 2 + 1);
    assert!(evaluate_corpus(&ids, &system[..1], &refs[..1], None).is_err());
}

#[test]
fn stage_errors_name_the_missing_piece() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let opts = StageOptions::default();
    assert!(matches!(
        run_stage("train-everything", &cfg, dir.path(), &opts),
        Err(SenecaError::UnknownStage(_))
    ));
    match run_stage("summarize", &cfg, dir.path(), &opts) {
        Err(SenecaError::MissingPrerequisite { stage, .. }) => assert_eq!(stage, "summarize"),
        other => panic!("expected a missing prerequisite, got {other:?}"),
    }
}

#[test]
fn ingest_holds_out_the_tail_of_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::parse("toy_size = 20\nheld_out = 0.25\n").unwrap();
    let opts = StageOptions::default();
    run_stage("make-toy-corpus", &cfg, dir.path(), &opts).unwrap();
    let m = run_stage("ingest", &cfg, dir.path(), &opts).unwrap();
    let train: Vec<serde_json::Value> = read_jsonl(&dir.path().join("train.jsonl")).unwrap();
    let test: Vec<serde_json::Value> = read_jsonl(&dir.path().join("test.jsonl")).unwrap();
    assert_eq!((train.len(), test.len()), (15, 5));
    assert!(dir.path().join("vocab.txt").exists());
    assert!(dir.path().join("metrics").join("ingest.json").exists());
    assert!(dir.path().join("manifests").join("ingest.json").exists());
    assert_eq!(m.seed, cfg.seed);
}
