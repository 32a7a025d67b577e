//! Synthetic news-like corpora built from templated entity narratives.
//!
//! Each article introduces two or three people by full name and role, then
//! refers back to them with pronouns or honorific plus surname; unrelated
//! filler sentences sit between the entity blocks. The reference summary
//! covers the most-mentioned person with compressed versions of their
//! sentences, so summaries open with a name and continue with a pronoun.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SenecaError};
use crate::textproc::RawArticle;

const MALE: [&str; 16] = [
    "John", "James", "Michael", "David", "Robert", "William", "Thomas", "Richard", "George",
    "Peter", "Paul", "Daniel", "Andrew", "Edward", "Henry", "Frank",
];
const FEMALE: [&str; 16] = [
    "Mary", "Anna", "Sarah", "Elizabeth", "Margaret", "Susan", "Laura", "Emma", "Helen", "Alice",
    "Julia", "Claire", "Rachel", "Karen", "Nancy", "Grace",
];
const SURNAMES: [&str; 24] = [
    "Ahern", "Walsh", "Keane", "Brennan", "Doyle", "Murphy", "Kelly", "Byrne", "Ryan", "Carroll",
    "Nolan", "Quinn", "Foley", "Burke", "Dunne", "Hayes", "Lynch", "Moran", "Power", "Regan",
    "Shea", "Tobin", "Ward", "Young",
];
const ROLES: [&str; 8] = [
    "mayor", "senator", "minister", "governor", "judge", "chairman", "director", "leader",
];
const TOPICS: [&str; 12] = [
    "budget", "bill", "merger", "contract", "proposal", "project", "campaign", "policy", "strike",
    "investigation", "deal", "report",
];
const ACTS: [&str; 6] = ["backed", "opposed", "defended", "criticized", "announced", "delayed"];
const OUTCOMES: [&str; 6] = [
    "pass easily", "fail again", "cost more", "save money", "take years", "face delays",
];
const FOLLOW_ACTS: [&str; 5] = [
    "met reporters", "spoke briefly", "refused questions", "visited supporters", "traveled north",
];
const TIMES: [&str; 4] = ["on tuesday", "last week", "this morning", "late yesterday"];
const FILLERS: [&str; 10] = [
    "Heavy rain fell across the region overnight .",
    "Traffic was slow on the main road .",
    "Fuel prices rose slightly during the week .",
    "Several roads were closed for repairs .",
    "Forecasters predicted a mild weekend .",
    "Tourists crowded the old harbor .",
    "Local shops opened later than usual .",
    "Visitors praised the new gardens .",
    "Commuters waited for delayed trains .",
    "Farmers hoped for drier weather .",
];

#[derive(Debug, Clone)]
struct Person {
    first: &'static str,
    last: &'static str,
    male: bool,
    role: &'static str,
    topic: &'static str,
    act: &'static str,
    outcome: &'static str,
    time: &'static str,
}

impl Person {
    fn pronoun(&self) -> &'static str {
        if self.male {
            "He"
        } else {
            "She"
        }
    }

    fn possessive(&self) -> &'static str {
        if self.male {
            "His"
        } else {
            "Her"
        }
    }

    fn honorific(&self) -> &'static str {
        if self.male {
            "Mr"
        } else {
            "Ms"
        }
    }

    fn intro<R: Rng>(&self, rng: &mut R) -> String {
        let (f, l, r, a, t, w) = (self.first, self.last, self.role, self.act, self.topic, self.time);
        match rng.gen_range(0..2) {
            0 => format!("{f} {l} , the {r} , {a} the {t} {w} ."),
            _ => format!("{f} {l} , a veteran {r} , {a} the {t} {w} ."),
        }
    }

    fn intro_compressed(&self) -> String {
        format!("{} {} {} the {} .", self.first, self.last, self.act, self.topic)
    }

    fn follow_ups<R: Rng>(&self, rng: &mut R) -> Vec<(String, String)> {
        let (p, poss, h, l, t, o) = (
            self.pronoun(),
            self.possessive(),
            self.honorific(),
            self.last,
            self.topic,
            self.outcome,
        );
        let fa = FOLLOW_ACTS[rng.gen_range(0..FOLLOW_ACTS.len())];
        let mut all = vec![
            (
                format!("{p} said the {t} would {o} ."),
                format!("{p} said the {t} would {o} ."),
            ),
            (
                format!("{h} {l} {fa} after the announcement ."),
                format!("{h} {l} {fa} ."),
            ),
            (
                format!("{poss} aides said {p_l} expected support from allies .", p_l = p.to_lowercase()),
                format!("{poss} aides expected support ."),
            ),
        ];
        let n = rng.gen_range(1..=all.len());
        // the outcome sentence always comes first
        let first = all.remove(0);
        all.shuffle(rng);
        let mut out = vec![first];
        out.extend(all.into_iter().take(n - 1));
        out
    }
}

fn pick_distinct<'a, R: Rng>(pool: &[&'a str], k: usize, rng: &mut R) -> Vec<&'a str> {
    pool.choose_multiple(rng, k).copied().collect()
}

fn make_people<R: Rng>(k: usize, rng: &mut R) -> Vec<Person> {
    let lasts = pick_distinct(&SURNAMES, k, rng);
    let roles = pick_distinct(&ROLES, k, rng);
    let topics = pick_distinct(&TOPICS, k, rng);
    let males = pick_distinct(&MALE, k, rng);
    let females = pick_distinct(&FEMALE, k, rng);
    (0..k)
        .map(|i| {
            let male = rng.gen_bool(0.5);
            Person {
                first: if male { males[i] } else { females[i] },
                last: lasts[i],
                male,
                role: roles[i],
                topic: topics[i],
                act: ACTS[rng.gen_range(0..ACTS.len())],
                outcome: OUTCOMES[rng.gen_range(0..OUTCOMES.len())],
                time: TIMES[rng.gen_range(0..TIMES.len())],
            }
        })
        .collect()
}

struct Draft {
    sentences: Vec<String>,
    summary: Vec<String>,
}

fn narrative<R: Rng>(rng: &mut R) -> Draft {
    let people = make_people(rng.gen_range(2..=3), rng);
    let mut fillers: Vec<&str> = FILLERS.to_vec();
    fillers.shuffle(rng);
    let mut fillers = fillers.into_iter();
    let mut sentences = Vec::new();
    let mut blocks = Vec::new();
    for (i, p) in people.iter().enumerate() {
        if i > 0 || rng.gen_bool(0.3) {
            for _ in 0..rng.gen_range(1..=2) {
                sentences.push(fillers.next().expect("enough fillers").to_string());
            }
        }
        let follow = p.follow_ups(rng);
        sentences.push(p.intro(rng));
        sentences.extend(follow.iter().map(|(full, _)| full.clone()));
        blocks.push(follow);
    }
    if rng.gen_bool(0.5) {
        sentences.push(fillers.next().expect("enough fillers").to_string());
    }
    // the most-mentioned person leads the summary; earliest on ties
    let main = (0..people.len())
        .max_by_key(|&i| (blocks[i].len(), std::cmp::Reverse(i)))
        .expect("at least two people");
    let mut summary = vec![people[main].intro_compressed()];
    summary.extend(blocks[main].iter().take(2).map(|(_, short)| short.clone()));
    Draft { sentences, summary }
}

/// `size` templated articles; identical seeds give identical corpora.
pub fn make_toy_corpus(seed: u64, size: usize) -> Result<Vec<RawArticle>> {
    if size == 0 {
        return Err(SenecaError::InvalidArgument("toy corpus size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..size)
        .map(|i| {
            let d = narrative(&mut rng);
            RawArticle {
                id: format!("toy-{seed}-{i:05}"),
                article: d.sentences,
                summary: d.summary,
            }
        })
        .collect())
}

/// Like [`make_toy_corpus`], but each reference is a single sentence that
/// also appears verbatim at a random position in its article.
pub fn make_planted_corpus(seed: u64, size: usize) -> Result<Vec<RawArticle>> {
    if size == 0 {
        return Err(SenecaError::InvalidArgument("planted corpus size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    Ok((0..size)
        .map(|i| {
            let mut d = narrative(&mut rng);
            let p = &make_people(1, &mut rng)[0];
            let planted = format!(
                "{} {} , the {} , said the {} would {} .",
                p.first, p.last, p.role, p.topic, p.outcome
            );
            let at = rng.gen_range(0..=d.sentences.len());
            d.sentences.insert(at, planted.clone());
            RawArticle {
                id: format!("planted-{seed}-{i:05}"),
                article: d.sentences,
                summary: vec![planted],
            }
        })
        .collect())
}

pub fn write_corpus_jsonl<W: Write>(corpus: &[RawArticle], mut out: W) -> Result<()> {
    for a in corpus {
        serde_json::to_writer(&mut out, a)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::{build_coherence_triples, TripleConfig};
    use crate::textproc::{extract_mention_clusters, Article, Lexicon};

    fn bytes(c: &[RawArticle]) -> Vec<u8> {
        let mut b = Vec::new();
        write_corpus_jsonl(c, &mut b).unwrap();
        b
    }

    #[test]
    fn seeded_reproducibility() {
        assert_eq!(bytes(&make_toy_corpus(3, 20).unwrap()), bytes(&make_toy_corpus(3, 20).unwrap()));
        assert_ne!(bytes(&make_toy_corpus(3, 20).unwrap()), bytes(&make_toy_corpus(4, 20).unwrap()));
        assert!(make_toy_corpus(1, 0).is_err());
    }

    #[test]
    fn every_article_yields_a_triple_and_summaries_are_long_enough() {
        let lex = Lexicon::default();
        let corpus = make_toy_corpus(11, 200).unwrap();
        let mut summary_sents = 0;
        for raw in &corpus {
            let a = Article::from_raw(raw);
            let c = extract_mention_clusters(&a, &lex);
            let t = build_coherence_triples(&[(a.clone(), c)], &TripleConfig::default(), 0);
            assert!(!t.is_empty(), "{:?}", raw.article);
            summary_sents += a.summary.len();
        }
        assert!(summary_sents as f64 / corpus.len() as f64 >= 2.0);
    }

    #[test]
    fn planted_sentence_is_in_article() {
        for raw in make_planted_corpus(2, 30).unwrap() {
            assert_eq!(raw.summary.len(), 1);
            assert!(raw.article.contains(&raw.summary[0]));
        }
    }
}
