//! Deterministic mention detection and clustering.
//!
//! Nominal mentions are person-name spans (honorific and/or first name and
//! surname, or capitalized runs when case is known) and noun-lexicon spans
//! with an optional determiner. Two nominals corefer when their heads match
//! or one normalized surface is a suffix of the other. A pronoun attaches to
//! the most recently mentioned compatible cluster no more than three
//! sentences back, or else becomes a singleton.

use serde::{Deserialize, Serialize};

use super::lexicon::{Gender, Lexicon, PronounClass};
use super::vocab::MENT;
use super::Article;
use crate::error::{Result, SenecaError};

pub const DEFAULT_SALIENT_K: usize = 6;
const PRONOUN_WINDOW: usize = 3;
const FIRST_SENTENCES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionKind {
    Nominal,
    Pronominal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub sentence_index: usize,
    /// Half-open token span `[start, end)` within the sentence.
    pub start: usize,
    pub end: usize,
    pub surface: Vec<String>,
    pub kind: MentionKind,
}

impl Mention {
    fn position(&self) -> (usize, usize) {
        (self.sentence_index, self.start)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionCluster {
    pub cluster_id: usize,
    pub mentions: Vec<Mention>,
    pub head: String,
}

impl MentionCluster {
    pub fn first_sentence(&self) -> usize {
        self.mentions[0].sentence_index
    }

    fn first_position(&self) -> (usize, usize) {
        self.mentions[0].position()
    }

    pub fn sentences(&self) -> impl Iterator<Item = usize> + '_ {
        self.mentions.iter().map(|m| m.sentence_index)
    }
}

enum Detected {
    Nominal {
        mention: Mention,
        gender: Gender,
        /// Surface without determiners, honorifics and periods.
        key: Vec<String>,
    },
    Pronoun {
        mention: Mention,
        class: PronounClass,
    },
}

fn is_word(tok: &str) -> bool {
    tok.chars().next().is_some_and(char::is_alphabetic)
}

struct Detector<'a> {
    lex: &'a Lexicon,
    tokens: &'a [String],
    caps: Option<&'a [bool]>,
}

impl Detector<'_> {
    fn closed_class(&self, t: &str) -> bool {
        self.lex.is_pronoun(t) || self.lex.is_function_word(t) || self.lex.is_determiner(t)
    }

    fn is_name_token(&self, j: usize) -> bool {
        let t = self.tokens[j].as_str();
        if !is_word(t) || self.closed_class(t) {
            return false;
        }
        match self.caps {
            Some(caps) => {
                caps.get(j).copied().unwrap_or(false)
                    && (j > 0 || !self.lex.is_noun(t) || self.lex.first_name_gender(t).is_some())
            }
            None => self.lex.first_name_gender(t).is_some(),
        }
    }

    fn is_surname_candidate(&self, j: usize) -> bool {
        let t = self.tokens[j].as_str();
        is_word(t)
            && !self.closed_class(t)
            && !self.lex.is_noun(t)
            && self.lex.honorific_gender(t).is_none()
    }

    fn name_span(&self, i: usize) -> Option<(usize, Gender, Vec<String>)> {
        let n = self.tokens.len();
        let mut j = i;
        let mut gender = Gender::Unknown;
        let mut honorific = false;
        if let Some(g) = self.lex.honorific_gender(&self.tokens[j]) {
            gender = g;
            honorific = true;
            j += 1;
            if j < n && self.tokens[j] == "." {
                j += 1;
            }
        }
        let name_start = j;
        while j < n && self.is_name_token(j) {
            if gender == Gender::Unknown {
                if let Some(g) = self.lex.first_name_gender(&self.tokens[j]) {
                    gender = g;
                }
            }
            j += 1;
        }
        if self.caps.is_none()
            && (honorific || j > name_start)
            && j < n
            && self.is_surname_candidate(j)
        {
            j += 1;
        }
        if j == name_start {
            return None;
        }
        Some((j, gender, self.tokens[name_start..j].to_vec()))
    }

    fn noun_span(&self, i: usize) -> Option<(usize, Vec<String>)> {
        let n = self.tokens.len();
        let mut j = i;
        if self.lex.is_determiner(&self.tokens[j]) {
            j += 1;
        }
        let start = j;
        while j < n && self.lex.is_noun(&self.tokens[j]) {
            j += 1;
        }
        (j > start).then(|| (j, self.tokens[start..j].to_vec()))
    }

    fn detect(&self, sentence_index: usize) -> Vec<Detected> {
        let mut out = Vec::new();
        let mut i = 0;
        let mention = |start: usize, end: usize, kind| Mention {
            sentence_index,
            start,
            end,
            surface: self.tokens[start..end].to_vec(),
            kind,
        };
        while i < self.tokens.len() {
            let tok = self.tokens[i].as_str();
            if let Some(class) = self.lex.pronoun_class(tok) {
                out.push(Detected::Pronoun {
                    mention: mention(i, i + 1, MentionKind::Pronominal),
                    class,
                });
                i += 1;
            } else if let Some((end, gender, key)) = self.name_span(i) {
                out.push(Detected::Nominal {
                    mention: mention(i, end, MentionKind::Nominal),
                    gender,
                    key,
                });
                i = end;
            } else if let Some((end, key)) = self.noun_span(i) {
                out.push(Detected::Nominal {
                    mention: mention(i, end, MentionKind::Nominal),
                    gender: Gender::Unknown,
                    key,
                });
                i = end;
            } else {
                i += 1;
            }
        }
        out
    }
}

struct Building {
    mentions: Vec<Mention>,
    keys: Vec<Vec<String>>,
    gender: Gender,
    head: String,
}

fn nominal_match(a: &[String], b: &[String]) -> bool {
    let head_eq = a.last() == b.last();
    let suffix = a.ends_with(b) || b.ends_with(a);
    head_eq || suffix
}

fn compatible(class: PronounClass, gender: Gender) -> bool {
    match class {
        PronounClass::Masculine => gender != Gender::Female,
        PronounClass::Feminine => gender != Gender::Male,
        PronounClass::Neuter | PronounClass::Plural => gender == Gender::Unknown,
    }
}

/// Detects mentions in every sentence and groups them into clusters.
/// Cluster ids follow first-mention order.
pub fn extract_mention_clusters(article: &Article, lex: &Lexicon) -> Vec<MentionCluster> {
    let mut clusters: Vec<Building> = Vec::new();
    for (s, tokens) in article.sentences.iter().enumerate() {
        let det = Detector {
            lex,
            tokens,
            caps: article.caps(s).filter(|c| c.len() == tokens.len()),
        };
        for d in det.detect(s) {
            match d {
                Detected::Nominal {
                    mention,
                    gender,
                    key,
                } => {
                    let found = clusters
                        .iter()
                        .position(|c| c.keys.iter().any(|k| nominal_match(k, &key)));
                    match found {
                        Some(ci) => {
                            let c = &mut clusters[ci];
                            if c.gender == Gender::Unknown {
                                c.gender = gender;
                            }
                            c.mentions.push(mention);
                            c.keys.push(key);
                        }
                        None => clusters.push(Building {
                            head: key.last().cloned().unwrap_or_default(),
                            mentions: vec![mention],
                            keys: vec![key],
                            gender,
                        }),
                    }
                }
                Detected::Pronoun { mention, class } => {
                    let target = clusters
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| !c.keys.is_empty() && compatible(class, c.gender))
                        .filter(|(_, c)| {
                            let last = c.mentions.last().expect("non-empty").sentence_index;
                            s - last <= PRONOUN_WINDOW
                        })
                        .max_by_key(|(_, c)| c.mentions.last().expect("non-empty").position())
                        .map(|(i, _)| i);
                    match target {
                        Some(ci) => clusters[ci].mentions.push(mention),
                        None => clusters.push(Building {
                            head: mention.surface[0].clone(),
                            mentions: vec![mention],
                            keys: Vec::new(),
                            gender: Gender::Unknown,
                        }),
                    }
                }
            }
        }
    }
    clusters
        .into_iter()
        .enumerate()
        .map(|(cluster_id, b)| MentionCluster {
            cluster_id,
            mentions: b.mentions,
            head: b.head,
        })
        .collect()
}

/// Clusters with a mention in the first three sentences, plus the `k`
/// clusters with the most mentions (ties to the earlier first mention),
/// ordered by first mention.
pub fn select_salient_clusters(clusters: &[MentionCluster], k: usize) -> Vec<MentionCluster> {
    let mut by_size: Vec<&MentionCluster> = clusters.iter().collect();
    by_size.sort_by(|a, b| {
        b.mentions
            .len()
            .cmp(&a.mentions.len())
            .then_with(|| a.first_position().cmp(&b.first_position()))
    });
    let top: Vec<usize> = by_size.iter().take(k).map(|c| c.cluster_id).collect();
    let mut out: Vec<MentionCluster> = clusters
        .iter()
        .filter(|c| c.first_sentence() < FIRST_SENTENCES || top.contains(&c.cluster_id))
        .cloned()
        .collect();
    out.sort_by_key(|c| c.first_position());
    out
}

/// Mentions in document order joined by the `<ment>` separator.
pub fn cluster_to_token_sequence(cluster: &MentionCluster) -> Result<Vec<String>> {
    if cluster.mentions.is_empty() {
        return Err(SenecaError::EmptyInput(format!(
            "cluster {} has no mentions",
            cluster.cluster_id
        )));
    }
    let mut out = Vec::new();
    for (i, m) in cluster.mentions.iter().enumerate() {
        if i > 0 {
            out.push(MENT.to_string());
        }
        out.extend(m.surface.iter().cloned());
    }
    Ok(out)
}
