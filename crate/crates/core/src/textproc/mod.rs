//! Tokenization, vocabulary, and rule-based entity mention clustering.

mod coref;
mod lexicon;
mod tokenize;
mod vocab;

use serde::{Deserialize, Serialize};

pub use coref::{
    cluster_to_token_sequence, extract_mention_clusters, select_salient_clusters, Mention,
    MentionCluster, MentionKind, DEFAULT_SALIENT_K,
};
pub use lexicon::{Gender, Lexicon, PronounClass, LEXICON_DIR_ENV};
pub use tokenize::{tokenize_and_normalize, tokenize_cased, CasedToken};
pub use vocab::{
    Vocabulary, MENT, MENT_ID, PAD, PAD_ID, START, START_ID, STOP, STOP_ID, UNK, UNK_ID,
};

/// One line of the corpus ingestion format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawArticle {
    pub id: String,
    pub article: Vec<String>,
    #[serde(default)]
    pub summary: Vec<String>,
}

/// A tokenized article. `capitalized` mirrors `sentences` when the raw text
/// was available and is empty otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
    #[serde(default)]
    pub summary: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub capitalized: Vec<Vec<bool>>,
}

impl Article {
    /// Tokenizes raw sentences; sentences with no tokens are dropped.
    pub fn from_raw(raw: &RawArticle) -> Self {
        let mut sentences = Vec::new();
        let mut capitalized = Vec::new();
        for s in &raw.article {
            let toks = tokenize_cased(s);
            if toks.is_empty() {
                continue;
            }
            capitalized.push(toks.iter().map(|t| t.capitalized).collect());
            sentences.push(toks.into_iter().map(|t| t.text).collect());
        }
        let summary = raw
            .summary
            .iter()
            .map(|s| tokenize_and_normalize(s))
            .filter(|t| !t.is_empty())
            .collect();
        Article {
            id: raw.id.clone(),
            sentences,
            summary,
            capitalized,
        }
    }

    /// Builds an article from already tokenized sentences (no case info).
    pub fn from_tokens(id: impl Into<String>, sentences: Vec<Vec<String>>) -> Self {
        Article {
            id: id.into(),
            sentences,
            summary: Vec::new(),
            capitalized: Vec::new(),
        }
    }

    pub fn caps(&self, sentence: usize) -> Option<&[bool]> {
        self.capitalized.get(sentence).map(Vec::as_slice)
    }

    pub fn summary_tokens(&self) -> Vec<String> {
        self.summary.concat()
    }
}

/// Splits a token sequence into sentences after each `.`, `!` or `?`.
pub fn split_sentences(tokens: &[String]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for t in tokens {
        cur.push(t.clone());
        if matches!(t.as_str(), "." | "!" | "?") {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_article_is_tokenized() {
        let raw = RawArticle {
            id: "x".into(),
            article: vec!["Bertie Ahern called.".into(), "  ".into(), "He left.".into()],
            summary: vec!["Ahern left.".into()],
        };
        let a = Article::from_raw(&raw);
        assert_eq!(a.sentences.len(), 2);
        assert_eq!(a.capitalized[0], [true, true, false, false]);
        assert_eq!(a.summary, [["ahern", "left", "."]]);
    }

    #[test]
    fn split_on_periods() {
        let toks: Vec<String> = "a b . c d".split(' ').map(String::from).collect();
        assert_eq!(split_sentences(&toks).len(), 2);
        assert!(split_sentences(&[]).is_empty());
    }
}
