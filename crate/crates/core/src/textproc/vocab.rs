use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Result, SenecaError};
use crate::textproc::Article;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const START: &str = "<start>";
pub const STOP: &str = "<stop>";
pub const MENT: &str = "<ment>";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const START_ID: usize = 2;
pub const STOP_ID: usize = 3;
pub const MENT_ID: usize = 4;

const RESERVED: [&str; 5] = [PAD, UNK, START, STOP, MENT];

/// Token ids. The reserved tokens always occupy ids 0..5.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    to_id: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocabulary {
    fn from_tokens(words: impl IntoIterator<Item = String>) -> Self {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(words);
        let to_id = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { to_id, tokens }
    }

    /// Keeps the `cap` most frequent tokens over article and summary
    /// sentences; equal counts are ordered lexicographically.
    pub fn build<'a>(corpus: impl IntoIterator<Item = &'a Article>, cap: usize) -> Result<Self> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut articles = 0;
        for art in corpus {
            articles += 1;
            for tok in art.sentences.iter().chain(&art.summary).flatten() {
                if !RESERVED.contains(&tok.as_str()) {
                    *counts.entry(tok.as_str()).or_default() += 1;
                }
            }
        }
        if articles == 0 {
            return Err(SenecaError::EmptyInput("vocabulary corpus".into()));
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Ok(Self::from_tokens(
            ranked.into_iter().take(cap).map(|(t, _)| t.to_string()),
        ))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.to_id.get(token).copied()
    }

    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK_ID)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(UNK, String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.to_id.contains_key(token)
    }

    /// One token per line, reserved tokens first.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < RESERVED.len() || lines[..RESERVED.len()] != RESERVED {
            return Err(SenecaError::Format(
                "vocabulary file must start with the reserved tokens".into(),
            ));
        }
        Ok(Self::from_tokens(
            lines[RESERVED.len()..].iter().map(|s| s.to_string()),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(tokens: &[&str]) -> Article {
        Article {
            id: "a".into(),
            sentences: vec![tokens.iter().map(|s| s.to_string()).collect()],
            summary: vec![],
            capitalized: vec![],
        }
    }

    #[test]
    fn cap_keeps_most_frequent() {
        let v = Vocabulary::build([&article(&["a", "a", "b"])], 1).unwrap();
        assert!(v.contains("a") && !v.contains("b"));
        assert_eq!(v.len(), 6);
        assert_eq!(v.id(MENT), MENT_ID);
        assert_eq!(v.id("b"), UNK_ID);
    }

    #[test]
    fn large_cap_keeps_everything() {
        let v = Vocabulary::build([&article(&["a", "b", "c"])], 100).unwrap();
        assert!(["a", "b", "c"].iter().all(|t| v.contains(t)));
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = Vocabulary::build([&article(&["y", "x"])], 1).unwrap();
        assert!(v.contains("x") && !v.contains("y"));
    }

    #[test]
    fn empty_corpus_is_error() {
        assert!(Vocabulary::build(std::iter::empty::<&Article>(), 10).is_err());
    }

    #[test]
    fn file_round_trip() {
        let v = Vocabulary::build([&article(&["b", "a", "a"])], 10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
    }
}
