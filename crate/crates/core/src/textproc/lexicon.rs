//! Word lists driving mention detection and the linguistic rewards.
//!
//! The defaults are compiled in from `resources/`. Setting
//! [`LEXICON_DIR_ENV`] points [`Lexicon::from_env`] at a directory holding
//! replacement files with the same names; missing files fall back to the
//! bundled copy.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::Result;

pub const LEXICON_DIR_ENV: &str = "SENECA_LEXICON_DIR";

const FILES: [(&str, &str); 12] = [
    ("pronouns_masculine.txt", include_str!("../../resources/pronouns_masculine.txt")),
    ("pronouns_feminine.txt", include_str!("../../resources/pronouns_feminine.txt")),
    ("pronouns_neuter.txt", include_str!("../../resources/pronouns_neuter.txt")),
    ("pronouns_plural.txt", include_str!("../../resources/pronouns_plural.txt")),
    ("determiners.txt", include_str!("../../resources/determiners.txt")),
    ("honorifics_male.txt", include_str!("../../resources/honorifics_male.txt")),
    ("honorifics_female.txt", include_str!("../../resources/honorifics_female.txt")),
    ("honorifics_neutral.txt", include_str!("../../resources/honorifics_neutral.txt")),
    ("names_male.txt", include_str!("../../resources/names_male.txt")),
    ("names_female.txt", include_str!("../../resources/names_female.txt")),
    ("nouns.txt", include_str!("../../resources/nouns.txt")),
    ("function_words.txt", include_str!("../../resources/function_words.txt")),
];

/// Grammatical class of a third-person pronoun.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PronounClass {
    Masculine,
    Feminine,
    Neuter,
    Plural,
}

/// Gender inferred for a nominal mention or cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    masculine: HashSet<String>,
    feminine: HashSet<String>,
    neuter: HashSet<String>,
    plural: HashSet<String>,
    determiners: HashSet<String>,
    honorifics_male: HashSet<String>,
    honorifics_female: HashSet<String>,
    honorifics_neutral: HashSet<String>,
    names_male: HashSet<String>,
    names_female: HashSet<String>,
    nouns: HashSet<String>,
    function_words: HashSet<String>,
}

fn parse(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_sources(|name| {
            FILES
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.to_string())
                .expect("bundled lexicon")
        })
    }
}

impl Lexicon {
    fn from_sources(mut load: impl FnMut(&str) -> String) -> Self {
        let mut get = |name: &str| parse(&load(name));
        Lexicon {
            masculine: get("pronouns_masculine.txt"),
            feminine: get("pronouns_feminine.txt"),
            neuter: get("pronouns_neuter.txt"),
            plural: get("pronouns_plural.txt"),
            determiners: get("determiners.txt"),
            honorifics_male: get("honorifics_male.txt"),
            honorifics_female: get("honorifics_female.txt"),
            honorifics_neutral: get("honorifics_neutral.txt"),
            names_male: get("names_male.txt"),
            names_female: get("names_female.txt"),
            nouns: get("nouns.txt"),
            function_words: get("function_words.txt"),
        }
    }

    /// Loads files from `dir`, using the bundled copy for any that are absent.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut first_err = None;
        let lex = Self::from_sources(|name| {
            let path = dir.join(name);
            if path.exists() {
                match fs::read_to_string(&path) {
                    Ok(t) => return t,
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            FILES
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.to_string())
                .expect("bundled lexicon")
        });
        match first_err {
            Some(e) => Err(e.into()),
            None => Ok(lex),
        }
    }

    /// Bundled lexicon, or the directory named by `SENECA_LEXICON_DIR`.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(LEXICON_DIR_ENV) {
            Some(dir) => Self::from_dir(dir),
            None => Ok(Self::default()),
        }
    }

    pub fn pronoun_class(&self, tok: &str) -> Option<PronounClass> {
        if self.masculine.contains(tok) {
            Some(PronounClass::Masculine)
        } else if self.feminine.contains(tok) {
            Some(PronounClass::Feminine)
        } else if self.neuter.contains(tok) {
            Some(PronounClass::Neuter)
        } else if self.plural.contains(tok) {
            Some(PronounClass::Plural)
        } else {
            None
        }
    }

    pub fn is_pronoun(&self, tok: &str) -> bool {
        self.pronoun_class(tok).is_some()
    }

    pub fn is_determiner(&self, tok: &str) -> bool {
        self.determiners.contains(tok)
    }

    pub fn honorific_gender(&self, tok: &str) -> Option<Gender> {
        if self.honorifics_male.contains(tok) {
            Some(Gender::Male)
        } else if self.honorifics_female.contains(tok) {
            Some(Gender::Female)
        } else if self.honorifics_neutral.contains(tok) {
            Some(Gender::Unknown)
        } else {
            None
        }
    }

    pub fn first_name_gender(&self, tok: &str) -> Option<Gender> {
        if self.names_male.contains(tok) {
            Some(Gender::Male)
        } else if self.names_female.contains(tok) {
            Some(Gender::Female)
        } else {
            None
        }
    }

    pub fn is_noun(&self, tok: &str) -> bool {
        self.nouns.contains(tok)
    }

    pub fn is_function_word(&self, tok: &str) -> bool {
        self.function_words.contains(tok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_classes() {
        let lex = Lexicon::default();
        assert_eq!(lex.pronoun_class("he"), Some(PronounClass::Masculine));
        assert_eq!(lex.pronoun_class("their"), Some(PronounClass::Plural));
        assert_eq!(lex.honorific_gender("mr"), Some(Gender::Male));
        assert_eq!(lex.first_name_gender("mary"), Some(Gender::Female));
        assert!(lex.is_noun("mayor"));
        assert!(lex.is_determiner("the"));
    }

    #[test]
    fn directory_override_falls_back() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("nouns.txt"), "widget\n# comment\n").unwrap();
        let lex = Lexicon::from_dir(dir.path()).unwrap();
        assert!(lex.is_noun("widget"));
        assert!(!lex.is_noun("mayor"));
        assert!(lex.is_pronoun("she"));
    }
}
