//! Rule-based linguistic rewards, reward mixing, and corpus-level rule
//! statistics.
//!
//! Noun-phrase onsets are approximated lexically: a noun-lexicon token, or
//! a determiner followed by a non-pronoun token.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SenecaError};
use crate::textproc::Lexicon;

pub const DEFAULT_GAMMA_COH: f64 = 0.01;
pub const DEFAULT_GAMMA_REF: f64 = 0.005;
pub const DEFAULT_GAMMA_APP: f64 = 0.005;

const PERSONAL: [&str; 7] = ["he", "him", "she", "her", "it", "they", "them"];
const POSSESSIVE: [&str; 6] = ["his", "hers", "its", "their", "theirs", "her"];
const NP_DETERMINERS: [&str; 7] = ["a", "an", "the", "this", "that", "these", "those"];
const APPOSITION_TRIGGERS: [&str; 12] = [
    "a", "an", "the", "this", "that", "these", "those", "his", "her", "its", "their", "whose",
];
const RELATIVE_WORDS: [&str; 4] = ["who", "which", "where", "whose"];

fn lower(tok: &str) -> String {
    tok.to_lowercase()
}

fn is_reference_pronoun(tok: &str) -> bool {
    PERSONAL.contains(&tok) || POSSESSIVE.contains(&tok)
}

/// −1 when a third-person or possessive pronoun appears before the first
/// noun-phrase onset of the summary, else 0.
pub fn referential_clarity_reward<S: AsRef<str>>(summary: &[Vec<S>], lex: &Lexicon) -> f64 {
    let tokens: Vec<String> = summary.iter().flatten().map(|t| lower(t.as_ref())).collect();
    for (i, tok) in tokens.iter().enumerate() {
        if is_reference_pronoun(tok) {
            return -1.0;
        }
        let det_np = NP_DETERMINERS.contains(&tok.as_str())
            && tokens
                .get(i + 1)
                .is_some_and(|next| !is_reference_pronoun(next) && !lex.is_pronoun(next));
        if lex.is_noun(tok) || det_np {
            return 0.0;
        }
    }
    0.0
}

fn sentence_has_apposition(sentence: &[String]) -> bool {
    let commas: Vec<usize> = sentence
        .iter()
        .enumerate()
        .filter(|(_, t)| *t == ",")
        .map(|(i, _)| i)
        .collect();
    commas.len() >= 2
        && sentence
            .get(commas[0] + 1)
            .is_some_and(|t| APPOSITION_TRIGGERS.contains(&t.as_str()))
}

/// −1 when any sentence has at least two commas and the token after its
/// first comma is a possessive pronoun or determiner, else 0.
pub fn apposition_reward<S: AsRef<str>>(summary: &[Vec<S>]) -> f64 {
    let hit = summary.iter().any(|s| {
        let s: Vec<String> = s.iter().map(|t| lower(t.as_ref())).collect();
        sentence_has_apposition(&s)
    });
    if hit {
        -1.0
    } else {
        0.0
    }
}

/// A comma directly followed by who/which/where/whose.
pub fn has_relative_clause<S: AsRef<str>>(summary: &[Vec<S>]) -> bool {
    summary.iter().any(|s| {
        s.windows(2).any(|w| {
            w[0].as_ref() == "," && RELATIVE_WORDS.contains(&lower(w[1].as_ref()).as_str())
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub gamma_coh: f64,
    pub gamma_ref: f64,
    pub gamma_app: f64,
    pub use_coh: bool,
    pub use_ref: bool,
    pub use_app: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            gamma_coh: DEFAULT_GAMMA_COH,
            gamma_ref: DEFAULT_GAMMA_REF,
            gamma_app: DEFAULT_GAMMA_APP,
            use_coh: false,
            use_ref: false,
            use_app: false,
        }
    }
}

impl RewardConfig {
    /// ROUGE only.
    pub fn rouge_only() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_rouge: f64,
    pub r_coh: f64,
    pub r_ref: f64,
    pub r_app: f64,
    pub total: f64,
}

/// `total = r_rouge + γ_coh·r_coh + γ_ref·r_ref + γ_app·r_app` over the
/// enabled terms.
pub fn mix_reward(r_rouge: f64, r_coh: f64, r_ref: f64, r_app: f64, cfg: &RewardConfig) -> RewardBreakdown {
    let mut total = r_rouge;
    if cfg.use_coh {
        total += cfg.gamma_coh * r_coh;
    }
    if cfg.use_ref {
        total += cfg.gamma_ref * r_ref;
    }
    if cfg.use_app {
        total += cfg.gamma_app * r_app;
    }
    RewardBreakdown {
        r_rouge,
        r_coh,
        r_ref,
        r_app,
        total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub count: usize,
    /// Percent of summaries with a pronoun before any noun phrase.
    pub ref_pct: f64,
    /// Percent with a comma + wh-word relative clause.
    pub relcl_pct: f64,
    /// Percent with a comma-delimited appositive.
    pub app_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub system: QualityRow,
    pub reference: QualityRow,
}

impl QualityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("source,count,ref_pct,relcl_pct,app_pct\n");
        for (name, r) in [("system", &self.system), ("reference", &self.reference)] {
            s.push_str(&format!(
                "{name},{},{:.4},{:.4},{:.4}\n",
                r.count, r.ref_pct, r.relcl_pct, r.app_pct
            ));
        }
        s
    }
}

fn quality_row(summaries: &[Vec<Vec<String>>], lex: &Lexicon) -> QualityRow {
    let n = summaries.len();
    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    let refs = summaries
        .iter()
        .filter(|s| referential_clarity_reward(s, lex) < 0.0)
        .count();
    let relcl = summaries.iter().filter(|s| has_relative_clause(s)).count();
    let app = summaries.iter().filter(|s| apposition_reward(s) < 0.0).count();
    QualityRow {
        count: n,
        ref_pct: pct(refs),
        relcl_pct: pct(relcl),
        app_pct: pct(app),
    }
}

/// Rule-trigger percentages for system summaries and their references.
pub fn corpus_quality_stats(
    summaries: &[Vec<Vec<String>>],
    references: &[Vec<Vec<String>>],
    lex: &Lexicon,
) -> Result<QualityReport> {
    if summaries.len() != references.len() {
        return Err(SenecaError::LengthMismatch {
            left: summaries.len(),
            right: references.len(),
        });
    }
    if summaries.is_empty() {
        return Err(SenecaError::EmptyInput("quality statistics corpus".into()));
    }
    Ok(QualityReport {
        system: quality_row(summaries, lex),
        reference: quality_row(references, lex),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn summ(sents: &[&str]) -> Vec<Vec<String>> {
        sents
            .iter()
            .map(|s| s.split_whitespace().map(String::from).collect())
            .collect()
    }

    #[test]
    fn pronoun_before_np() {
        let lex = Lexicon::default();
        assert_eq!(referential_clarity_reward(&summ(&["he said the plan works ."]), &lex), -1.0);
        assert_eq!(
            referential_clarity_reward(&summ(&["the mayor said he would resign ."]), &lex),
            0.0
        );
        assert_eq!(referential_clarity_reward::<String>(&[], &lex), 0.0);
    }

    #[test]
    fn apposition_examples() {
        assert_eq!(apposition_reward(&summ(&["the senator , his longtime rival , spoke ."])), -1.0);
        assert_eq!(apposition_reward(&summ(&["he came , saw , and left ."])), 0.0);
        assert_eq!(apposition_reward(&summ(&["no commas here"])), 0.0);
    }

    #[test]
    fn mixing() {
        let coh = RewardConfig {
            use_coh: true,
            ..RewardConfig::default()
        };
        assert!((mix_reward(0.5, 0.8, 0.0, 0.0, &coh).total - 0.508).abs() < 1e-12);
        let none = RewardConfig::default();
        assert_eq!(mix_reward(0.3, 0.9, -1.0, -1.0, &none).total, 0.3);
        let refc = RewardConfig {
            use_ref: true,
            ..RewardConfig::default()
        };
        assert!((mix_reward(0.3, 0.0, -1.0, 0.0, &refc).total - 0.295).abs() < 1e-12);
    }

    #[test]
    fn quality_percentages() {
        let lex = Lexicon::default();
        let sys = vec![summ(&["he left ."]), summ(&["the mayor left ."])];
        let report = corpus_quality_stats(&sys, &sys, &lex).unwrap();
        assert_eq!(report.system.ref_pct, 50.0);
        assert!(corpus_quality_stats(&[], &[], &lex).is_err());
        assert!(corpus_quality_stats(&sys, &sys[..1], &lex).is_err());
        assert!(has_relative_clause(&summ(&["the senator , who lost , spoke"])));
    }

    fn arb_summary() -> impl Strategy<Value = Vec<Vec<String>>> {
        let words = vec!["he", "his", "the", "a", "mayor", "said", ",", "it", "left", "their", "plan"];
        prop::collection::vec(prop::collection::vec(prop::sample::select(words), 0..8), 0..4)
            .prop_map(|v| v.into_iter().map(|s| s.into_iter().map(String::from).collect()).collect())
    }

    proptest! {
        #[test]
        fn rewards_in_range_and_leading_np_clears(s in arb_summary()) {
            let lex = Lexicon::default();
            let r = referential_clarity_reward(&s, &lex);
            prop_assert!(r == 0.0 || r == -1.0);
            let a = apposition_reward(&s);
            prop_assert!(a == 0.0 || a == -1.0);
            let mut led = vec![vec!["the".to_string(), "mayor".to_string(), "spoke".to_string()]];
            led.extend(s.clone());
            prop_assert_eq!(referential_clarity_reward(&led, &lex), 0.0);
            let upper: Vec<Vec<String>> = s.iter().map(|x| x.iter().map(|t| t.to_uppercase()).collect()).collect();
            prop_assert_eq!(referential_clarity_reward(&upper, &lex), r);
            prop_assert_eq!(apposition_reward(&upper), a);
        }

        #[test]
        fn mix_is_linear(r in 0.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0) {
            let cfg = RewardConfig { use_coh: true, ..RewardConfig::default() };
            let a = mix_reward(r, c, 0.0, 0.0, &cfg).total;
            let b = mix_reward(r, d, 0.0, 0.0, &cfg).total;
            prop_assert!((a - b - cfg.gamma_coh * (c - d)).abs() < 1e-12);
            let zero = RewardConfig { use_coh: true, gamma_coh: 0.0, ..RewardConfig::default() };
            prop_assert_eq!(mix_reward(r, c, 0.0, 0.0, &zero).total, r);
        }
    }
}
