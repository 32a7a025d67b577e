//! ROUGE-N and ROUGE-L over token sequences.
//!
//! No stemming or stopword removal; multi-sentence texts are scored as one
//! concatenated token sequence.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SenecaError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let precision = if candidate_total == 0 {
            0.0
        } else {
            overlap as f64 / candidate_total as f64
        };
        let recall = if reference_total == 0 {
            0.0
        } else {
            overlap as f64 / reference_total as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RougeScore {
            precision,
            recall,
            f1,
        }
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            let key: Vec<&str> = w.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap: `(overlap, candidate n-grams, reference n-grams)`.
pub fn ngram_overlap<S: AsRef<str>>(
    n: usize,
    candidate: &[S],
    reference: &[S],
) -> Result<(usize, usize, usize)> {
    if n == 0 {
        return Err(SenecaError::InvalidArgument("ROUGE-N needs n >= 1".into()));
    }
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    Ok((
        overlap,
        candidate.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    ))
}

pub fn rouge_n<S: AsRef<str>>(n: usize, candidate: &[S], reference: &[S]) -> Result<RougeScore> {
    let (o, c, r) = ngram_overlap(n, candidate, reference)?;
    Ok(RougeScore::from_counts(o, c, r))
}

/// Longest common subsequence length, O(|a|·|b|) time and O(|b|) memory.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> RougeScore {
    let lcs = lcs_len(candidate, reference);
    RougeScore::from_counts(lcs, candidate.len(), reference.len())
}

/// Mean of ROUGE-L F1 and ROUGE-2 F1.
pub fn rouge_reward<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    let r2 = rouge_n(2, candidate, reference).expect("n = 2 is valid");
    0.5 * (rouge_l(candidate, reference).f1 + r2.f1)
}

pub fn rouge_1_f1<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    rouge_n(1, candidate, reference).expect("n = 1 is valid").f1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn identical_unigrams() {
        assert_eq!(rouge_n(1, &t("a b c"), &t("a b c")).unwrap().f1, 1.0);
    }

    #[test]
    fn bigram_example() {
        let s = rouge_n(2, &t("the cat sat on"), &t("the cat ate")).unwrap();
        assert!(close(s.precision, 1.0 / 3.0) && close(s.recall, 0.5) && close(s.f1, 0.4));
    }

    #[test]
    fn candidate_shorter_than_n() {
        assert_eq!(rouge_n(3, &t("a b"), &t("a b c")).unwrap(), RougeScore::default());
    }

    #[test]
    fn n_zero_is_error() {
        assert!(rouge_n(0, &t("a"), &t("a")).is_err());
    }

    #[test]
    fn lcs_example() {
        let s = rouge_l(&t("a b c d"), &t("a c b d"));
        assert!(close(s.precision, 0.75) && close(s.recall, 0.75) && close(s.f1, 0.75));
    }

    #[test]
    fn lcs_empty_side() {
        assert_eq!(rouge_l(&t(""), &t("a b")), RougeScore::default());
        assert_eq!(rouge_l(&t("a"), &t("")), RougeScore::default());
    }

    #[test]
    fn lcs_prefix() {
        let s = rouge_l(&t("a b"), &t("a b c d"));
        assert!(close(s.precision, 1.0) && close(s.recall, 0.5));
    }

    #[test]
    fn reward_examples() {
        assert_eq!(rouge_reward(&t("x y z"), &t("x y z")), 1.0);
        let r = rouge_reward(&t("the cat sat on"), &t("the cat ate"));
        assert!(close(r, (0.4 + 4.0 / 7.0) / 2.0));
        assert!((r - 0.4857).abs() < 1e-4);
        assert_eq!(rouge_reward(&t("a b"), &t("c d")), 0.0);
    }

    fn toks() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 0..10)
            .prop_map(|v| v.into_iter().map(String::from).collect())
    }

    proptest! {
        #[test]
        fn f1_symmetric(a in toks(), b in toks(), n in 1usize..4) {
            let x = rouge_n(n, &a, &b).unwrap();
            let y = rouge_n(n, &b, &a).unwrap();
            prop_assert!((x.f1 - y.f1).abs() < 1e-12);
            prop_assert!((x.precision - y.recall).abs() < 1e-12);
            let l1 = rouge_l(&a, &b);
            let l2 = rouge_l(&b, &a);
            prop_assert!((l1.f1 - l2.f1).abs() < 1e-12);
        }

        #[test]
        fn bounded_components(a in toks(), b in toks()) {
            for s in [rouge_n(1, &a, &b).unwrap(), rouge_n(2, &a, &b).unwrap(), rouge_l(&a, &b)] {
                for v in [s.precision, s.recall, s.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn appending_reference_token_keeps_recall(a in toks(), b in toks(), k in 0usize..10) {
            prop_assume!(!b.is_empty());
            let mut longer = a.clone();
            longer.push(b[k % b.len()].clone());
            for n in 1..3 {
                prop_assert!(rouge_n(n, &longer, &b).unwrap().recall >= rouge_n(n, &a, &b).unwrap().recall);
            }
            prop_assert!(rouge_l(&longer, &b).recall >= rouge_l(&a, &b).recall);
        }

        #[test]
        fn self_rouge_l_is_one(a in toks()) {
            prop_assume!(!a.is_empty());
            prop_assert_eq!(rouge_l(&a, &a).f1, 1.0);
        }
    }
}
