//! Extractive training labels for the content selector.

use serde::{Deserialize, Serialize};

use crate::metrics::{rouge_l, rouge_n};

pub const DEFAULT_RECALL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionLabel {
    pub article_id: String,
    /// Target decode order; the stop marker is implicit after the last index.
    pub indices: Vec<usize>,
}

fn concat_selected(article: &[Vec<String>], selected: &[usize]) -> Vec<String> {
    let mut idx = selected.to_vec();
    idx.sort_unstable();
    idx.into_iter().flat_map(|i| article[i].iter().cloned()).collect()
}

/// ROUGE-2 F1 of the selected sentences (concatenated in document order)
/// against the reference.
pub fn selection_rouge2(article: &[Vec<String>], selected: &[usize], reference: &[String]) -> f64 {
    rouge_n(2, &concat_selected(article, selected), reference)
        .expect("n = 2")
        .f1
}

/// Greedily adds the sentence with the largest strict ROUGE-2 F1 gain until
/// none improves; ties go to the lowest index. Returns the pick order.
pub fn greedy_rouge2_selection(article: &[Vec<String>], reference: &[String]) -> Vec<usize> {
    let mut selected: Vec<usize> = Vec::new();
    let mut best = 0.0;
    loop {
        let mut pick = None;
        for i in 0..article.len() {
            if selected.contains(&i) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(i);
            let score = selection_rouge2(article, &trial, reference);
            if score > pick.map_or(best, |(_, s)| s) {
                pick = Some((i, score));
            }
        }
        match pick {
            Some((i, s)) => {
                selected.push(i);
                best = s;
            }
            None => return selected,
        }
    }
}

/// Sentences whose best-aligned reference sentence is recalled above
/// `threshold` by ROUGE-L (LCS over the reference sentence's length).
pub fn augment_by_rouge_l_recall(
    article: &[Vec<String>],
    reference: &[Vec<String>],
    threshold: f64,
) -> Vec<usize> {
    article
        .iter()
        .enumerate()
        .filter(|(_, sent)| {
            best_aligned_recall(sent, reference).is_some_and(|(_, recall)| recall > threshold)
        })
        .map(|(i, _)| i)
        .collect()
}

/// `(reference sentence index, recall)` of the best alignment, earliest on ties.
pub fn best_aligned_recall(sentence: &[String], reference: &[Vec<String>]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, r) in reference.iter().enumerate() {
        let recall = rouge_l(sentence, r).recall;
        if best.is_none_or(|(_, b)| recall > b) {
            best = Some((j, recall));
        }
    }
    best
}

/// Greedy picks in order, then augmented sentences by index; if both are
/// empty, the first two sentences (or the only one).
pub fn build_labels(
    article_id: &str,
    article: &[Vec<String>],
    reference: &[Vec<String>],
) -> SelectionLabel {
    let flat: Vec<String> = reference.concat();
    let greedy = greedy_rouge2_selection(article, &flat);
    let augmented = augment_by_rouge_l_recall(article, reference, DEFAULT_RECALL_THRESHOLD);
    SelectionLabel {
        article_id: article_id.to_string(),
        indices: merge_labels(&greedy, &augmented, article.len()),
    }
}

/// Union rule used by [`build_labels`].
pub fn merge_labels(greedy: &[usize], augmented: &[usize], sentences: usize) -> Vec<usize> {
    let mut out = greedy.to_vec();
    let mut rest: Vec<usize> = augmented
        .iter()
        .copied()
        .filter(|i| !greedy.contains(i))
        .collect();
    rest.sort_unstable();
    rest.dedup();
    out.extend(rest);
    if out.is_empty() {
        out = (0..sentences.min(2)).collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sents(text: &[&str]) -> Vec<Vec<String>> {
        text.iter()
            .map(|s| s.split_whitespace().map(String::from).collect())
            .collect()
    }

    #[test]
    fn verbatim_sentence_is_chosen_alone() {
        let art = sents(&["a b c", "d e f", "the cat sat on the mat", "g h"]);
        let reference = sents(&["the cat sat on the mat"]);
        assert_eq!(greedy_rouge2_selection(&art, &reference.concat()), [2]);
    }

    #[test]
    fn no_shared_bigram_selects_nothing() {
        let art = sents(&["a b", "c d"]);
        assert!(greedy_rouge2_selection(&art, &sents(&["x y z"]).concat()).is_empty());
    }

    #[test]
    fn identical_sentence_is_augmented() {
        let art = sents(&["x y z", "p q"]);
        assert_eq!(augment_by_rouge_l_recall(&art, &sents(&["p q"]), 0.5), [1]);
    }

    #[test]
    fn low_recall_is_excluded() {
        // LCS with the 5-token reference sentence is 2, recall 0.4
        let art = sents(&["a x b"]);
        let reference = sents(&["a b c d e"]);
        assert_eq!(best_aligned_recall(&art[0], &reference), Some((0, 0.4)));
        assert!(augment_by_rouge_l_recall(&art, &reference, 0.5).is_empty());
    }

    #[test]
    fn threshold_is_strict() {
        let art = sents(&["a b"]);
        assert!(augment_by_rouge_l_recall(&art, &sents(&["a b c d"]), 0.5).is_empty());
    }

    #[test]
    fn empty_reference_augments_nothing() {
        assert!(augment_by_rouge_l_recall(&sents(&["a b"]), &[], 0.5).is_empty());
    }

    #[test]
    fn union_order() {
        assert_eq!(merge_labels(&[3], &[3, 5], 6), [3, 5]);
        assert_eq!(merge_labels(&[4, 1], &[0, 1, 2], 6), [4, 1, 0, 2]);
    }

    #[test]
    fn fallback_first_two() {
        assert_eq!(merge_labels(&[], &[], 4), [0, 1]);
        assert_eq!(merge_labels(&[], &[], 1), [0]);
        let label = build_labels("a", &sents(&["a b", "c d", "e f", "g h"]), &sents(&["z y"]));
        assert_eq!(label.indices, [0, 1]);
    }
}
