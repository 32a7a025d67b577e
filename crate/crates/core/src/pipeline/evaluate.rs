//! Corpus-level ROUGE and coherence scoring.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coherence::{summary_coherence, CoherenceModel};
use crate::error::{Result, SenecaError};
use crate::metrics::{rouge_l, rouge_n};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
    /// Absent when no coherence model was supplied.
    pub coherence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub count: usize,
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
    pub coherence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mean: EvalSummary,
    pub rows: Vec<EvalRow>,
}

impl EvaluationReport {
    /// Per-article rows, then a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,rouge_1,rouge_2,rouge_l,coherence\n");
        let coh = |c: Option<f64>| c.map(|c| format!("{c:.6}")).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{}",
                r.id,
                r.rouge_1,
                r.rouge_2,
                r.rouge_l,
                coh(r.coherence)
            );
        }
        let m = &self.mean;
        let _ = writeln!(
            s,
            "mean,{:.6},{:.6},{:.6},{}",
            m.rouge_1,
            m.rouge_2,
            m.rouge_l,
            coh(m.coherence)
        );
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Scores `system[i]` against `references[i]`; both are lists of
/// tokenized sentences, flattened for ROUGE.
pub fn evaluate_corpus(
    ids: &[String],
    system: &[Vec<Vec<String>>],
    references: &[Vec<Vec<String>>],
    model: Option<&CoherenceModel>,
) -> Result<EvaluationReport> {
    if system.len() != references.len() {
        return Err(SenecaError::LengthMismatch {
            left: system.len(),
            right: references.len(),
        });
    }
    if ids.len() != system.len() {
        return Err(SenecaError::LengthMismatch {
            left: system.len(),
            right: ids.len(),
        });
    }
    if system.is_empty() {
        return Err(SenecaError::EmptyInput("evaluation corpus".into()));
    }
    let mut rows = Vec::with_capacity(system.len());
    for ((id, sys), reference) in ids.iter().zip(system).zip(references) {
        let (c, r) = (sys.concat(), reference.concat());
        rows.push(EvalRow {
            id: id.clone(),
            rouge_1: rouge_n(1, &c, &r)?.f1,
            rouge_2: rouge_n(2, &c, &r)?.f1,
            rouge_l: rouge_l(&c, &r).f1,
            coherence: model.map(|m| summary_coherence(m, sys)).transpose()?,
        });
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Ok(EvaluationReport {
        mean: EvalSummary {
            count: rows.len(),
            rouge_1: mean(|r| r.rouge_1),
            rouge_2: mean(|r| r.rouge_2),
            rouge_l: mean(|r| r.rouge_l),
            coherence: model.map(|_| mean(|r| r.coherence.unwrap_or(0.0))),
        },
        rows,
    })
}
