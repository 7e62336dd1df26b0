//! Corpus evaluation: BLEU, ROUGE-L, perplexity and attribute coverage.

mod coverage;
mod overlap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, ParamStore};
use crate::data::Example;
use crate::seq2seq::Seq2Seq;
use crate::training::{sequence_nll, Instance};

pub use coverage::{attribute_coverage, contains_run, corpus_coverage, CoverageCount, CoverageReport, COVERAGE_EXCLUDED};
pub use overlap::{bleu, lcs_len, rouge_l};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("candidate {0} is empty")]
    EmptyCandidate(usize),
    #[error("example {0} has no references")]
    NoReferences(usize),
    #[error("expected {expected} outputs, found {found}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Token-level perplexity: `exp(Σ NLL / Σ predicted tokens)` with every
/// reference scored as its own sequence.
pub fn perplexity(model: &Seq2Seq, store: &ParamStore, data: &[Instance]) -> Result<f64, AutodiffError> {
    if data.is_empty() {
        return Err(AutodiffError::EmptyInput("perplexity"));
    }
    let mut total = 0.0;
    let mut tokens = 0usize;
    for inst in data {
        total += sequence_nll(model, store, inst)?;
        tokens += inst.steps();
    }
    Ok((total / tokens as f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub examples: usize,
    pub bleu: f64,
    pub rouge_l: f64,
    pub perplexity: Option<f64>,
    pub attribute_coverage: CoverageReport,
}

impl MetricsReport {
    /// Scores `outputs` (one token sequence per grouped example) against the
    /// examples' references.
    pub fn compute<S: AsRef<str>>(outputs: &[Vec<S>], examples: &[Example]) -> Result<Self, MetricsError> {
        let refs: Vec<Vec<Vec<&str>>> = examples
            .iter()
            .map(|e| e.references.iter().map(|r| r.iter().map(|s| s.as_str()).collect()).collect())
            .collect();
        let cands: Vec<Vec<&str>> = outputs.iter().map(|o| o.iter().map(|s| s.as_ref()).collect()).collect();
        let bleu = bleu(&cands, &refs, 4)?;
        let rouge_l = rouge_l(&cands, &refs)?;
        let mut coverage = CoverageReport::default();
        for (ex, out) in examples.iter().zip(&cands) {
            coverage.add(&ex.mr, out);
        }
        Ok(Self {
            examples: examples.len(),
            bleu,
            rouge_l,
            perplexity: None,
            attribute_coverage: coverage,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("examples".into(), self.examples.to_string()),
            ("BLEU".into(), format!("{:.2}", self.bleu)),
            ("ROUGE-L".into(), format!("{:.2}", self.rouge_l)),
            (
                "perplexity".into(),
                self.perplexity.map_or("-".into(), |p| format!("{p:.4}")),
            ),
            (
                "attribute coverage (lower bound)".into(),
                self.attribute_coverage
                    .overall
                    .map_or("N/A".into(), |c| format!("{c:.2}%")),
            ),
        ];
        for (key, c) in &self.attribute_coverage.per_attribute {
            let excluded = if COVERAGE_EXCLUDED.contains(&key.as_str()) { " (excluded)" } else { "" };
            rows.push((format!("  {key}{excluded}"), format!("{}/{}", c.generated, c.expected)));
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
        out
    }
}
