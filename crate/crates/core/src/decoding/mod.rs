//! Beam search over the joint copy/generation distribution with final
//! length- and coverage-penalized reranking.

mod beam;
mod penalty;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AutodiffError;

pub use beam::{beam_search, emittable, Hypothesis, NBestEntry};
pub use penalty::{block_repeat_beginnings, coverage_penalty, length_penalty, rerank_score, SENTENCE_DELIMITERS};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("every beam candidate was pruned by repeat blocking")]
    EmptyBeam,
    #[error("invalid decode config: {0}")]
    Config(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub beam_size: usize,
    pub max_len: usize,
    pub alpha: f64,
    pub beta: f64,
    pub block_repeat_beginnings: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_size: 10,
            max_len: 50,
            alpha: 0.4,
            beta: 0.1,
            block_repeat_beginnings: false,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.beam_size == 0 {
            return Err("beam_size must be at least 1".into());
        }
        if self.max_len == 0 {
            return Err("max_len must be at least 1".into());
        }
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(format!("alpha {} and beta {} must be non-negative", self.alpha, self.beta));
        }
        Ok(())
    }
}
