//! Encoded source sequences with a per-input extended vocabulary.

use super::mr::{linearize_annotated, MeaningRepresentation, SourceToken};
use super::vocab::{Vocabulary, UNK};

/// A linearized MR, its base-vocabulary ids, and ids in the extended
/// vocabulary (base vocabulary followed by this source's OOV tokens).
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSeq {
    pub tokens: Vec<String>,
    /// Base ids (`UNK` for OOV); these feed the encoder embedding.
    pub ids: Vec<usize>,
    /// Extended ids; these receive copy mass.
    pub ext_ids: Vec<usize>,
    pub is_value: Vec<bool>,
    /// OOV source tokens in order of first appearance; token `j` has
    /// extended id `base_size + j`.
    pub oov: Vec<String>,
    base_size: usize,
}

impl SourceSeq {
    pub fn from_mr(mr: &MeaningRepresentation, vocab: &Vocabulary) -> Self {
        Self::from_annotated(&linearize_annotated(mr), vocab)
    }

    pub fn from_annotated(tokens: &[SourceToken], vocab: &Vocabulary) -> Self {
        let base_size = vocab.len();
        let mut oov: Vec<String> = Vec::new();
        let mut ids = Vec::with_capacity(tokens.len());
        let mut ext_ids = Vec::with_capacity(tokens.len());
        for tok in tokens {
            match vocab.id(&tok.text) {
                Some(id) => {
                    ids.push(id);
                    ext_ids.push(id);
                }
                None => {
                    let j = match oov.iter().position(|o| *o == tok.text) {
                        Some(j) => j,
                        None => {
                            oov.push(tok.text.clone());
                            oov.len() - 1
                        }
                    };
                    ids.push(UNK);
                    ext_ids.push(base_size + j);
                }
            }
        }
        Self {
            tokens: tokens.iter().map(|t| t.text.clone()).collect(),
            ids,
            ext_ids,
            is_value: tokens.iter().map(|t| t.is_value).collect(),
            oov,
            base_size,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn base_size(&self) -> usize {
        self.base_size
    }

    pub fn ext_size(&self) -> usize {
        self.base_size + self.oov.len()
    }

    /// Extended id of `token`: base id, source OOV id, or `UNK`.
    pub fn ext_id(&self, token: &str, vocab: &Vocabulary) -> usize {
        if let Some(id) = vocab.id(token) {
            return id;
        }
        match self.oov.iter().position(|o| o == token) {
            Some(j) => self.base_size + j,
            None => UNK,
        }
    }

    pub fn ext_token<'a>(&'a self, id: usize, vocab: &'a Vocabulary) -> Option<&'a str> {
        if id < self.base_size {
            vocab.token(id)
        } else {
            self.oov.get(id - self.base_size).map(String::as_str)
        }
    }

    /// Extended ids past the base vocabulary collapse to `UNK` for embedding.
    pub fn base_id(&self, ext_id: usize) -> usize {
        if ext_id < self.base_size {
            ext_id
        } else {
            UNK
        }
    }
}
