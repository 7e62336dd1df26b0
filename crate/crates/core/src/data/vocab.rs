//! Token/id bijection with reserved and attribute-boundary entries.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mr::{end_token, is_boundary_token, linearize_annotated, start_token, SCHEMA_KEYS};
use super::{DataError, Example};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

pub const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

const VOCAB_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    version: u32,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Reserved tokens followed by boundary tokens for `extra_keys` and the
    /// schema keys, then `words` in the given order.
    pub fn with_words<I, S>(extra_keys: &[String], words: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut keys: BTreeSet<String> = extra_keys.iter().cloned().collect();
        keys.extend(SCHEMA_KEYS.iter().map(|k| k.to_string()));
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        for key in &keys {
            tokens.push(start_token(key));
            tokens.push(end_token(key));
        }
        for word in words {
            tokens.push(word.into());
        }
        Self::from_token_list(tokens)
    }

    fn from_token_list(tokens: Vec<String>) -> Result<Self, DataError> {
        if tokens.len() < RESERVED.len() || tokens.iter().zip(RESERVED).any(|(a, b)| a != b) {
            return Err(DataError::BadVocabulary("reserved tokens missing".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i).is_some() {
                return Err(DataError::BadVocabulary(format!("duplicate token `{tok}`")));
            }
        }
        for key in SCHEMA_KEYS {
            if !index.contains_key(&start_token(key)) || !index.contains_key(&end_token(key)) {
                return Err(DataError::BadVocabulary(format!("missing boundary tokens for `{key}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_boundary(&self, id: usize) -> bool {
        self.token(id).is_some_and(is_boundary_token)
    }

    /// Out-of-vocabulary tokens map to `UNK`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>, DataError> {
        ids.iter()
            .map(|&id| {
                self.token(id)
                    .map(str::to_string)
                    .ok_or(DataError::UnknownId(id))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&VocabFile {
            version: VOCAB_FORMAT_VERSION,
            tokens: self.tokens.clone(),
        })
        .expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let file: VocabFile =
            serde_json::from_str(text).map_err(|e| DataError::BadVocabulary(e.to_string()))?;
        if file.version != VOCAB_FORMAT_VERSION {
            return Err(DataError::BadVocabulary(format!(
                "unsupported vocabulary version {}",
                file.version
            )));
        }
        Self::from_token_list(file.tokens)
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Counts source (linearized) and target tokens; keeps those seen at least
/// `min_freq` times. Ids: reserved, boundary, then by descending frequency
/// with lexicographic tie-break.
pub fn build_vocab(corpus: &[Example], min_freq: usize) -> Vocabulary {
    let min_freq = min_freq.max(1);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut keys = BTreeSet::new();
    let mut source_tokens = Vec::new();
    for ex in corpus {
        keys.extend(ex.mr.keys().map(str::to_string));
        source_tokens.push(linearize_annotated(&ex.mr));
    }
    for (ex, src) in corpus.iter().zip(&source_tokens) {
        for tok in src.iter().filter(|t| t.is_value) {
            *counts.entry(tok.text.as_str()).or_default() += 1;
        }
        for reference in &ex.references {
            for tok in reference {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
    }
    let skeleton = Vocabulary::with_words(&keys.into_iter().collect::<Vec<_>>(), Vec::<String>::new())
        .expect("keys come from validated MRs");
    let mut words: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(tok, n)| *n >= min_freq && skeleton.id(tok).is_none())
        .collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut tokens = skeleton.tokens;
    tokens.extend(words.into_iter().map(|(t, _)| t.to_string()));
    Vocabulary::from_token_list(tokens).expect("built vocabulary is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_mr;
    use crate::data::tokenize;

    fn example(mr: &str, refs: &[&str]) -> Example {
        Example {
            mr: parse_mr(mr).unwrap(),
            references: refs.iter().map(|r| tokenize(r)).collect(),
        }
    }

    #[test]
    fn empty_corpus_has_only_reserved_and_boundaries() {
        let v = build_vocab(&[], 1);
        assert_eq!(v.len(), RESERVED.len() + 2 * SCHEMA_KEYS.len());
        assert_eq!(v.token(EOS), Some("</s>"));
        assert!(v.id("__start_area__").is_some());
        assert!(v.id("__end_priceRange__").is_some());
    }

    #[test]
    fn min_freq_threshold_maps_rare_to_unk() {
        let corpus = vec![example("area[riverside], food[thai]", &["thai food", "thai place"])];
        let v = build_vocab(&corpus, 2);
        assert_eq!(v.encode(&["riverside"]), vec![UNK]);
        assert_ne!(v.encode(&["thai"]), vec![UNK]);
        // boundary tokens survive any threshold
        let v = build_vocab(&corpus, 100);
        assert!(v.id("__start_food__").is_some());
    }

    #[test]
    fn ordering_is_frequency_then_lexicographic() {
        let corpus = vec![example("name[b]", &["a c c", "a c"])];
        let v = build_vocab(&corpus, 1);
        let words: Vec<&str> = v.tokens()[RESERVED.len() + 2 * SCHEMA_KEYS.len()..]
            .iter()
            .map(String::as_str)
            .collect();
        assert_eq!(words, vec!["c", "a", "b"]);
    }

    #[test]
    fn extra_keys_get_boundaries() {
        let corpus = vec![example("stars[five]", &["five stars"])];
        let v = build_vocab(&corpus, 1);
        assert!(v.id("__start_stars__").is_some());
        assert!(v.is_boundary(v.id("__end_stars__").unwrap()));
        assert!(!v.is_boundary(v.id("five").unwrap()));
    }

    #[test]
    fn deterministic_rebuild() {
        let corpus = vec![
            example("name[x], area[riverside]", &["x is by the river .", "x , riverside"]),
            example("name[y]", &["y !"]),
        ];
        let a = build_vocab(&corpus, 1);
        let b = build_vocab(&corpus, 1);
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn encode_decode_roundtrip_and_errors() {
        let corpus = vec![example("name[x]", &["x is good"])];
        let v = build_vocab(&corpus, 1);
        assert_eq!(v.encode(&v.decode(&[5, 7]).unwrap()), vec![5, 7]);
        assert_eq!(v.encode(&["never-seen"]), vec![UNK]);
        assert!(matches!(v.decode(&[v.len()]), Err(DataError::UnknownId(id)) if id == v.len()));
        for id in 0..v.len() {
            let tok = v.decode(&[id]).unwrap();
            assert_eq!(v.encode(&tok), vec![id]);
        }
        let back = Vocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn rejects_malformed_json() {
        assert!(Vocabulary::from_json(r#"{"version":1,"tokens":["a"]}"#).is_err());
        assert!(Vocabulary::from_json(r#"{"version":9,"tokens":[]}"#).is_err());
    }
}
