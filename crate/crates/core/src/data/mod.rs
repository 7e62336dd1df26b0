//! Meaning representations, tokenization, vocabulary and corpus loading.

mod dataset;
mod mr;
mod source;
mod tokenize;
mod vocab;

pub use dataset::{load_dataset, read_dataset, save_dataset, write_dataset, Example, LoadOptions};
pub use mr::{
    end_token, is_boundary_token, linearize, linearize_annotated, normalize_key, parse_mr,
    start_token, AttributeValue, MeaningRepresentation, SourceToken, SCHEMA_KEYS,
};
pub use source::SourceSeq;
pub use tokenize::{detokenize, tokenize};
pub use vocab::{build_vocab, Vocabulary, BOS, EOS, PAD, RESERVED, UNK};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed meaning representation: {0}")]
    MalformedMr(String),
    #[error("attribute `{0}` is not in the schema")]
    UnknownAttribute(String),
    #[error("empty reference")]
    EmptyReference,
    #[error("row {row}: {source}")]
    AtRow {
        row: usize,
        #[source]
        source: Box<DataError>,
    },
    #[error("id {0} is not in the vocabulary")]
    UnknownId(usize),
    #[error("invalid vocabulary: {0}")]
    BadVocabulary(String),
    #[error("expected a `mr,ref` header, found `{0}`")]
    BadHeader(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
