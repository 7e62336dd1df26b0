//! Data-to-text generation: a copy-attention sequence-to-sequence model,
//! coverage/length-penalized beam search, and diverse (multiple-choice)
//! ensemble training over linearized meaning representations.

pub mod autodiff;
pub mod config;
pub mod data;
pub mod decoding;
mod error;
pub mod metrics;
pub mod pipeline;
pub mod seq2seq;
pub mod synthetic;
pub mod training;

pub use config::{DataConfig, RunConfig};
pub use error::{Error, Result};
