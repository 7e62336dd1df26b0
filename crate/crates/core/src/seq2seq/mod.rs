//! Encoder-decoder with attention and a copy switch.

mod config;
mod joint;
mod model;
mod params;

pub use config::{AttentionKind, ModelConfig};
pub use joint::joint_token_distribution;
pub use model::{
    attention, attention_keys, attention_scores, lstm_cell, DecoderState, DecoderStepOutput,
    EncoderOutput, Mode, Seq2Seq, StepDistributions,
};
pub use params::{AttentionParams, CopyParams, Linear, LstmParams, ModelParams, Sharing};
