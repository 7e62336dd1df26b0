use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    /// Scores are `h · s_i`.
    Dot,
    /// Scores are `u · tanh(W [h; s_i] + b)`.
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_size: usize,
    /// Per-position encoder state size; split evenly between directions.
    pub hidden_size: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub attention: AttentionKind,
    pub dropout: f64,
    pub copy_enabled: bool,
    /// Parameters start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_size: 750,
            hidden_size: 750,
            encoder_layers: 2,
            decoder_layers: 2,
            attention: AttentionKind::Dot,
            dropout: 0.2,
            copy_enabled: true,
            init_scale: 0.1,
        }
    }
}

impl ModelConfig {
    /// A small configuration for tests and toy corpora.
    pub fn tiny(size: usize) -> Self {
        Self {
            embed_size: size,
            hidden_size: size,
            encoder_layers: 1,
            decoder_layers: 1,
            dropout: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.embed_size == 0 || self.hidden_size == 0 {
            return Err("embed_size and hidden_size must be positive".into());
        }
        if self.hidden_size % 2 != 0 {
            return Err(format!("hidden_size {} must be even", self.hidden_size));
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return Err("layer counts must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.init_scale > 0.0) {
            return Err("init_scale must be positive".into());
        }
        Ok(())
    }
}
