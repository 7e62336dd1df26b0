//! Parameter layout of one ensemble member, with optional sharing of whole
//! groups (embeddings, encoder, decoder) between members.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AttentionKind, ModelConfig};
use crate::autodiff::{AutodiffError, ParamId, ParamStore, Tensor};

/// Which parameter groups ensemble members hold in common.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharing {
    #[default]
    None,
    /// Source and target embeddings.
    Embeddings,
    /// Source embeddings, encoder LSTMs and the decoder-initialization bridge.
    Encoder,
    /// Everything in `Encoder` plus target embeddings and decoder LSTMs.
    EncoderDecoder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Group {
    SourceEmbedding,
    TargetEmbedding,
    Encoder,
    Decoder,
    Head,
}

impl Sharing {
    fn shares(self, group: Group) -> bool {
        use Group::*;
        match self {
            Sharing::None => false,
            Sharing::Embeddings => matches!(group, SourceEmbedding | TargetEmbedding),
            Sharing::Encoder => matches!(group, SourceEmbedding | Encoder),
            Sharing::EncoderDecoder => !matches!(group, Head),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    /// `[input + hidden, 4 * hidden]`, gate order i, f, g, o.
    pub weight: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionParams {
    /// Optional query projection; the generation attention has none.
    Dot { query_proj: Option<ParamId> },
    Mlp {
        w_query: ParamId,
        w_key: ParamId,
        bias: ParamId,
        score: ParamId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CopyParams {
    pub attention: AttentionParams,
    /// Switch vector `v` of `p(z = 1) = σ(v · h̃)`.
    pub gate: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub src_embed: ParamId,
    pub tgt_embed: ParamId,
    /// Per layer: forward and backward direction.
    pub encoder: Vec<(LstmParams, LstmParams)>,
    /// Per decoder layer: maps for the initial hidden and cell state.
    pub bridge: Vec<(Linear, Linear)>,
    pub decoder: Vec<LstmParams>,
    pub gen_attention: AttentionParams,
    /// `W_c` of `h̃ = tanh(W_c [c; h])`.
    pub combine: ParamId,
    pub output: Linear,
    pub copy: Option<CopyParams>,
    roles: Vec<(String, ParamId, bool)>,
}

struct Builder<'a, R: Rng> {
    store: &'a mut ParamStore,
    rng: &'a mut R,
    scale: f64,
    member: usize,
    sharing: Sharing,
    reuse: Option<&'a ModelParams>,
    roles: Vec<(String, ParamId, bool)>,
}

impl<R: Rng> Builder<'_, R> {
    fn param(&mut self, group: Group, role: &str, shape: [usize; 2]) -> Result<ParamId, AutodiffError> {
        let shared = self.sharing.shares(group);
        let id = match (shared, self.reuse) {
            (true, Some(prev)) => prev
                .role(role)
                .ok_or_else(|| AutodiffError::MissingParam(role.to_string()))?,
            _ => {
                let name = if shared {
                    format!("shared.{role}")
                } else {
                    format!("m{}.{role}", self.member)
                };
                let scale = self.scale;
                let data = (0..shape[0] * shape[1])
                    .map(|_| self.rng.gen_range(-scale..=scale))
                    .collect();
                self.store.add(name, Tensor::new(shape, data)?)?
            }
        };
        self.roles.push((role.to_string(), id, shared));
        Ok(id)
    }

    fn lstm(&mut self, group: Group, role: &str, input: usize, hidden: usize) -> Result<LstmParams, AutodiffError> {
        Ok(LstmParams {
            weight: self.param(group, &format!("{role}.w"), [input + hidden, 4 * hidden])?,
            bias: self.param(group, &format!("{role}.b"), [1, 4 * hidden])?,
            hidden,
        })
    }

    fn attention(&mut self, kind: AttentionKind, role: &str, hidden: usize, projected: bool) -> Result<AttentionParams, AutodiffError> {
        Ok(match kind {
            AttentionKind::Dot => AttentionParams::Dot {
                query_proj: if projected {
                    Some(self.param(Group::Head, &format!("{role}.q"), [hidden, hidden])?)
                } else {
                    None
                },
            },
            AttentionKind::Mlp => AttentionParams::Mlp {
                w_query: self.param(Group::Head, &format!("{role}.wq"), [hidden, hidden])?,
                w_key: self.param(Group::Head, &format!("{role}.wk"), [hidden, hidden])?,
                bias: self.param(Group::Head, &format!("{role}.b"), [1, hidden])?,
                score: self.param(Group::Head, &format!("{role}.u"), [1, hidden])?,
            },
        })
    }
}

impl ModelParams {
    /// Allocates member `member`'s parameters in `store`. Groups shared under
    /// `sharing` are taken from `reuse` when given, otherwise created under a
    /// `shared.` prefix.
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        config: &ModelConfig,
        vocab_size: usize,
        member: usize,
        sharing: Sharing,
        reuse: Option<&ModelParams>,
        rng: &mut R,
    ) -> Result<Self, AutodiffError> {
        let (e, h) = (config.embed_size, config.hidden_size);
        let half = h / 2;
        let mut b = Builder {
            store,
            rng,
            scale: config.init_scale,
            member,
            sharing,
            reuse,
            roles: Vec::new(),
        };
        let src_embed = b.param(Group::SourceEmbedding, "src_embed", [vocab_size, e])?;
        let tgt_embed = b.param(Group::TargetEmbedding, "tgt_embed", [vocab_size, e])?;
        let mut encoder = Vec::new();
        for l in 0..config.encoder_layers {
            let input = if l == 0 { e } else { h };
            let fwd = b.lstm(Group::Encoder, &format!("enc.{l}.fwd"), input, half)?;
            let bwd = b.lstm(Group::Encoder, &format!("enc.{l}.bwd"), input, half)?;
            encoder.push((fwd, bwd));
        }
        let mut bridge = Vec::new();
        for l in 0..config.decoder_layers {
            let lin = |b: &mut Builder<R>, which: &str| -> Result<Linear, AutodiffError> {
                Ok(Linear {
                    weight: b.param(Group::Encoder, &format!("bridge.{l}.{which}.w"), [h, h])?,
                    bias: Some(b.param(Group::Encoder, &format!("bridge.{l}.{which}.b"), [1, h])?),
                })
            };
            let hl = lin(&mut b, "h")?;
            let cl = lin(&mut b, "c")?;
            bridge.push((hl, cl));
        }
        let mut decoder = Vec::new();
        for l in 0..config.decoder_layers {
            let input = if l == 0 { e } else { h };
            decoder.push(b.lstm(Group::Decoder, &format!("dec.{l}"), input, h)?);
        }
        let gen_attention = b.attention(config.attention, "gen_attn", h, false)?;
        let combine = b.param(Group::Head, "combine.w", [2 * h, h])?;
        let output = Linear {
            weight: b.param(Group::Head, "out.w", [h, vocab_size])?,
            bias: Some(b.param(Group::Head, "out.b", [1, vocab_size])?),
        };
        let copy = if config.copy_enabled {
            Some(CopyParams {
                attention: b.attention(config.attention, "copy_attn", h, true)?,
                gate: b.param(Group::Head, "copy_gate.v", [1, h])?,
            })
        } else {
            None
        };
        let roles = b.roles;
        Ok(Self {
            src_embed,
            tgt_embed,
            encoder,
            bridge,
            decoder,
            gen_attention,
            combine,
            output,
            copy,
            roles,
        })
    }

    /// `(role, id)` for every parameter, in creation order.
    pub fn roles(&self) -> impl Iterator<Item = (&str, ParamId)> {
        self.roles.iter().map(|(r, id, _)| (r.as_str(), *id))
    }

    pub fn role(&self, role: &str) -> Option<ParamId> {
        self.roles.iter().find(|(r, _, _)| r == role).map(|(_, id, _)| *id)
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.roles.iter().map(|(_, id, _)| *id).collect()
    }

    /// Parameters owned by this member alone.
    pub fn own_ids(&self) -> Vec<ParamId> {
        self.roles
            .iter()
            .filter(|(_, _, shared)| !shared)
            .map(|(_, id, _)| *id)
            .collect()
    }

    pub fn shared_ids(&self) -> Vec<ParamId> {
        self.roles
            .iter()
            .filter(|(_, _, shared)| *shared)
            .map(|(_, id, _)| *id)
            .collect()
    }
}
