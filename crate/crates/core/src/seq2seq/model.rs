//! Encoder, attention and the copy-switch decoder step.

use rand::RngCore;

use super::params::{AttentionParams, Linear, LstmParams, ModelParams};
use super::ModelConfig;
use crate::autodiff::{AutodiffError, Axis, Graph, Tensor, Var};

/// Training mode carries the dropout RNG.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut dyn RngCore),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }

    fn dropout(&mut self, g: &mut Graph, x: Var, p: f64) -> Result<Var, AutodiffError> {
        match self {
            Mode::Eval => Ok(x),
            Mode::Train(rng) => g.dropout(x, p, true, &mut **rng),
        }
    }
}

/// Encoded source: one `hidden_size` row per position plus the top layer's
/// final states, `[h_fwd(m-1); h_bwd(0)]` and likewise for cells.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    pub states: Var,
    pub final_h: Var,
    pub final_c: Var,
    pub len: usize,
    gen_keys: Option<Var>,
    copy_keys: Option<Var>,
}

/// `(h, c)` for each decoder layer.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub layers: Vec<(Var, Var)>,
}

#[derive(Debug, Clone)]
pub struct DecoderStepOutput {
    /// `log p(y | z = 0)` over the base vocabulary, `[1, V]`.
    pub gen_log_dist: Var,
    /// Log copy attention over source positions, `[1, m]`.
    pub copy_log_attn: Option<Var>,
    /// Generation attention weights (coverage accumulator input), `[1, m]`.
    pub rank_attn: Var,
    /// Switch logit `v · h̃`; `p(z = 1) = σ(logit)`.
    pub gate_logit: Option<Var>,
    pub state: DecoderState,
}

/// Plain-number view of one decoder step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistributions {
    pub gen_dist: Vec<f64>,
    pub copy_attn: Vec<f64>,
    pub rank_attn: Vec<f64>,
    pub p_copy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seq2Seq {
    pub config: ModelConfig,
    pub params: ModelParams,
}

fn linear(g: &mut Graph, lin: &Linear, x: Var) -> Result<Var, AutodiffError> {
    let w = g.param(lin.weight);
    let y = g.matmul(x, w)?;
    match lin.bias {
        Some(b) => {
            let b = g.param(b);
            g.add_row(y, b)
        }
        None => Ok(y),
    }
}

/// One LSTM step on `[1, input]`; returns the new `(h, c)`.
pub fn lstm_cell(g: &mut Graph, p: &LstmParams, x: Var, h: Var, c: Var) -> Result<(Var, Var), AutodiffError> {
    let n = p.hidden;
    let xh = g.concat(&[x, h], Axis::Cols)?;
    let w = g.param(p.weight);
    let b = g.param(p.bias);
    let z = g.matmul(xh, w)?;
    let z = g.add_row(z, b)?;
    let i = g.slice_cols(z, 0, n)?;
    let f = g.slice_cols(z, n, n)?;
    let cand = g.slice_cols(z, 2 * n, n)?;
    let o = g.slice_cols(z, 3 * n, n)?;
    let i = g.sigmoid(i)?;
    let f = g.sigmoid(f)?;
    let cand = g.tanh(cand)?;
    let o = g.sigmoid(o)?;
    let fc = g.mul(f, c)?;
    let ic = g.mul(i, cand)?;
    let c1 = g.add(fc, ic)?;
    let tc = g.tanh(c1)?;
    let h1 = g.mul(o, tc)?;
    Ok((h1, c1))
}

/// Precomputed key projection `S · W_key` for MLP attention.
pub fn attention_keys(g: &mut Graph, p: &AttentionParams, states: Var) -> Result<Option<Var>, AutodiffError> {
    match p {
        AttentionParams::Dot { .. } => Ok(None),
        AttentionParams::Mlp { w_key, .. } => {
            let wk = g.param(*w_key);
            Ok(Some(g.matmul(states, wk)?))
        }
    }
}

/// Unnormalized attention scores `[1, m]` of `query` against `states`.
pub fn attention_scores(
    g: &mut Graph,
    p: &AttentionParams,
    query: Var,
    states: Var,
    keys: Option<Var>,
) -> Result<Var, AutodiffError> {
    match p {
        AttentionParams::Dot { query_proj } => {
            let q = match query_proj {
                Some(w) => {
                    let w = g.param(*w);
                    g.matmul(query, w)?
                }
                None => query,
            };
            g.matmul_nt(q, states)
        }
        AttentionParams::Mlp {
            w_query,
            w_key,
            bias,
            score,
        } => {
            let keys = match keys {
                Some(k) => k,
                None => {
                    let wk = g.param(*w_key);
                    g.matmul(states, wk)?
                }
            };
            let wq = g.param(*w_query);
            let b = g.param(*bias);
            let q = g.matmul(query, wq)?;
            let q = g.add(q, b)?;
            let pre = g.add_row(keys, q)?;
            let act = g.tanh(pre)?;
            let u = g.param(*score);
            g.matmul_nt(u, act)
        }
    }
}

/// Attention weights (softmax of the scores) of `query` over `states`.
pub fn attention(
    g: &mut Graph,
    p: &AttentionParams,
    query: Var,
    states: Var,
) -> Result<Var, AutodiffError> {
    let s = attention_scores(g, p, query, states, None)?;
    g.softmax(s, Axis::Cols)
}

impl Seq2Seq {
    pub fn new(config: ModelConfig, params: ModelParams) -> Self {
        Self { config, params }
    }

    /// Runs the bidirectional encoder over base-vocabulary `source` ids.
    pub fn encode(&self, g: &mut Graph, source: &[usize], mode: &mut Mode) -> Result<EncoderOutput, AutodiffError> {
        if source.is_empty() {
            return Err(AutodiffError::EmptyInput("encode"));
        }
        let half = self.config.hidden_size / 2;
        let emb = g.param(self.params.src_embed);
        let mut inputs = source
            .iter()
            .map(|&id| g.embedding(emb, id))
            .collect::<Result<Vec<_>, _>>()?;
        let zero = g.constant(Tensor::zeros([1, half]))?;
        let mut finals = (zero, zero, zero, zero);
        for (l, (fwd, bwd)) in self.params.encoder.iter().enumerate() {
            if l > 0 {
                for x in inputs.iter_mut() {
                    *x = mode.dropout(g, *x, self.config.dropout)?;
                }
            }
            let m = inputs.len();
            let mut fwd_h = Vec::with_capacity(m);
            let (mut h, mut c) = (zero, zero);
            for &x in &inputs {
                (h, c) = lstm_cell(g, fwd, x, h, c)?;
                fwd_h.push(h);
            }
            let (fh, fc) = (h, c);
            let mut bwd_h = vec![zero; m];
            let (mut h, mut c) = (zero, zero);
            for t in (0..m).rev() {
                (h, c) = lstm_cell(g, bwd, inputs[t], h, c)?;
                bwd_h[t] = h;
            }
            finals = (fh, fc, h, c);
            inputs = fwd_h
                .iter()
                .zip(&bwd_h)
                .map(|(&a, &b)| g.concat(&[a, b], Axis::Cols))
                .collect::<Result<Vec<_>, _>>()?;
        }
        let states = g.concat(&inputs, Axis::Rows)?;
        let final_h = g.concat(&[finals.0, finals.2], Axis::Cols)?;
        let final_c = g.concat(&[finals.1, finals.3], Axis::Cols)?;
        let gen_keys = attention_keys(g, &self.params.gen_attention, states)?;
        let copy_keys = match &self.params.copy {
            Some(cp) => attention_keys(g, &cp.attention, states)?,
            None => None,
        };
        Ok(EncoderOutput {
            states,
            final_h,
            final_c,
            len: source.len(),
            gen_keys,
            copy_keys,
        })
    }

    /// Decoder start state from a learned linear map of the encoder finals.
    pub fn init_state(&self, g: &mut Graph, enc: &EncoderOutput) -> Result<DecoderState, AutodiffError> {
        let layers = self
            .params
            .bridge
            .iter()
            .map(|(hl, cl)| Ok((linear(g, hl, enc.final_h)?, linear(g, cl, enc.final_c)?)))
            .collect::<Result<Vec<_>, AutodiffError>>()?;
        Ok(DecoderState { layers })
    }

    /// One decoder step fed with base-vocabulary id `prev`.
    pub fn decode_step(
        &self,
        g: &mut Graph,
        prev: usize,
        state: &DecoderState,
        enc: &EncoderOutput,
        mode: &mut Mode,
    ) -> Result<DecoderStepOutput, AutodiffError> {
        let emb = g.param(self.params.tgt_embed);
        let mut x = g.embedding(emb, prev)?;
        let mut layers = Vec::with_capacity(state.layers.len());
        for (l, (p, &(h, c))) in self.params.decoder.iter().zip(&state.layers).enumerate() {
            if l > 0 {
                x = mode.dropout(g, x, self.config.dropout)?;
            }
            let (h1, c1) = lstm_cell(g, p, x, h, c)?;
            layers.push((h1, c1));
            x = h1;
        }
        let top = x;

        let scores = attention_scores(g, &self.params.gen_attention, top, enc.states, enc.gen_keys)?;
        let rank_attn = g.softmax(scores, Axis::Cols)?;
        let context = g.matmul(rank_attn, enc.states)?;
        let ch = g.concat(&[context, top], Axis::Cols)?;
        let wc = g.param(self.params.combine);
        let pre = g.matmul(ch, wc)?;
        let attn_h = g.tanh(pre)?;
        let logits = linear(g, &self.params.output, attn_h)?;
        let gen_log_dist = g.log_softmax(logits)?;

        let (copy_log_attn, gate_logit) = match &self.params.copy {
            Some(cp) => {
                let cs = attention_scores(g, &cp.attention, attn_h, enc.states, enc.copy_keys)?;
                let cl = g.log_softmax(cs)?;
                let v = g.param(cp.gate);
                let gate = g.matmul_nt(attn_h, v)?;
                (Some(cl), Some(gate))
            }
            None => (None, None),
        };
        Ok(DecoderStepOutput {
            gen_log_dist,
            copy_log_attn,
            rank_attn,
            gate_logit,
            state: DecoderState { layers },
        })
    }

    /// Teacher-forced pass: feeds BOS followed by `inputs` (base ids) and
    /// returns one step output per fed token.
    pub fn teacher_force(
        &self,
        g: &mut Graph,
        source: &[usize],
        inputs: &[usize],
        mode: &mut Mode,
    ) -> Result<(EncoderOutput, Vec<DecoderStepOutput>), AutodiffError> {
        let enc = self.encode(g, source, mode)?;
        let mut state = self.init_state(g, &enc)?;
        let mut steps = Vec::with_capacity(inputs.len() + 1);
        for &tok in std::iter::once(&crate::data::BOS).chain(inputs) {
            let out = self.decode_step(g, tok, &state, &enc, mode)?;
            state = out.state.clone();
            steps.push(out);
        }
        Ok((enc, steps))
    }

    /// Reads the step's distributions out of the graph.
    pub fn distributions(&self, g: &Graph, step: &DecoderStepOutput) -> StepDistributions {
        let gen_dist = g.value(step.gen_log_dist).data().iter().map(|x| x.exp()).collect();
        let rank_attn = g.value(step.rank_attn).data().to_vec();
        match (step.copy_log_attn, step.gate_logit) {
            (Some(cl), Some(gate)) => {
                let z = g.scalar(gate);
                StepDistributions {
                    gen_dist,
                    copy_attn: g.value(cl).data().iter().map(|x| x.exp()).collect(),
                    rank_attn,
                    p_copy: 1.0 / (1.0 + (-z).exp()),
                }
            }
            _ => StepDistributions {
                gen_dist,
                copy_attn: vec![0.0; rank_attn.len()],
                rank_attn,
                p_copy: 0.0,
            },
        }
    }
}
