//! Supervised-copy negative log-likelihood.

use super::Instance;
use crate::autodiff::{AutodiffError, Graph, ParamStore, Var};
use crate::seq2seq::{joint_token_distribution, DecoderStepOutput, Mode, Seq2Seq};

/// Summed NLL node over all steps and the number of steps.
fn nll_terms(
    g: &mut Graph,
    model: &Seq2Seq,
    inst: &Instance,
    steps: &[DecoderStepOutput],
) -> Result<Var, AutodiffError> {
    let mut terms = Vec::with_capacity(steps.len());
    for (t, step) in steps.iter().enumerate() {
        let copied = inst.supervision.z[t];
        match (step.copy_log_attn, step.gate_logit) {
            (Some(copy_log), Some(gate)) if model.config.copy_enabled => {
                let z_term = if copied {
                    g.log_sigmoid(gate)?
                } else {
                    let neg = g.scale(gate, -1.0)?;
                    g.log_sigmoid(neg)?
                };
                let y_term = if copied {
                    g.log_sum_exp_pick(copy_log, &inst.supervision.positions[t])?
                } else {
                    g.pick(step.gen_log_dist, inst.base_target(t))?
                };
                terms.push(z_term);
                terms.push(y_term);
            }
            _ => terms.push(g.pick(step.gen_log_dist, inst.base_target(t))?),
        }
    }
    let total = g.add_all(&terms)?;
    g.scale(total, -1.0)
}

/// Per-token mean of `-[log p(z_t) + log p(y_t | z_t)]` under teacher forcing.
/// Without copy, only `-log p_gen(y_t)` is counted.
pub fn nll_loss(g: &mut Graph, model: &Seq2Seq, inst: &Instance, mode: &mut Mode) -> Result<Var, AutodiffError> {
    let (_, steps) = model.teacher_force(g, &inst.source.ids, &inst.decoder_inputs(), mode)?;
    let total = nll_terms(g, model, inst, &steps)?;
    g.scale(total, 1.0 / inst.steps() as f64)
}

/// Evaluation-mode summed NLL of one instance.
pub fn sequence_nll(model: &Seq2Seq, store: &ParamStore, inst: &Instance) -> Result<f64, AutodiffError> {
    let mut g = Graph::new(store);
    let (_, steps) = model.teacher_force(&mut g, &inst.source.ids, &inst.decoder_inputs(), &mut Mode::Eval)?;
    let total = nll_terms(&mut g, model, inst, &steps)?;
    Ok(g.scalar(total))
}

/// Teacher-forced counts `(correct, total)` of steps whose joint-distribution
/// argmax equals the reference token.
pub fn next_token_accuracy(model: &Seq2Seq, store: &ParamStore, inst: &Instance) -> Result<(usize, usize), AutodiffError> {
    let mut g = Graph::new(store);
    let (_, steps) = model.teacher_force(&mut g, &inst.source.ids, &inst.decoder_inputs(), &mut Mode::Eval)?;
    let mut correct = 0;
    for (t, step) in steps.iter().enumerate() {
        let d = model.distributions(&g, step);
        let p = joint_token_distribution(&d, &inst.source.ext_ids, inst.source.ext_size());
        let best = argmax(&p);
        if best == inst.target_ext[t] {
            correct += 1;
        }
    }
    Ok((correct, steps.len()))
}

/// Index of the largest entry; lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
