use super::StepDistributions;

/// Mixes generation and copy distributions into one over the extended
/// vocabulary of size `ext_size`:
/// `P(w) = (1 - p_copy) · gen[w] + p_copy · Σ_{i: src_i = w} copy[i]`.
pub fn joint_token_distribution(step: &StepDistributions, source_ext_ids: &[usize], ext_size: usize) -> Vec<f64> {
    debug_assert_eq!(source_ext_ids.len(), step.copy_attn.len());
    let mut out = vec![0.0; ext_size];
    let keep = 1.0 - step.p_copy;
    for (o, &p) in out.iter_mut().zip(&step.gen_dist) {
        *o = keep * p;
    }
    if step.p_copy > 0.0 {
        for (&id, &a) in source_ext_ids.iter().zip(&step.copy_attn) {
            out[id] += step.p_copy * a;
        }
    }
    out
}
