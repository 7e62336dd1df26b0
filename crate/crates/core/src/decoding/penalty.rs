use crate::autodiff::LOG_EPS;

pub const SENTENCE_DELIMITERS: [&str; 3] = [".", "!", "?"];

/// `((5 + n) / 6)^α`.
pub fn length_penalty(n: usize, alpha: f64) -> f64 {
    ((5.0 + n as f64) / 6.0).powf(alpha)
}

/// `β · Σ_i ln(min(A_i, 1))`, with the log argument floored at `LOG_EPS`.
pub fn coverage_penalty(coverage: &[f64], beta: f64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    beta * coverage.iter().map(|&a| a.min(1.0).max(LOG_EPS).ln()).sum::<f64>()
}

/// `logp / lp(len) + cp(coverage)`.
pub fn rerank_score(logprob: f64, len: usize, coverage: &[f64], alpha: f64, beta: f64) -> f64 {
    logprob / length_penalty(len, alpha) + coverage_penalty(coverage, beta)
}

/// Whether appending `next` to `prefix` makes the current sentence open with
/// the same bigram as an earlier sentence (`true` means prune).
pub fn block_repeat_beginnings<S: AsRef<str>>(prefix: &[S], next: &str) -> bool {
    let mut openings: Vec<(&str, &str)> = Vec::new();
    let mut sentence: Vec<&str> = Vec::new();
    for tok in prefix.iter().map(|s| s.as_ref()) {
        sentence.push(tok);
        if sentence.len() == 2 {
            openings.push((sentence[0], sentence[1]));
        }
        if SENTENCE_DELIMITERS.contains(&tok) {
            sentence.clear();
        }
    }
    if sentence.len() != 1 {
        return false;
    }
    let bigram = (sentence[0], next);
    openings.contains(&bigram)
}
