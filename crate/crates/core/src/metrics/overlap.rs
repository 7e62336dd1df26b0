use std::collections::HashMap;

use super::MetricsError;

fn check<S>(candidates: &[Vec<S>], references: &[Vec<Vec<S>>]) -> Result<(), MetricsError> {
    if candidates.len() != references.len() {
        return Err(MetricsError::LengthMismatch {
            expected: references.len(),
            found: candidates.len(),
        });
    }
    if candidates.is_empty() {
        return Err(MetricsError::EmptyCandidate(0));
    }
    if let Some(i) = candidates.iter().position(|c| c.is_empty()) {
        return Err(MetricsError::EmptyCandidate(i));
    }
    if let Some(i) = references.iter().position(|r| r.is_empty()) {
        return Err(MetricsError::NoReferences(i));
    }
    Ok(())
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(|s| s.as_ref()).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU on a 0-100 scale: n-gram matches clipped by the
/// per-reference maximum count, geometric mean over the orders that occur in
/// the candidates (no smoothing), brevity penalty against the closest
/// reference length (shorter wins ties).
pub fn bleu<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<Vec<S>>], max_n: usize) -> Result<f64, MetricsError> {
    check(candidates, references)?;
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (cand, refs) in candidates.iter().zip(references) {
        cand_len += cand.len();
        ref_len += refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| (l.abs_diff(cand.len()), l))
            .unwrap_or(0);
        for n in 1..=max_n {
            let counts = ngram_counts(cand, n);
            let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
            for r in refs {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in counts {
                matches[n - 1] += c.min(max_ref.get(&g).copied().unwrap_or(0));
                totals[n - 1] += c;
            }
        }
    }
    let orders: Vec<usize> = (0..max_n).filter(|&i| totals[i] > 0).collect();
    if orders.is_empty() || orders.iter().any(|&i| matches[i] == 0) {
        return Ok(0.0);
    }
    let log_mean = orders
        .iter()
        .map(|&i| (matches[i] as f64 / totals[i] as f64).ln())
        .sum::<f64>()
        / orders.len() as f64;
    let bp = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    Ok(100.0 * bp * log_mean.exp())
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x.as_ref() == y.as_ref() {
                diag + 1
            } else {
                up.max(row[j])
            };
            diag = up;
        }
    }
    row[b.len()]
}

/// Mean over candidates of the best LCS F1 against any reference, 0-100.
pub fn rouge_l<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<Vec<S>>]) -> Result<f64, MetricsError> {
    check(candidates, references)?;
    let total: f64 = candidates
        .iter()
        .zip(references)
        .map(|(c, refs)| {
            refs.iter()
                .map(|r| {
                    let l = lcs_len(c, r) as f64;
                    if l == 0.0 {
                        return 0.0;
                    }
                    let p = l / c.len() as f64;
                    let rec = l / r.len() as f64;
                    2.0 * p * rec / (p + rec)
                })
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(100.0 * total / candidates.len() as f64)
}
