use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{block_repeat_beginnings, rerank_score, DecodeConfig, DecodeError};
use crate::autodiff::{Graph, ParamStore};
use crate::data::{SourceSeq, Vocabulary, BOS, EOS, PAD};
use crate::seq2seq::{joint_token_distribution, DecoderState, Mode, Seq2Seq};

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Extended-vocabulary ids; ends with `EOS` unless truncated at `max_len`.
    pub tokens: Vec<usize>,
    pub logprob: f64,
    /// Per source position, the summed ranking attention over all steps.
    pub coverage: Vec<f64>,
    pub finished: bool,
    pub score: f64,
}

impl Hypothesis {
    /// Output tokens without the closing `EOS`.
    pub fn words(&self, source: &SourceSeq, vocab: &Vocabulary) -> Vec<String> {
        self.tokens
            .iter()
            .filter(|&&id| id != EOS)
            .map(|&id| source.ext_token(id, vocab).unwrap_or("<unk>").to_string())
            .collect()
    }
}

/// One line of n-best output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBestEntry {
    pub source_mr: String,
    pub rank: usize,
    pub tokens: Vec<String>,
    pub logprob: f64,
    pub score: f64,
    pub coverage_vector: Vec<f64>,
}

impl NBestEntry {
    pub fn new(source_mr: &str, rank: usize, hyp: &Hypothesis, source: &SourceSeq, vocab: &Vocabulary) -> Self {
        Self {
            source_mr: source_mr.to_string(),
            rank,
            tokens: hyp.words(source, vocab),
            logprob: hyp.logprob,
            score: hyp.score,
            coverage_vector: hyp.coverage.clone(),
        }
    }
}

/// Tokens the decoder may produce: everything but padding, `BOS` and the
/// attribute boundary markers.
pub fn emittable(id: usize, vocab: &Vocabulary) -> bool {
    id >= vocab.len() || (id != PAD && id != BOS && !vocab.is_boundary(id))
}

struct Live {
    tokens: Vec<usize>,
    words: Vec<String>,
    logprob: f64,
    coverage: Vec<f64>,
    state: DecoderState,
}

struct Candidate {
    parent: usize,
    token: usize,
    logprob: f64,
    tokens: Vec<usize>,
}

fn by_logprob(a: &Candidate, b: &Candidate) -> Ordering {
    b.logprob.total_cmp(&a.logprob).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search under the joint copy/generation distribution. Returns the
/// finished pool ranked by rerank score (ties broken by token ids), best
/// first.
pub fn beam_search(
    model: &Seq2Seq,
    store: &ParamStore,
    source: &SourceSeq,
    vocab: &Vocabulary,
    cfg: &DecodeConfig,
) -> Result<Vec<Hypothesis>, DecodeError> {
    cfg.validate().map_err(DecodeError::Config)?;
    let mut g = Graph::new(store);
    let mut mode = Mode::Eval;
    let enc = model.encode(&mut g, &source.ids, &mut mode)?;
    let ext_size = source.ext_size();
    let mut live = vec![Live {
        tokens: Vec::new(),
        words: Vec::new(),
        logprob: 0.0,
        coverage: vec![0.0; source.len()],
        state: model.init_state(&mut g, &enc)?,
    }];
    let mut pool: Vec<Hypothesis> = Vec::new();

    for step in 1..=cfg.max_len {
        let mut candidates = Vec::new();
        let mut expansions = Vec::with_capacity(live.len());
        for (parent, hyp) in live.iter().enumerate() {
            let prev = hyp.tokens.last().map_or(BOS, |&t| source.base_id(t));
            let out = model.decode_step(&mut g, prev, &hyp.state, &enc, &mut mode)?;
            let dist = model.distributions(&g, &out);
            let probs = joint_token_distribution(&dist, &source.ext_ids, ext_size);
            for (token, &p) in probs.iter().enumerate() {
                if p <= 0.0 || !emittable(token, vocab) {
                    continue;
                }
                let mut tokens = hyp.tokens.clone();
                tokens.push(token);
                candidates.push(Candidate {
                    parent,
                    token,
                    logprob: hyp.logprob + p.ln(),
                    tokens,
                });
            }
            let coverage: Vec<f64> = hyp.coverage.iter().zip(&dist.rank_attn).map(|(a, r)| a + r).collect();
            expansions.push((out.state, coverage));
        }
        candidates.sort_by(by_logprob);

        let last = step == cfg.max_len;
        let mut next: Vec<Live> = Vec::new();
        let mut kept = 0;
        for cand in candidates {
            if kept == cfg.beam_size {
                break;
            }
            let parent = &live[cand.parent];
            let (state, coverage) = &expansions[cand.parent];
            if cand.token == EOS {
                pool.push(finish(cand.tokens, cand.logprob, coverage.clone(), true, cfg));
                continue;
            }
            let word = source.ext_token(cand.token, vocab).unwrap_or("<unk>").to_string();
            if cfg.block_repeat_beginnings && block_repeat_beginnings(&parent.words, &word) {
                continue;
            }
            kept += 1;
            if last {
                pool.push(finish(cand.tokens, cand.logprob, coverage.clone(), false, cfg));
                continue;
            }
            let mut words = parent.words.clone();
            words.push(word);
            next.push(Live {
                tokens: cand.tokens,
                words,
                logprob: cand.logprob,
                coverage: coverage.clone(),
                state: state.clone(),
            });
        }
        live = next;
        if live.is_empty() || pool.len() >= cfg.beam_size {
            break;
        }
    }

    if pool.is_empty() {
        return Err(DecodeError::EmptyBeam);
    }
    pool.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens)));
    Ok(pool)
}

fn finish(tokens: Vec<usize>, logprob: f64, coverage: Vec<f64>, finished: bool, cfg: &DecodeConfig) -> Hypothesis {
    let score = rerank_score(logprob, tokens.len(), &coverage, cfg.alpha, cfg.beta);
    Hypothesis {
        tokens,
        logprob,
        coverage,
        finished,
        score,
    }
}
