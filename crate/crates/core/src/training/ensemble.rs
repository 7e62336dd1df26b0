//! Diverse ensembling: K members trained with stochastic multiple-choice
//! learning (only the best-scoring members are updated on each example).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{nll_loss, sequence_nll};
use super::optim::{adam_step, OptimizerConfig};
use super::Instance;
use crate::autodiff::{AutodiffError, Gradients, Graph, ParamId, ParamSnapshot, ParamStore};
use crate::seq2seq::{Mode, ModelConfig, ModelParams, Seq2Seq, Sharing};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub k: usize,
    pub sharing: Sharing,
    pub top_u: usize,
    pub pretrain_epochs: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            k: 2,
            sharing: Sharing::None,
            top_u: 1,
            pretrain_epochs: 4,
        }
    }
}

impl EnsembleConfig {
    pub fn single() -> Self {
        Self {
            k: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("ensemble k must be at least 1".into());
        }
        if self.top_u == 0 || self.top_u > self.k {
            return Err(format!("top_u {} must lie in 1..={}", self.top_u, self.k));
        }
        Ok(())
    }
}

/// Numeric precision of the stored parameters. `F32` rounds every value to
/// single precision after initialization and after each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Precision {
    #[serde(rename = "32")]
    F32,
    #[default]
    #[serde(rename = "64")]
    F64,
}

/// One row of the assignment log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// Index of the training instance (one per example reference).
    pub example_id: usize,
    pub epoch: usize,
    pub chosen: Vec<usize>,
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub pretraining: bool,
    /// Mean per-token training loss of each member over all instances.
    pub train_loss: Vec<f64>,
    /// Number of instances each member was updated on.
    pub updates: Vec<usize>,
}

/// Options for one pass over the training data.
#[derive(Debug, Clone)]
pub struct EpochOptions {
    pub optimizer: OptimizerConfig,
    pub precision: Precision,
    pub seed: u64,
    pub threads: usize,
}

pub struct Ensemble {
    pub config: EnsembleConfig,
    pub model_config: ModelConfig,
    pub vocab_size: usize,
    pub store: ParamStore,
    pub members: Vec<Seq2Seq>,
    /// Completed epochs.
    pub epoch: usize,
    /// Members chosen for each instance on its most recent visit.
    pub last_assignment: Vec<Vec<usize>>,
}

impl Ensemble {
    pub fn new<R: Rng>(
        model_config: ModelConfig,
        config: EnsembleConfig,
        vocab_size: usize,
        precision: Precision,
        rng: &mut R,
    ) -> Result<Self, AutodiffError> {
        let mut store = ParamStore::new();
        let mut params: Vec<ModelParams> = Vec::with_capacity(config.k);
        for k in 0..config.k {
            let p = ModelParams::init(&mut store, &model_config, vocab_size, k, config.sharing, params.first(), rng)?;
            params.push(p);
        }
        if precision == Precision::F32 {
            store.round_to_f32();
        }
        let members = params
            .into_iter()
            .map(|p| Seq2Seq::new(model_config.clone(), p))
            .collect();
        Ok(Self {
            config,
            model_config,
            vocab_size,
            store,
            members,
            epoch: 0,
            last_assignment: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn member(&self, k: usize) -> &Seq2Seq {
        &self.members[k]
    }

    /// Member `k`'s parameters keyed by role (shared tensors included).
    pub fn member_snapshot(&self, k: usize) -> ParamSnapshot {
        let mut snap = ParamSnapshot::new();
        for (role, id) in self.members[k].params.roles() {
            snap.insert(role, self.store.value(id));
        }
        snap
    }

    /// Summed NLL of member `k` on `inst` without dropout.
    pub fn member_nll(&self, k: usize, inst: &Instance) -> Result<f64, AutodiffError> {
        sequence_nll(&self.members[k], &self.store, inst)
    }

    pub fn in_pretraining(&self) -> bool {
        self.epoch < self.config.pretrain_epochs
    }

    /// Runs one epoch of sMCL over `data`; returns the epoch statistics and
    /// the assignment log in visiting order.
    pub fn train_epoch(
        &mut self,
        data: &[Instance],
        opts: &EpochOptions,
        rng: &mut ChaCha8Rng,
    ) -> Result<(EpochStats, Vec<Assignment>), AutodiffError> {
        smcl_train_epoch(self, data, opts, rng)
    }
}

/// Log-likelihood of a uniform mixture: `log((1/K) Σ_k exp(ll_k))`.
pub fn mixture_loglik(logliks: &[f64]) -> f64 {
    let max = logliks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = logliks.iter().map(|l| (l - max).exp()).sum();
    max + sum.ln() - (logliks.len() as f64).ln()
}

/// Mixture log-likelihood of one instance under the ensemble.
pub fn ensemble_mixture_loglik(ens: &Ensemble, inst: &Instance) -> Result<f64, AutodiffError> {
    let lls = (0..ens.k())
        .map(|k| ens.member_nll(k, inst).map(|n| -n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mixture_loglik(&lls))
}

/// Member indices ranked by ascending NLL; ties keep the lower index first.
pub fn smcl_assign(nlls: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..nlls.len()).collect();
    order.sort_by(|&a, &b| nlls[a].total_cmp(&nlls[b]).then(a.cmp(&b)));
    order
}

/// Token-level perplexity of every member over `data`.
pub fn member_perplexities(ens: &Ensemble, data: &[Instance]) -> Result<Vec<f64>, AutodiffError> {
    (0..ens.k())
        .map(|k| {
            let mut total = 0.0;
            let mut tokens = 0usize;
            for inst in data {
                total += ens.member_nll(k, inst)?;
                tokens += inst.steps();
            }
            Ok((total / tokens.max(1) as f64).exp())
        })
        .collect()
}

/// Index of the lowest perplexity; lowest index on ties.
pub fn select_inference_model(perplexities: &[f64]) -> usize {
    smcl_assign(perplexities).first().copied().unwrap_or(0)
}

/// Deterministic per-(epoch, visit, member) dropout stream, independent of
/// thread scheduling.
fn dropout_rng(seed: u64, epoch: usize, visit: usize, member: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(((epoch as u64) << 32) | visit as u64);
    r.set_word_pos((member as u128) << 40);
    r
}

struct ExampleOutcome {
    losses: Vec<f64>,
    chosen: Vec<usize>,
    grads: Vec<Gradients>,
}

fn process_example(
    ens: &Ensemble,
    inst: &Instance,
    pretraining: bool,
    seed: u64,
    visit: usize,
) -> Result<ExampleOutcome, AutodiffError> {
    let k = ens.k();
    let mut graphs = Vec::with_capacity(k);
    let mut losses = Vec::with_capacity(k);
    for (m, model) in ens.members.iter().enumerate() {
        let mut g = Graph::new(&ens.store);
        let mut rng = dropout_rng(seed, ens.epoch, visit, m);
        let loss = nll_loss(&mut g, model, inst, &mut Mode::Train(&mut rng))?;
        losses.push(g.scalar(loss));
        graphs.push((g, loss));
    }
    let chosen: Vec<usize> = if pretraining {
        (0..k).collect()
    } else {
        let mut top = smcl_assign(&losses);
        top.truncate(ens.config.top_u);
        top
    };
    let mut grads = Vec::with_capacity(chosen.len());
    for &m in &chosen {
        let (g, loss) = &graphs[m];
        grads.push(g.backward(*loss)?);
    }
    Ok(ExampleOutcome { losses, chosen, grads })
}

/// One sMCL epoch. Instances are visited in a shuffled order and grouped into
/// minibatches. During pretraining every member is updated on every
/// instance; afterwards only the `top_u` lowest-loss members are.
pub fn smcl_train_epoch(
    ens: &mut Ensemble,
    data: &[Instance],
    opts: &EpochOptions,
    rng: &mut ChaCha8Rng,
) -> Result<(EpochStats, Vec<Assignment>), AutodiffError> {
    let k = ens.k();
    let pretraining = ens.in_pretraining();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    if ens.last_assignment.len() != data.len() {
        ens.last_assignment = vec![Vec::new(); data.len()];
    }
    let epoch = ens.epoch + 1;
    let mut log = Vec::with_capacity(data.len());
    let mut loss_sum = vec![0.0; k];
    let mut updates = vec![0usize; k];
    let batch = opts.optimizer.batch_size.max(1);
    let pool = if opts.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| AutodiffError::InvalidArgument(e.to_string()))?,
        )
    } else {
        None
    };

    for (b, chunk) in order.chunks(batch).enumerate() {
        let outcomes: Vec<ExampleOutcome> = {
            let ens_ref: &Ensemble = ens;
            let run = |(j, &i): (usize, &usize)| {
                process_example(ens_ref, &data[i], pretraining, opts.seed, b * batch + j)
            };
            match &pool {
                Some(pool) => {
                    use rayon::prelude::*;
                    pool.install(|| chunk.par_iter().enumerate().map(run).collect::<Result<_, _>>())?
                }
                None => chunk.iter().enumerate().map(run).collect::<Result<_, _>>()?,
            }
        };
        let mut touched: Vec<ParamId> = Vec::new();
        for (&i, out) in chunk.iter().zip(&outcomes) {
            for (m, l) in out.losses.iter().enumerate() {
                loss_sum[m] += l;
            }
            for &m in &out.chosen {
                updates[m] += 1;
            }
            for g in &out.grads {
                ens.store.accumulate(g);
                touched.extend(g.ids());
            }
            ens.last_assignment[i] = out.chosen.clone();
            log.push(Assignment {
                example_id: i,
                epoch,
                chosen: out.chosen.clone(),
            });
        }
        touched.sort();
        touched.dedup();
        let scale = 1.0 / chunk.len() as f64;
        for &id in &touched {
            ens.store.get_mut(id).grad.iter_mut().for_each(|g| *g *= scale);
        }
        adam_step(&mut ens.store, &touched, &opts.optimizer);
        if opts.precision == Precision::F32 {
            ens.store.round_to_f32();
        }
    }
    ens.epoch = epoch;
    let n = data.len().max(1) as f64;
    Ok((
        EpochStats {
            epoch,
            pretraining,
            train_loss: loss_sum.iter().map(|s| s / n).collect(),
            updates,
        },
        log,
    ))
}
