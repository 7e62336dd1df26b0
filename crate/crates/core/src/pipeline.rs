//! End-to-end runs: training with on-disk artifacts, checkpoint loading and
//! generation.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamSnapshot, ParamStore};
use crate::config::RunConfig;
use crate::data::{build_vocab, load_dataset, Example, LoadOptions, MeaningRepresentation, SourceSeq, Vocabulary};
use crate::decoding::{beam_search, DecodeConfig, Hypothesis};
use crate::error::{Error, Result};
use crate::seq2seq::{ModelConfig, ModelParams, Seq2Seq, Sharing};
use crate::training::{
    instances, member_perplexities, select_inference_model, write_assignments, Ensemble, EpochOptions,
    EpochStats, Precision,
};

pub const CHECKPOINT_FORMAT: u32 = 1;

/// One member's parameters (keyed by role) plus what is needed to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub member: usize,
    pub epoch: usize,
    pub model: ModelConfig,
    pub vocab_size: usize,
    pub params: ParamSnapshot,
}

pub fn checkpoint_name(member: usize, epoch: usize) -> String {
    format!("member{member}-epoch{epoch}.json")
}

impl Checkpoint {
    pub fn of_member(ens: &Ensemble, member: usize) -> Self {
        Self {
            format: CHECKPOINT_FORMAT,
            member,
            epoch: ens.epoch,
            model: ens.model_config.clone(),
            vocab_size: ens.vocab_size,
            params: ens.member_snapshot(member),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("checkpoint serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Self = serde_json::from_str(&text)
            .map_err(|e| Error::CheckpointMismatch(format!("{}: {e}", path.display())))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::CheckpointMismatch(format!("unsupported format {}", ck.format)));
        }
        Ok(ck)
    }

    /// Rebuilds the member as a standalone model.
    pub fn into_model(&self) -> Result<(ParamStore, Seq2Seq)> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = ModelParams::init(&mut store, &self.model, self.vocab_size, self.member, Sharing::None, None, &mut rng)?;
        let roles: Vec<(String, _)> = params.roles().map(|(r, id)| (r.to_string(), id)).collect();
        if roles.len() != self.params.tensors.len() {
            return Err(Error::CheckpointMismatch(format!(
                "expected {} tensors, found {}",
                roles.len(),
                self.params.tensors.len()
            )));
        }
        for (role, id) in roles {
            self.params
                .restore(&role, &mut store, id)
                .map_err(|e| Error::CheckpointMismatch(e.to_string()))?;
        }
        Ok((store, Seq2Seq::new(self.model.clone(), params)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    #[serde(flatten)]
    pub stats: EpochStats,
    pub valid_perplexity: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub members: usize,
    pub vocab_size: usize,
    pub train_instances: usize,
    pub epochs: Vec<EpochReport>,
    /// Member with the lowest final validation perplexity.
    pub best_member: Option<usize>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a dataset with the run's schema setting.
pub fn load_examples(path: &Path, config: &RunConfig) -> Result<Vec<Example>> {
    Ok(load_dataset(
        path,
        LoadOptions {
            strict_schema: config.data.strict_schema,
        },
    )?)
}

/// Trains an ensemble on `train`, writing the vocabulary, configuration,
/// per-epoch checkpoints, the assignment log and a report into `out_dir`.
pub fn train(config: &RunConfig, train: &[Example], valid: Option<&[Example]>, out_dir: &Path) -> Result<TrainReport> {
    for c in [
        config.model.validate(),
        config.ensemble.validate(),
        config.optimizer.validate(),
    ] {
        c.map_err(Error::Config)?;
    }
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let vocab = build_vocab(train, config.data.min_freq);
    vocab.save(&out_dir.join("vocab.json"))?;
    write(&out_dir.join("config.json"), &config.to_json())?;

    let data = instances(train, &vocab);
    let valid_data = valid.map(|v| instances(v, &vocab));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ens = Ensemble::new(
        config.model.clone(),
        config.ensemble.clone(),
        vocab.len(),
        config.precision,
        &mut rng,
    )?;
    let save_all = |ens: &Ensemble| -> Result<()> {
        for k in 0..ens.k() {
            Checkpoint::of_member(ens, k).save(&out_dir.join(checkpoint_name(k, ens.epoch)))?;
        }
        Ok(())
    };
    save_all(&ens)?;

    let opts = EpochOptions {
        optimizer: config.optimizer.clone(),
        precision: config.precision,
        seed: config.seed,
        threads: config.threads,
    };
    let mut log = Vec::new();
    let mut epochs = Vec::new();
    for _ in 0..config.epochs {
        let (stats, assignments) = ens.train_epoch(&data, &opts, &mut rng)?;
        let valid_perplexity = match &valid_data {
            Some(v) if !v.is_empty() => Some(member_perplexities(&ens, v)?),
            _ => None,
        };
        log::info!(
            "epoch {}: train loss {:?}, valid perplexity {:?}",
            stats.epoch,
            stats.train_loss,
            valid_perplexity
        );
        save_all(&ens)?;
        log.extend(assignments);
        epochs.push(EpochReport { stats, valid_perplexity });
    }

    let log_path = out_dir.join("assignments.csv");
    let file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    write_assignments(file, &log)?;

    let best_member = epochs
        .last()
        .and_then(|e| e.valid_perplexity.as_deref())
        .map(select_inference_model);
    let report = TrainReport {
        seed: config.seed,
        members: ens.k(),
        vocab_size: vocab.len(),
        train_instances: data.len(),
        epochs,
        best_member,
    };
    write(
        &out_dir.join("report.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Ok(report)
}

/// Path of member `member`'s latest checkpoint in `run_dir`.
pub fn latest_checkpoint(run_dir: &Path, member: usize) -> Result<PathBuf> {
    let prefix = format!("member{member}-epoch");
    let mut best: Option<(usize, PathBuf)> = None;
    let entries = fs::read_dir(run_dir).map_err(|e| Error::io(run_dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(run_dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(epoch) = name
            .strip_prefix(&prefix)
            .and_then(|r| r.strip_suffix(".json"))
            .and_then(|e| e.parse::<usize>().ok())
        {
            if best.as_ref().map_or(true, |(b, _)| epoch > *b) {
                best = Some((epoch, path));
            }
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| {
        Error::CheckpointMismatch(format!("no checkpoint for member {member} in {}", run_dir.display()))
    })
}

/// Number of members with checkpoints in `run_dir`.
pub fn member_count(run_dir: &Path) -> Result<usize> {
    let mut k = 0;
    while latest_checkpoint(run_dir, k).is_ok() {
        k += 1;
    }
    Ok(k)
}

/// A member restored from a run directory, ready for decoding.
pub struct LoadedModel {
    pub member: usize,
    pub vocab: Vocabulary,
    pub store: ParamStore,
    pub model: Seq2Seq,
}

impl LoadedModel {
    pub fn load(run_dir: &Path, member: usize) -> Result<Self> {
        let vocab = Vocabulary::load(&run_dir.join("vocab.json"))?;
        let ck = Checkpoint::load(&latest_checkpoint(run_dir, member)?)?;
        if ck.vocab_size != vocab.len() {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint vocabulary size {} differs from vocab.json ({})",
                ck.vocab_size,
                vocab.len()
            )));
        }
        let (store, model) = ck.into_model()?;
        Ok(Self {
            member,
            vocab,
            store,
            model,
        })
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        if precision == Precision::F32 {
            self.store.round_to_f32();
        }
        self
    }

    /// Token-level perplexity on `examples`.
    pub fn perplexity(&self, examples: &[Example]) -> Result<f64> {
        Ok(crate::metrics::perplexity(&self.model, &self.store, &instances(examples, &self.vocab))?)
    }

    /// Ranked hypotheses for one MR.
    pub fn decode(&self, mr: &MeaningRepresentation, cfg: &DecodeConfig) -> Result<(SourceSeq, Vec<Hypothesis>)> {
        let source = SourceSeq::from_mr(mr, &self.vocab);
        let nbest = beam_search(&self.model, &self.store, &source, &self.vocab, cfg)?;
        Ok((source, nbest))
    }
}

/// Picks the member with the best perplexity on `valid` among the members
/// stored in `run_dir`.
pub fn select_member(run_dir: &Path, valid: &[Example]) -> Result<(usize, Vec<f64>)> {
    let k = member_count(run_dir)?;
    if k == 0 {
        return Err(Error::CheckpointMismatch(format!("no checkpoints in {}", run_dir.display())));
    }
    let ppl = (0..k)
        .map(|m| LoadedModel::load(run_dir, m)?.perplexity(valid))
        .collect::<Result<Vec<_>>>()?;
    Ok((select_inference_model(&ppl), ppl))
}
