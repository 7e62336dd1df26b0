use std::fs;
use std::path::Path;

use divgen::pipeline::{checkpoint_name, latest_checkpoint, member_count, select_member, train, Checkpoint, LoadedModel, TrainReport};
use divgen::seq2seq::ModelConfig;
use divgen::synthetic::copy_task;
use divgen::training::{instances, sequence_nll, EnsembleConfig};
use divgen::RunConfig;

fn config(k: usize, epochs: usize) -> RunConfig {
    RunConfig {
        model: ModelConfig::tiny(8),
        ensemble: EnsembleConfig {
            k,
            pretrain_epochs: 1,
            ..Default::default()
        },
        epochs,
        seed: 5,
        ..Default::default()
    }
}

fn report(dir: &Path) -> TrainReport {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn zero_epochs_writes_only_initial_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let r = train(&config(2, 0), &copy_task(6, 1), None, tmp.path()).unwrap();
    assert!(r.epochs.is_empty());
    assert_eq!(r.best_member, None);
    assert_eq!(report(tmp.path()), r);
    for k in 0..2 {
        assert_eq!(latest_checkpoint(tmp.path(), k).unwrap(), tmp.path().join(checkpoint_name(k, 0)));
    }
    assert_eq!(member_count(tmp.path()).unwrap(), 2);
    let log = fs::read_to_string(tmp.path().join("assignments.csv")).unwrap();
    assert_eq!(log.lines().count(), 1);
}

#[test]
fn training_writes_one_checkpoint_per_member_and_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let data = copy_task(8, 2);
    let r = train(&config(2, 3), &data, Some(&data), tmp.path()).unwrap();
    assert_eq!(r.epochs.len(), 3);
    assert!(r.epochs[0].stats.pretraining && !r.epochs[1].stats.pretraining);
    assert!(r.best_member.is_some());
    for k in 0..2 {
        for e in 0..=3 {
            assert!(tmp.path().join(checkpoint_name(k, e)).exists());
        }
    }
    let log = fs::read_to_string(tmp.path().join("assignments.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 3 * r.train_instances);
}

#[test]
fn same_seed_same_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let data = copy_task(8, 3);
    train(&config(2, 2), &data, None, a.path()).unwrap();
    train(&config(2, 2), &data, None, b.path()).unwrap();
    for name in [checkpoint_name(0, 2), checkpoint_name(1, 2), "report.json".into(), "assignments.csv".into()] {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn checkpoint_reload_reproduces_losses() {
    let tmp = tempfile::tempdir().unwrap();
    let data = copy_task(8, 4);
    train(&config(1, 2), &data, None, tmp.path()).unwrap();
    let loaded = LoadedModel::load(tmp.path(), 0).unwrap();
    let ck = Checkpoint::load(&latest_checkpoint(tmp.path(), 0).unwrap()).unwrap();
    assert_eq!(ck.epoch, 2);
    let (store, model) = ck.into_model().unwrap();
    for inst in instances(&data, &loaded.vocab) {
        let a = sequence_nll(&loaded.model, &loaded.store, &inst).unwrap();
        let b = sequence_nll(&model, &store, &inst).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    train(&config(1, 0), &copy_task(4, 5), None, tmp.path()).unwrap();
    fs::write(tmp.path().join(checkpoint_name(0, 0)), "{\"format\": 1}").unwrap();
    assert!(LoadedModel::load(tmp.path(), 0).is_err());
}

#[test]
fn select_member_picks_lowest_perplexity() {
    let tmp = tempfile::tempdir().unwrap();
    let data = copy_task(8, 6);
    train(&config(2, 2), &data, None, tmp.path()).unwrap();
    let (best, ppl) = select_member(tmp.path(), &data).unwrap();
    assert_eq!(ppl.len(), 2);
    assert!(ppl.iter().all(|&p| p >= ppl[best]));
    assert!(select_member(tempfile::tempdir().unwrap().path(), &data).is_err());
}

#[test]
fn invalid_configuration_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(2, 1);
    cfg.ensemble.top_u = 3;
    assert!(train(&cfg, &copy_task(4, 7), None, tmp.path()).unwrap_err().is_config());
    assert!(train(&config(1, 1), &[], None, tmp.path()).unwrap_err().is_config());
}
