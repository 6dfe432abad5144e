use std::path::Path;

use wugnet::harness::{self, checkpoint_path, ExperimentConfig, HarnessError};
use wugnet::inflector::HyperParams;

fn tiny(out: &Path, workers: usize) -> ExperimentConfig {
    ExperimentConfig {
        hparams: HyperParams { embed_dim: 8, hidden_dim: 8, epochs: 2, ..Default::default() },
        seeds: vec![3, 4],
        epoch_checkpoints: vec![1],
        out_dir: out.to_path_buf(),
        workers,
        ..Default::default()
    }
}

fn bytes(cfg: &ExperimentConfig, seed: u64, epoch: usize) -> Vec<u8> {
    std::fs::read(checkpoint_path(cfg, seed, epoch)).unwrap()
}

#[test]
fn training_is_reproducible_across_runs_and_worker_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (serial, parallel) = (tiny(a.path(), 1), tiny(b.path(), 2));
    let s = harness::cmd_train(&serial).unwrap();
    harness::cmd_train(&parallel).unwrap();
    assert_eq!(s.checkpoints.len(), 4);
    for seed in [3, 4] {
        for epoch in [1, 2] {
            assert_eq!(bytes(&serial, seed, epoch), bytes(&parallel, seed, epoch), "seed {seed} epoch {epoch}");
        }
    }
    assert_ne!(bytes(&serial, 3, 2), bytes(&serial, 4, 2));
    let (ra, rb) = (harness::cmd_evaluate(&serial).unwrap(), harness::cmd_evaluate(&parallel).unwrap());
    assert_eq!(ra, rb);
}

#[test]
fn evaluation_lists_every_missing_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), 1);
    match harness::cmd_evaluate(&cfg) {
        Err(HarnessError::MissingCheckpoints(paths)) => {
            assert_eq!(paths, vec![checkpoint_path(&cfg, 3, 2), checkpoint_path(&cfg, 4, 2)]);
        }
        other => panic!("expected missing checkpoints, got {other:?}"),
    }
}

#[test]
fn checkpoints_from_another_config_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), 1);
    harness::cmd_train(&cfg).unwrap();
    let wider = ExperimentConfig { hparams: HyperParams { hidden_dim: 10, ..cfg.hparams.clone() }, ..cfg };
    let err = harness::cmd_evaluate(&wider).unwrap_err();
    assert!(!err.is_validation(), "{err}");
}
