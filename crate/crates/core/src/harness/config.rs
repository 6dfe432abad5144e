//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! seeds = [1, 2, 3]
//! epoch_checkpoints = [10, 20, 30]
//! freq_mode = "type"
//! out_dir = "runs/a"
//! corpus = "data/verbs.tsv"   # omit corpus and nonce to use the synthetic fixture
//! nonce = "data/nonce.tsv"
//!
//! [hparams]
//! hidden_dim = 32
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::datastore::{FreqMode, SyntheticSpec};
use crate::inflector::HyperParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: Option<PathBuf>,
    pub nonce: Option<PathBuf>,
    /// Fixture seed when no corpus and nonce files are given.
    pub synthetic_seed: u64,
    pub synthetic: SyntheticSpec,
    pub hparams: HyperParams,
    pub seeds: Vec<u64>,
    /// Epochs after which a checkpoint is kept; the final epoch always is.
    pub epoch_checkpoints: Vec<usize>,
    pub freq_mode: FreqMode,
    pub out_dir: PathBuf,
    /// Seeds trained or evaluated concurrently.
    pub workers: usize,
    /// Samples per seed and nonce item for the aggregate experiment.
    pub samples: usize,
    /// Training accuracy is logged every this many epochs (and at the end).
    pub accuracy_every: usize,
    /// Neighbours per point in the probe's clustering summary.
    pub probe_neighbors: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            nonce: None,
            synthetic_seed: 7,
            synthetic: SyntheticSpec::default(),
            hparams: HyperParams::default(),
            seeds: vec![1],
            epoch_checkpoints: (1..=10).map(|k| 10 * k).collect(),
            freq_mode: FreqMode::Type,
            out_dir: PathBuf::from("out"),
            workers: 1,
            samples: 100,
            accuracy_every: 10,
            probe_neighbors: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config; relative data paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.corpus, &mut cfg.nonce].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return bad(format!("seed {dup} is listed more than once"));
        }
        self.hparams.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.hparams.epochs == 0 {
            return bad("hparams.epochs must be at least 1".into());
        }
        if let Some(e) = self.epoch_checkpoints.iter().find(|&&e| e == 0 || e > self.hparams.epochs) {
            return bad(format!("epoch checkpoint {e} lies outside 1..={}", self.hparams.epochs));
        }
        if self.corpus.is_some() != self.nonce.is_some() {
            return bad("give both corpus and nonce, or neither for the synthetic fixture".into());
        }
        if self.workers == 0 || self.samples == 0 || self.accuracy_every == 0 || self.probe_neighbors == 0 {
            return bad("workers, samples, accuracy_every and probe_neighbors must be positive".into());
        }
        Ok(())
    }

    /// Sorted, deduplicated checkpoint epochs including the final one.
    pub fn checkpoint_epochs(&self) -> Vec<usize> {
        let mut e: BTreeSet<usize> = self.epoch_checkpoints.iter().copied().collect();
        e.insert(self.hparams.epochs);
        e.into_iter().collect()
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_seeds_are_rejected() {
        let err = ExperimentConfig::from_toml("seeds = [1, 1]").unwrap_err();
        assert!(err.to_string().contains("seed 1"));
        assert!(err.is_validation());
        assert!(ExperimentConfig::from_toml("seeds = []").is_err());
    }

    #[test]
    fn partial_file_fills_defaults_and_round_trips() {
        let cfg = ExperimentConfig::from_toml("seeds = [3, 4]\nepoch_checkpoints = [10, 20, 30]\n[hparams]\nhidden_dim = 32\nepochs = 40\n").unwrap();
        assert_eq!(cfg.hparams.hidden_dim, 32);
        assert_eq!(cfg.hparams.embed_dim, HyperParams::default().embed_dim);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.checkpoint_epochs(), vec![10, 20, 30, 40]);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seeds: vec![2], ..a.clone() };
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn unknown_keys_and_bad_checkpoints_are_rejected() {
        assert!(ExperimentConfig::from_toml("seedz = [1]").is_err());
        assert!(ExperimentConfig::from_toml("epoch_checkpoints = [500]").is_err());
        assert!(ExperimentConfig::from_toml("corpus = \"a.tsv\"").is_err());
    }
}
