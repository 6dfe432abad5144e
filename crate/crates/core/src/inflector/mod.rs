//! Character-level encoder-decoder inflection model.
//!
//! Two bidirectional LSTM encoder layers feed a two-layer LSTM decoder with
//! additive attention. Training is teacher-forced cross-entropy minimised
//! with Adadelta; inference offers beam search, forced scoring of a given
//! output, and ancestral sampling. All three inference routes share one
//! decoder step, so their probabilities agree to the last bit.

mod decode;
mod inspect;
mod network;
mod train;
mod vocab;

pub use decode::{beam_decode, beam_decode_capped, force_score, greedy_decode, sample_form, sample_forms, Sample};
pub use network::{Model, ENCODER_DIRECTIONS};
pub use train::{oracle_accuracy, training_accuracy, Accuracy, EpochStats, Trainer};
pub use vocab::{Vocabulary, BOS, EOS, PAD};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{AdadeltaConfig, NumericsError};
use crate::phoneme::PhonemeSeq;

#[derive(Debug, Error)]
pub enum InflectorError {
    #[error("unknown phoneme {0:?}")]
    UnknownPhoneme(String),
    #[error("invalid hyperparameters: {0}")]
    Config(String),
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub batch_size: usize,
    pub dropout_p: f64,
    pub epochs: usize,
    pub beam_width: usize,
    pub seed: u64,
    /// Output length cap is input length plus this.
    pub max_extra_len: usize,
    /// Parameters start uniform in `(-init_range, init_range)`.
    pub init_range: f64,
    pub adadelta_rho: f64,
    pub adadelta_eps: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            embed_dim: 300,
            hidden_dim: 100,
            encoder_layers: 2,
            decoder_layers: 2,
            batch_size: 20,
            dropout_p: 0.3,
            epochs: 100,
            beam_width: 12,
            seed: 1,
            max_extra_len: 8,
            init_range: 0.1,
            adadelta_rho: 0.9,
            adadelta_eps: 1e-6,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), InflectorError> {
        let bad = |m: &str| Err(InflectorError::Config(m.to_string()));
        if self.hidden_dim == 0 || !self.hidden_dim.is_multiple_of(2) {
            return bad("hidden_dim must be even and positive (it is split across encoder directions)");
        }
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive");
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return bad("at least one encoder and one decoder layer are required");
        }
        if self.encoder_layers != self.decoder_layers {
            return bad("decoder layers are initialised from encoder layers, so the counts must match");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout_p must lie in [0, 1)");
        }
        if self.beam_width == 0 {
            return bad("beam_width must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.adadelta_rho > 0.0 && self.adadelta_rho < 1.0) || self.adadelta_eps <= 0.0 {
            return bad("adadelta_rho must lie in (0, 1) and adadelta_eps must be positive");
        }
        if self.init_range < 0.0 {
            return bad("init_range must be non-negative");
        }
        Ok(())
    }

    pub fn adadelta(&self) -> AdadeltaConfig {
        AdadeltaConfig { rho: self.adadelta_rho, eps: self.adadelta_eps }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// One ranked output of beam search.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub form: PhonemeSeq,
    /// Sum of per-step log conditionals, EOS included.
    pub log_prob: f64,
    pub terminated: bool,
}

impl BeamHypothesis {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }
}

/// Hypotheses sorted by descending log-probability.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeamResult {
    pub hypotheses: Vec<BeamHypothesis>,
}

impl BeamResult {
    pub fn top(&self) -> Option<&BeamHypothesis> {
        self.hypotheses.first()
    }

    /// The first `k` distinct output forms.
    pub fn top_forms(&self, k: usize) -> Vec<&PhonemeSeq> {
        let mut out: Vec<&PhonemeSeq> = Vec::with_capacity(k);
        for h in &self.hypotheses {
            if out.len() == k {
                break;
            }
            if !out.contains(&&h.form) {
                out.push(&h.form);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }
}

/// Probability of forcing the model to emit exactly `form` followed by EOS.
#[derive(Debug, Clone, PartialEq)]
pub struct FormScore {
    pub form: PhonemeSeq,
    pub log_prob: f64,
}

impl FormScore {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        HyperParams::default().validate().unwrap();
    }

    #[test]
    fn odd_hidden_dim_is_rejected() {
        let hp = HyperParams { hidden_dim: 101, ..Default::default() };
        assert!(hp.validate().is_err());
    }

    #[test]
    fn dropout_and_beam_bounds() {
        assert!(HyperParams { dropout_p: 1.0, ..Default::default() }.validate().is_err());
        assert!(HyperParams { beam_width: 0, ..Default::default() }.validate().is_err());
    }
}
