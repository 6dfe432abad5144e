//! Corpus and nonce-file ingestion, checkpoints, experiment configs and
//! synthetic fixtures.

mod checkpoint;
mod corpus;
mod nonce;
mod synth;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use corpus::{epoch_stream, format_corpus, load_corpus, multiplicity, parse_corpus, FreqMode, VerbClass, VerbEntry};
pub use nonce::{format_nonce, load_nonce, parse_nonce, Category, FormRole, NonceItem, SuggestedForm, PROBABILITY_TOLERANCE};
pub use synth::{make_synthetic_corpus, IrregularTemplate, SyntheticData, SyntheticSpec};

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("item {item}: {message}")]
    Validation { item: String, message: String },
    #[error("synthetic spec: {0}")]
    Spec(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint version {found} is not supported (this build reads version {supported})")]
    Version { found: u32, supported: u32 },
    #[error("checkpoint payload truncated: header declares {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checkpoint checksum mismatch: header {expected}, payload {found}")]
    Checksum { expected: String, found: String },
}

pub(crate) fn read_text(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}
