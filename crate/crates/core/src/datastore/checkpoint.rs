//! Model checkpoints.
//!
//! A plain-text header terminated by a line `end`, then the payload: every
//! parameter tensor as little-endian `f32`, row-major, in header order.
//!
//! ```text
//! wugnet-checkpoint
//! version 1
//! seed 1
//! epochs 40
//! vocab <PAD> <BOS> <EOS> a b ...
//! hp embed_dim = 32
//! ...
//! tensor enc.0.fwd.w 128 64 0
//! payload 123456
//! sha256 <hex of payload>
//! end
//! ```
//!
//! `tensor` lines give name, rows, cols and byte offset; offsets partition
//! the payload exactly. Parameters are stored at `f32` precision, so a model
//! rounded with [`Model::round_to_f32`] round-trips bit for bit.

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::DataError;
use crate::inflector::{HyperParams, Model, Vocabulary};
use crate::numerics::{ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &str = "wugnet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

fn bad(message: impl Into<String>) -> DataError {
    DataError::Checkpoint(message.into())
}

/// Serialize `model` to bytes.
pub fn encode_checkpoint(model: &Model) -> Vec<u8> {
    let params = model.params();
    let mut payload = Vec::new();
    let mut tensor_lines = String::new();
    for (i, (name, t)) in params.iter().enumerate() {
        debug_assert_eq!(params.name(i), name);
        tensor_lines.push_str(&format!("tensor {name} {} {} {}\n", t.rows(), t.cols(), payload.len()));
        for &v in t.data() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let hp = toml::to_string(model.hparams()).expect("hyperparameters serialize");
    let mut header = format!(
        "{CHECKPOINT_MAGIC}\nversion {CHECKPOINT_VERSION}\nseed {}\nepochs {}\nvocab {}\n",
        model.seed(),
        model.epochs_completed,
        model.vocab().all_tokens().join(" ")
    );
    for line in hp.lines().filter(|l| !l.trim().is_empty()) {
        header.push_str(&format!("hp {line}\n"));
    }
    header.push_str(&tensor_lines);
    header.push_str(&format!("payload {}\nsha256 {}\nend\n", payload.len(), hex::encode(Sha256::digest(&payload))));
    let mut out = header.into_bytes();
    out.extend_from_slice(&payload);
    out
}

/// Write `model` atomically: a sibling temporary file is written, synced and
/// renamed over `path`.
pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), DataError> {
    let io = |source| DataError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&encode_checkpoint(model))?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

fn field<T: std::str::FromStr>(value: &str, what: &str) -> Result<T, DataError> {
    value.trim().parse().map_err(|_| bad(format!("bad {what}: {value:?}")))
}

/// Parse a checkpoint from bytes.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model, DataError> {
    const END: &[u8] = b"\nend\n";
    let split = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| bad("header has no end line (file truncated or not a checkpoint)"))?;
    let header = std::str::from_utf8(&bytes[..split + 1]).map_err(|_| bad("header is not UTF-8"))?;
    let payload = &bytes[split + END.len()..];

    let mut lines = header.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(bad("not a wugnet checkpoint"));
    }
    let mut version = None;
    let (mut seed, mut epochs, mut vocab, mut declared, mut digest) = (None, None, None, None, None);
    let mut hp_text = String::new();
    let mut tensors = Vec::new();
    for line in lines {
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "version" => {
                let v: u32 = field(rest, "version")?;
                if v != CHECKPOINT_VERSION {
                    return Err(DataError::Version { found: v, supported: CHECKPOINT_VERSION });
                }
                version = Some(v);
            }
            "seed" => seed = Some(field::<u64>(rest, "seed")?),
            "epochs" => epochs = Some(field::<usize>(rest, "epochs")?),
            "vocab" => vocab = Some(rest.split(' ').map(str::to_string).collect::<Vec<_>>()),
            "hp" => {
                hp_text.push_str(rest);
                hp_text.push('\n');
            }
            "tensor" => {
                let f: Vec<&str> = rest.split(' ').collect();
                if f.len() != 4 {
                    return Err(bad(format!("bad tensor line {line:?}")));
                }
                tensors.push(TensorEntry {
                    name: f[0].to_string(),
                    rows: field(f[1], "rows")?,
                    cols: field(f[2], "cols")?,
                    offset: field(f[3], "offset")?,
                });
            }
            "payload" => declared = Some(field::<usize>(rest, "payload length")?),
            "sha256" => digest = Some(rest.to_string()),
            _ => return Err(bad(format!("unknown header line {line:?}"))),
        }
    }
    version.ok_or_else(|| bad("missing version"))?;
    let missing = |what: &str| bad(format!("missing {what}"));
    let seed = seed.ok_or_else(|| missing("seed"))?;
    let epochs = epochs.ok_or_else(|| missing("epochs"))?;
    let vocab = vocab.ok_or_else(|| missing("vocab"))?;
    let declared = declared.ok_or_else(|| missing("payload length"))?;
    let digest = digest.ok_or_else(|| missing("sha256"))?;

    if payload.len() != declared {
        return Err(DataError::Truncated { expected: declared, found: payload.len() });
    }
    let actual = hex::encode(Sha256::digest(payload));
    if actual != digest {
        return Err(DataError::Checksum { expected: digest, found: actual });
    }
    let mut cursor = 0;
    for t in &tensors {
        if t.offset != cursor {
            return Err(bad(format!("tensor {} starts at byte {}, expected {cursor}", t.name, t.offset)));
        }
        cursor += t.rows * t.cols * 4;
    }
    if cursor != payload.len() {
        return Err(bad(format!("tensors cover {cursor} bytes of a {}-byte payload", payload.len())));
    }

    let hp: HyperParams = toml::from_str(&hp_text).map_err(|e| bad(format!("hyperparameters: {e}")))?;
    if hp.seed != seed {
        return Err(bad(format!("header seed {seed} disagrees with hyperparameter seed {}", hp.seed)));
    }
    let vocab = Vocabulary::from_stored(vocab).map_err(|e| bad(e.to_string()))?;
    let mut params = ParamStore::default();
    for t in tensors {
        let data = payload[t.offset..t.offset + t.rows * t.cols * 4]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        let tensor = Tensor::matrix(t.rows, t.cols, data).map_err(|e| bad(e.to_string()))?;
        params.push(t.name, tensor);
    }
    Model::from_parts(vocab, hp, params, epochs).map_err(|e| bad(e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<Model, DataError> {
    let bytes = std::fs::read(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inflector::beam_decode;
    use crate::phoneme::PhonemeSeq;

    fn model() -> Model {
        let vocab = Vocabulary::from_tokens(["a", "b", "\"aI", "d"]);
        let hp = HyperParams { embed_dim: 5, hidden_dim: 6, seed: 11, ..HyperParams::default() };
        let mut m = Model::new(vocab, hp).unwrap();
        m.epochs_completed = 3;
        m.round_to_f32();
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = decode_checkpoint(&encode_checkpoint(&m)).unwrap();
        assert_eq!(back.hparams(), m.hparams());
        assert_eq!(back.vocab().all_tokens(), m.vocab().all_tokens());
        assert_eq!(back.epochs_completed, 3);
        for ((n1, t1), (n2, t2)) in m.params().iter().zip(back.params().iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), t2.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
        let input = PhonemeSeq::parse("b \"aI d");
        assert_eq!(beam_decode(&m, &input, 4).unwrap(), beam_decode(&back, &input, 4).unwrap());
    }

    #[test]
    fn save_and_load_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/seed11.ckpt");
        let m = model();
        save_checkpoint(&m, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap().checksum(), m.checksum());
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1, "temporary file left behind");
    }

    #[test]
    fn corrupted_payload_byte_fails_checksum() {
        let mut bytes = encode_checkpoint(&model());
        let last = bytes.len() - 7;
        bytes[last] ^= 0x40;
        assert!(matches!(decode_checkpoint(&bytes), Err(DataError::Checksum { .. })));
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = encode_checkpoint(&model());
        match decode_checkpoint(&bytes[..bytes.len() - 10]) {
            Err(DataError::Truncated { expected, found }) => assert_eq!(expected - found, 10),
            other => panic!("{other:?}"),
        }
        assert!(decode_checkpoint(&bytes[..40]).is_err());
    }

    fn replace_in_header(bytes: &[u8], from: &str, to: &str) -> Vec<u8> {
        let at = bytes.windows(from.len()).position(|w| w == from.as_bytes()).expect("header text present");
        [&bytes[..at], to.as_bytes(), &bytes[at + from.len()..]].concat()
    }

    #[test]
    fn newer_version_is_refused_by_number() {
        let bytes = encode_checkpoint(&model());
        let err = decode_checkpoint(&replace_in_header(&bytes, "version 1\n", "version 2\n")).unwrap_err();
        assert!(matches!(err, DataError::Version { found: 2, supported: 1 }));
        assert!(err.to_string().contains('2') && err.to_string().contains('1'));
    }

    #[test]
    fn shape_mismatch_with_hyperparameters_is_rejected() {
        let bytes = encode_checkpoint(&model());
        let edited = replace_in_header(&bytes, "hp hidden_dim = 6", "hp hidden_dim = 8");
        assert!(matches!(decode_checkpoint(&edited), Err(DataError::Checkpoint(_))));
    }
}
