use std::collections::{BTreeSet, HashMap};

use super::InflectorError;
use crate::phoneme::PhonemeSeq;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
const RESERVED: [&str; 3] = ["<pad>", "<s>", "</s>"];

/// Phoneme ↔ id bijection. Ids 0..3 are PAD, BOS, EOS; phonemes follow in
/// sorted order so a vocabulary is a pure function of its token set.
///
/// The decoder's output classes exclude PAD and BOS: class 0 is EOS and
/// class `k > 0` is phoneme id `k + 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = tokens
            .into_iter()
            .map(|s| s.as_ref().to_string())
            .filter(|t| !RESERVED.contains(&t.as_str()))
            .collect();
        let tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).chain(set).collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn from_sequences<'a>(seqs: impl IntoIterator<Item = &'a PhonemeSeq>) -> Self {
        Self::from_tokens(seqs.into_iter().flat_map(|s| s.iter().map(str::to_string)).collect::<Vec<_>>())
    }

    /// Total ids including the reserved ones.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.num_phonemes() == 0
    }

    pub fn num_phonemes(&self) -> usize {
        self.tokens.len() - RESERVED.len()
    }

    /// Size of the decoder's output distribution (phonemes plus EOS).
    pub fn num_outputs(&self) -> usize {
        self.num_phonemes() + 1
    }

    pub fn phonemes(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn encode(&self, seq: &PhonemeSeq) -> Result<Vec<usize>, InflectorError> {
        seq.iter()
            .map(|t| match self.index.get(t) {
                Some(&id) if id >= RESERVED.len() => Ok(id),
                _ => Err(InflectorError::UnknownPhoneme(t.to_string())),
            })
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> PhonemeSeq {
        ids.iter().map(|&i| self.tokens[i].as_str()).collect()
    }

    pub fn class_of(id: usize) -> usize {
        if id == EOS {
            0
        } else {
            id - 2
        }
    }

    pub fn id_of_class(class: usize) -> usize {
        if class == 0 {
            EOS
        } else {
            class + 2
        }
    }

    /// All tokens in id order, reserved ones included.
    pub fn all_tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rebuild from an id-ordered token list as stored in a checkpoint.
    pub fn from_stored(tokens: Vec<String>) -> Result<Self, InflectorError> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(InflectorError::Config("stored vocabulary lacks reserved tokens".into()));
        }
        let rebuilt = Self::from_tokens(&tokens[RESERVED.len()..]);
        if rebuilt.tokens != tokens {
            return Err(InflectorError::Config("stored vocabulary is not in canonical order".into()));
        }
        Ok(rebuilt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reserved_ids_never_collide() {
        let v = Vocabulary::from_tokens(["a", "b", "<s>"]);
        assert_eq!(v.num_phonemes(), 2);
        assert_eq!(v.id("<s>"), Some(BOS));
        assert!(v.encode(&PhonemeSeq::parse("a <s>")).is_err());
    }

    #[test]
    fn unknown_phoneme_is_named() {
        let v = Vocabulary::from_tokens(["a"]);
        let err = v.encode(&PhonemeSeq::parse("a zz")).unwrap_err();
        assert!(err.to_string().contains("zz"));
    }

    #[test]
    fn output_classes_round_trip() {
        for id in [EOS, 3, 4, 10] {
            assert_eq!(Vocabulary::id_of_class(Vocabulary::class_of(id)), id);
        }
    }

    proptest! {
        #[test]
        fn id_token_bijection(tokens in prop::collection::vec("[a-zA-Z@:\"]{1,3}", 1..20)) {
            let v = Vocabulary::from_tokens(&tokens);
            for id in 3..v.len() {
                let t = v.token(id).unwrap();
                prop_assert_eq!(v.id(t), Some(id));
            }
            for t in &tokens {
                let id = v.id(t).unwrap();
                prop_assert_eq!(v.token(id), Some(t.as_str()));
            }
            prop_assert_eq!(Vocabulary::from_stored(v.all_tokens().to_vec()).unwrap(), v);
        }
    }
}
