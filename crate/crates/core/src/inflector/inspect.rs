//! Read-only access to hidden states for representation analyses.

use super::network::Model;
use super::vocab::BOS;
use super::InflectorError;
use crate::numerics::Tape;
use crate::phoneme::PhonemeSeq;

impl Model {
    /// Top encoder layer `[forward last; backward last]` hidden state,
    /// width `hidden_dim`.
    pub fn encoder_summary(&self, present: &PhonemeSeq) -> Result<Vec<f64>, InflectorError> {
        let src = self.vocab().encode(present)?;
        let mut tape = Tape::new(self.params());
        let enc = self.encode(&mut tape, &[src], &mut None)?;
        let (h, _) = *enc.summaries.last().expect("at least one encoder layer");
        Ok(tape.value(h).data().to_vec())
    }

    /// Teacher-force `past` and return, for each of its phonemes, the
    /// top-layer decoder hidden state right after that phoneme is consumed.
    pub fn decoder_states(&self, present: &PhonemeSeq, past: &PhonemeSeq) -> Result<Vec<(String, Vec<f64>)>, InflectorError> {
        let src = self.vocab().encode(present)?;
        let tgt = self.vocab().encode(past)?;
        let mut tape = Tape::new(self.params());
        let enc = self.encode(&mut tape, &[src], &mut None)?;
        let mut state = self.initial_state(&enc);
        let (_, next) = self.decode_step(&mut tape, &enc, &state, &[BOS], &mut None)?;
        state = next;
        let mut out = Vec::with_capacity(tgt.len());
        for (&id, token) in tgt.iter().zip(past.iter()) {
            let (_, next) = self.decode_step(&mut tape, &enc, &state, &[id], &mut None)?;
            state = next;
            out.push((token.to_string(), tape.value(state.top()).data().to_vec()));
        }
        Ok(out)
    }
}
