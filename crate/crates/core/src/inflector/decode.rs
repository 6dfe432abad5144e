use std::cmp::Ordering;

use rand::Rng;

use super::network::{DecoderState, Encoded, Model};
use super::vocab::{Vocabulary, BOS, EOS};
use super::{BeamHypothesis, BeamResult, FormScore, InflectorError};
use crate::numerics::Tape;
use crate::phoneme::PhonemeSeq;

/// One ancestral sample. `truncated` marks a sample that hit the length cap
/// without emitting EOS.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sample {
    pub form: PhonemeSeq,
    pub truncated: bool,
}

fn encode_one<'p>(model: &'p Model, present: &PhonemeSeq) -> Result<(Tape<'p>, Encoded, usize), InflectorError> {
    let src = model.vocab().encode(present)?;
    let len = src.len();
    let mut tape = Tape::new(model.params());
    let enc = model.encode(&mut tape, &[src], &mut None)?;
    Ok((tape, enc, len))
}

#[derive(Debug, Clone)]
struct Candidate {
    ids: Vec<usize>,
    log_prob: f64,
    finished: bool,
    parent: usize,
}

/// Descending log-probability; ties go to the lexicographically smaller id
/// sequence, then to finished hypotheses.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.log_prob
        .partial_cmp(&a.log_prob)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.ids.cmp(&b.ids))
        .then_with(|| b.finished.cmp(&a.finished))
}

/// Length-unnormalised beam search with the default output cap.
pub fn beam_decode(model: &Model, present: &PhonemeSeq, width: usize) -> Result<BeamResult, InflectorError> {
    let cap = model.output_cap(present.len());
    beam_decode_capped(model, present, width, cap)
}

/// Beam search over outputs of at most `cap` phonemes. Finished hypotheses
/// compete with live ones for the `width` slots, so once every slot holds a
/// finished hypothesis no extension can displace one and the search stops.
pub fn beam_decode_capped(model: &Model, present: &PhonemeSeq, width: usize, cap: usize) -> Result<BeamResult, InflectorError> {
    if width == 0 {
        return Err(InflectorError::Config("beam width must be at least 1".into()));
    }
    let (mut tape, enc, _) = encode_one(model, present)?;
    let mut state = model.initial_state(&enc);
    let mut live = vec![Candidate { ids: Vec::new(), log_prob: 0.0, finished: false, parent: 0 }];
    let mut finished: Vec<Candidate> = Vec::new();
    let n_out = model.vocab().num_outputs();

    while !live.is_empty() {
        let prev: Vec<usize> = live.iter().map(|c| c.ids.last().copied().unwrap_or(BOS)).collect();
        let (logp, next) = model.decode_step(&mut tape, &enc, &state, &prev, &mut None)?;
        let lp = tape.value(logp).clone();
        let mut pool = std::mem::take(&mut finished);
        for (r, hyp) in live.iter().enumerate() {
            let row = lp.row_slice(r);
            pool.push(Candidate { ids: hyp.ids.clone(), log_prob: hyp.log_prob + row[0], finished: true, parent: r });
            if hyp.ids.len() < cap {
                for (class, &l) in row.iter().enumerate().take(n_out).skip(1) {
                    let mut ids = hyp.ids.clone();
                    ids.push(Vocabulary::id_of_class(class));
                    pool.push(Candidate { ids, log_prob: hyp.log_prob + l, finished: false, parent: r });
                }
            }
        }
        pool.sort_by(rank);
        pool.truncate(width);
        let (done, open): (Vec<_>, Vec<_>) = pool.into_iter().partition(|c| c.finished);
        finished = done;
        if open.is_empty() {
            break;
        }
        let parents: Vec<usize> = open.iter().map(|c| c.parent).collect();
        state = next.gather(&mut tape, &parents)?;
        live = open;
    }

    finished.sort_by(rank);
    let hypotheses = finished
        .into_iter()
        .map(|c| BeamHypothesis { form: model.vocab().decode(&c.ids), log_prob: c.log_prob, terminated: true })
        .collect();
    Ok(BeamResult { hypotheses })
}

pub fn greedy_decode(model: &Model, present: &PhonemeSeq) -> Result<BeamHypothesis, InflectorError> {
    let beam = beam_decode(model, present, 1)?;
    Ok(beam.hypotheses.into_iter().next().expect("width-1 beam always closes one hypothesis"))
}

/// Probability of the model producing exactly `candidate` (then EOS) for
/// `present`, via teacher forcing.
pub fn force_score(model: &Model, present: &PhonemeSeq, candidate: &PhonemeSeq) -> Result<FormScore, InflectorError> {
    let tgt = model.vocab().encode(candidate)?;
    let (mut tape, enc, _) = encode_one(model, present)?;
    let mut state: DecoderState = model.initial_state(&enc);
    let mut prev = BOS;
    let mut total = 0.0;
    for t in 0..=tgt.len() {
        let (logp, next) = model.decode_step(&mut tape, &enc, &state, &[prev], &mut None)?;
        let id = tgt.get(t).copied().unwrap_or(EOS);
        total += tape.value(logp).get(0, Vocabulary::class_of(id));
        state = next;
        prev = id;
    }
    Ok(FormScore { form: candidate.clone(), log_prob: total })
}

/// Draw `n` independent samples, decoded together as rows of one batch.
/// The cap admits forms of up to `output_cap` phonemes; a sample that draws
/// anything but EOS after reaching the cap is closed and flagged truncated.
pub fn sample_forms<R: Rng>(model: &Model, present: &PhonemeSeq, n: usize, rng: &mut R) -> Result<Vec<Sample>, InflectorError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let (mut tape, enc, len) = encode_one(model, present)?;
    let cap = model.output_cap(len);
    let mut state = model.initial_state(&enc).gather(&mut tape, &vec![0; n])?;
    let mut seqs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut done: Vec<Option<bool>> = vec![None; n];
    let mut active: Vec<usize> = (0..n).collect();

    while !active.is_empty() {
        let prev: Vec<usize> = active.iter().map(|&i| seqs[i].last().copied().unwrap_or(BOS)).collect();
        let (logp, next) = model.decode_step(&mut tape, &enc, &state, &prev, &mut None)?;
        let lp = tape.value(logp);
        let mut keep_rows = Vec::with_capacity(active.len());
        let mut still = Vec::with_capacity(active.len());
        for (r, &i) in active.iter().enumerate() {
            let class = draw(lp.row_slice(r), rng.gen::<f64>());
            if class == 0 {
                done[i] = Some(false);
            } else if seqs[i].len() == cap {
                done[i] = Some(true);
            } else {
                seqs[i].push(Vocabulary::id_of_class(class));
                keep_rows.push(r);
                still.push(i);
            }
        }
        if still.is_empty() {
            break;
        }
        state = next.gather(&mut tape, &keep_rows)?;
        active = still;
    }

    Ok(seqs
        .into_iter()
        .zip(done)
        .map(|(ids, d)| Sample { form: model.vocab().decode(&ids), truncated: d.unwrap_or(true) })
        .collect())
}

pub fn sample_form<R: Rng>(model: &Model, present: &PhonemeSeq, rng: &mut R) -> Result<Sample, InflectorError> {
    Ok(sample_forms(model, present, 1, rng)?.remove(0))
}

/// Inverse-CDF draw from a row of log-probabilities.
fn draw(log_probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (k, &l) in log_probs.iter().enumerate() {
        let p = l.exp();
        if p > 0.0 {
            last_nonzero = k;
        }
        acc += p;
        if u < acc {
            return k;
        }
    }
    last_nonzero
}
