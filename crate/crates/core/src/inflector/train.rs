use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::decode::beam_decode;
use super::network::Model;
use super::InflectorError;
use crate::datastore::{VerbClass, VerbEntry};
use crate::numerics::rng::{self, Stream};
use crate::numerics::{Adadelta, Tape};
use crate::phoneme::PhonemeSeq;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// 1-based index of the epoch just completed.
    pub epoch: usize,
    /// Total NLL over the epoch divided by the number of predicted symbols.
    pub loss_per_symbol: f64,
    /// Per-symbol NLL of the first batch, measured before its update.
    pub first_batch_loss: f64,
    pub batches: usize,
    pub items: usize,
}

/// Owns a model and its optimizer state for the duration of training.
///
/// Shuffling and dropout draw from per-epoch substreams of the model seed, so
/// epoch `e` sees the same order and masks however training got there.
#[derive(Debug)]
pub struct Trainer {
    model: Model,
    opt: Adadelta,
}

impl Trainer {
    pub fn new(model: Model) -> Self {
        let opt = Adadelta::new(model.params(), model.hparams().adadelta());
        Self { model, opt }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    /// One pass over `stream` (already expanded by frequency multiplicity).
    pub fn train_epoch(&mut self, stream: &[VerbEntry]) -> Result<EpochStats, InflectorError> {
        if stream.is_empty() {
            return Err(InflectorError::EmptyCorpus);
        }
        let vocab = self.model.vocab();
        let pairs: Vec<(Vec<usize>, Vec<usize>)> = stream
            .iter()
            .map(|e| Ok((vocab.encode(&e.present)?, vocab.encode(&e.past)?)))
            .collect::<Result<_, InflectorError>>()?;

        let epoch = self.model.epochs_completed as u64;
        let seed = self.model.seed();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut rng::substream(seed, Stream::Shuffle, epoch));
        let mut dropout_rng = rng::substream(seed, Stream::Dropout, epoch);
        let p = self.model.hparams().dropout_p;
        let batch_size = self.model.hparams().batch_size;

        let (mut total, mut symbols, mut first, mut batches) = (0.0, 0usize, f64::NAN, 0);
        for chunk in order.chunks(batch_size) {
            let sources: Vec<Vec<usize>> = chunk.iter().map(|&i| pairs[i].0.clone()).collect();
            let targets: Vec<Vec<usize>> = chunk.iter().map(|&i| pairs[i].1.clone()).collect();
            let (nll, n, grads) = {
                let mut tape = Tape::new(self.model.params());
                let mut ctx = Some((p, &mut dropout_rng));
                let (loss, n) = self.model.batch_loss(&mut tape, &sources, &targets, &mut ctx)?;
                let nll = tape.value(loss).item()? * chunk.len() as f64;
                (nll, n, tape.backward(loss)?.into_vec())
            };
            self.opt.step(self.model.params_mut(), &grads)?;
            if batches == 0 {
                first = nll / n as f64;
            }
            total += nll;
            symbols += n;
            batches += 1;
        }
        self.model.epochs_completed += 1;
        Ok(EpochStats {
            epoch: self.model.epochs_completed,
            loss_per_symbol: total / symbols as f64,
            first_batch_loss: first,
            batches,
            items: pairs.len(),
        })
    }
}

/// Percent of entries whose top beam output equals the gold past tense.
/// Class-specific fields are `None` when the corpus has no entry of that class.
#[derive(Debug, Clone, PartialEq)]
pub struct Accuracy {
    pub overall: f64,
    pub regular: Option<f64>,
    pub irregular: Option<f64>,
    pub n_regular: usize,
    pub n_irregular: usize,
}

impl Accuracy {
    fn from_hits(hits: &[(VerbClass, bool)]) -> Self {
        let pct = |class: Option<VerbClass>| {
            let sel: Vec<bool> = hits.iter().filter(|(c, _)| class.is_none_or(|k| *c == k)).map(|&(_, h)| h).collect();
            (!sel.is_empty()).then(|| 100.0 * sel.iter().filter(|&&h| h).count() as f64 / sel.len() as f64)
        };
        let count = |k: VerbClass| hits.iter().filter(|(c, _)| *c == k).count();
        Self {
            overall: pct(None).unwrap_or(f64::NAN),
            regular: pct(Some(VerbClass::Regular)),
            irregular: pct(Some(VerbClass::Irregular)),
            n_regular: count(VerbClass::Regular),
            n_irregular: count(VerbClass::Irregular),
        }
    }
}

/// Training accuracy with beams of `width`. Each distinct present form is
/// decoded once.
pub fn training_accuracy(model: &Model, corpus: &[VerbEntry], width: usize) -> Result<Accuracy, InflectorError> {
    if corpus.is_empty() {
        return Err(InflectorError::EmptyCorpus);
    }
    let mut presents: Vec<&PhonemeSeq> = corpus.iter().map(|e| &e.present).collect();
    presents.sort();
    presents.dedup();
    let tops: HashMap<&PhonemeSeq, Option<PhonemeSeq>> = presents
        .par_iter()
        .map(|&p| Ok((p, beam_decode(model, p, width)?.top().map(|h| h.form.clone()))))
        .collect::<Result<_, InflectorError>>()?;
    let hits: Vec<(VerbClass, bool)> =
        corpus.iter().map(|e| (e.class, tops[&e.present].as_ref() == Some(&e.past))).collect();
    Ok(Accuracy::from_hits(&hits))
}

/// Best accuracy any deterministic present→past function could reach:
/// homophonous presents with different pasts cannot all be right.
pub fn oracle_accuracy(corpus: &[VerbEntry]) -> Accuracy {
    let mut groups: HashMap<&PhonemeSeq, Vec<&VerbEntry>> = HashMap::new();
    for e in corpus {
        groups.entry(&e.present).or_default().push(e);
    }
    let mut best: HashMap<&PhonemeSeq, &PhonemeSeq> = HashMap::new();
    for (present, entries) in &groups {
        let mut counts: Vec<(&PhonemeSeq, usize)> = Vec::new();
        for e in entries {
            match counts.iter_mut().find(|(p, _)| *p == &e.past) {
                Some(slot) => slot.1 += 1,
                None => counts.push((&e.past, 1)),
            }
        }
        // Most frequent past; ties to the smallest form so the result is order-free.
        counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        best.insert(present, counts[0].0);
    }
    let hits: Vec<(VerbClass, bool)> = corpus.iter().map(|e| (e.class, best[&e.present] == &e.past)).collect();
    Accuracy::from_hits(&hits)
}
