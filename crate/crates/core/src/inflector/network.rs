use rand::Rng;

use super::vocab::{Vocabulary, BOS, EOS, PAD};
use super::{HyperParams, InflectorError};
use crate::numerics::rng::{self, Stream};
use crate::numerics::{Gradients, NodeId, NumericsError, ParamStore, Tape, Tensor};

pub const ENCODER_DIRECTIONS: usize = 2;

/// Additive offset for padded attention positions; exp() of it underflows to 0.
const MASKED: f64 = -1e30;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Lstm {
    w: usize,
    b: usize,
    hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    enc_embed: usize,
    /// Per layer: forward and backward cells.
    enc: Vec<[Lstm; 2]>,
    dec_embed: usize,
    dec: Vec<Lstm>,
    att_enc: usize,
    att_dec: usize,
    att_bias: usize,
    att_v: usize,
    out_w: usize,
    out_b: usize,
}

/// Parameter names and shapes in registration order.
pub(crate) type ParamSpec = Vec<(String, usize, usize)>;

struct Registrar {
    specs: ParamSpec,
}

impl Registrar {
    fn param(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> usize {
        self.specs.push((name.into(), rows, cols));
        self.specs.len() - 1
    }

    fn lstm(&mut self, name: &str, input: usize, hidden: usize) -> Lstm {
        Lstm {
            w: self.param(format!("{name}.w"), input + hidden, 4 * hidden),
            b: self.param(format!("{name}.b"), 1, 4 * hidden),
            hidden,
        }
    }
}

fn build_layout(hp: &HyperParams, vocab: &Vocabulary) -> (Layout, ParamSpec) {
    let (e, h) = (hp.embed_dim, hp.hidden_dim);
    let half = h / ENCODER_DIRECTIONS;
    let mut r = Registrar { specs: Vec::new() };
    let enc_embed = r.param("enc.embed", vocab.len(), e);
    let enc = (0..hp.encoder_layers)
        .map(|l| {
            let input = if l == 0 { e } else { h };
            [r.lstm(&format!("enc.l{l}.fwd"), input, half), r.lstm(&format!("enc.l{l}.bwd"), input, half)]
        })
        .collect();
    let dec_embed = r.param("dec.embed", vocab.len(), e);
    let dec = (0..hp.decoder_layers)
        .map(|l| {
            // Layer 0 reads [embedding; attention context].
            let input = if l == 0 { e + h } else { h };
            r.lstm(&format!("dec.l{l}"), input, h)
        })
        .collect();
    let att_enc = r.param("att.w_enc", h, h);
    let att_dec = r.param("att.w_dec", h, h);
    let att_bias = r.param("att.b", 1, h);
    let att_v = r.param("att.v", h, 1);
    let out_w = r.param("out.w", 2 * h, vocab.num_outputs());
    let out_b = r.param("out.b", 1, vocab.num_outputs());
    let layout = Layout { enc_embed, enc, dec_embed, dec, att_enc, att_dec, att_bias, att_v, out_w, out_b };
    (layout, r.specs)
}

/// A trained or freshly initialised inflection model.
#[derive(Debug, Clone)]
pub struct Model {
    vocab: Vocabulary,
    hp: HyperParams,
    params: ParamStore,
    layout: Layout,
    pub epochs_completed: usize,
}

/// Encoder output for a batch, living on a tape.
pub(crate) struct Encoded {
    /// Top-layer state per timestep, `[B, H]`.
    pub states: Vec<NodeId>,
    /// `states[t]·W_enc + b`, `[B, H]`.
    keys: Vec<NodeId>,
    /// `[B, T]`, 0 for real positions and a large negative offset for padding.
    mask_bias: NodeId,
    /// Per layer: `[fwd_last; bwd_last]` hidden and cell states, `[B, H]`.
    pub summaries: Vec<(NodeId, NodeId)>,
}

/// Per-layer `(h, c)` decoder states, each `[R, H]`.
#[derive(Clone)]
pub(crate) struct DecoderState {
    pub layers: Vec<(NodeId, NodeId)>,
}

impl DecoderState {
    pub fn gather(&self, tape: &mut Tape, rows: &[usize]) -> Result<Self, NumericsError> {
        let layers = self
            .layers
            .iter()
            .map(|&(h, c)| Ok((tape.gather_rows(h, rows)?, tape.gather_rows(c, rows)?)))
            .collect::<Result<_, NumericsError>>()?;
        Ok(Self { layers })
    }

    pub fn top(&self) -> NodeId {
        self.layers.last().expect("at least one layer").0
    }
}

/// Dropout settings for one forward pass; `None` means inference.
pub(crate) type DropoutCtx<'a> = Option<(f64, &'a mut rng::Rng)>;

fn maybe_dropout(tape: &mut Tape, x: NodeId, ctx: &mut DropoutCtx) -> Result<NodeId, NumericsError> {
    match ctx {
        Some((p, rng)) if *p > 0.0 => tape.dropout(x, *p, *rng),
        _ => Ok(x),
    }
}

fn lstm_cell(tape: &mut Tape, cell: &Lstm, x: NodeId, h: NodeId, c: NodeId) -> Result<(NodeId, NodeId), NumericsError> {
    let n = cell.hidden;
    let xh = tape.concat(&[x, h])?;
    let w = tape.param(cell.w);
    let b = tape.param(cell.b);
    let z = tape.matmul(xh, w)?;
    let z = tape.add(z, b)?;
    let i = tape.slice(z, 0, n)?;
    let i = tape.sigmoid(i)?;
    let f = tape.slice(z, n, 2 * n)?;
    let f = tape.sigmoid(f)?;
    let g = tape.slice(z, 2 * n, 3 * n)?;
    let g = tape.tanh(g)?;
    let o = tape.slice(z, 3 * n, 4 * n)?;
    let o = tape.sigmoid(o)?;
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c2 = tape.add(fc, ig)?;
    let tc = tape.tanh(c2)?;
    let h2 = tape.mul(o, tc)?;
    Ok((h2, c2))
}

/// `keep·new + (1-keep)·old` with constant row masks.
fn masked_update(tape: &mut Tape, new: NodeId, old: NodeId, keep: NodeId, drop: NodeId) -> Result<NodeId, NumericsError> {
    let a = tape.mul(new, keep)?;
    let b = tape.mul(old, drop)?;
    tape.add(a, b)
}

impl Model {
    /// Fresh model with every parameter uniform in `(-init_range, init_range)`,
    /// drawn from the seed's init stream.
    pub fn new(vocab: Vocabulary, hp: HyperParams) -> Result<Self, InflectorError> {
        hp.validate()?;
        if vocab.is_empty() {
            return Err(InflectorError::Config("vocabulary has no phonemes".into()));
        }
        let (layout, specs) = build_layout(&hp, &vocab);
        let mut rng = rng::stream(hp.seed, Stream::Init);
        let range = hp.init_range;
        let mut params = ParamStore::default();
        for (name, r, c) in specs {
            let data = (0..r * c)
                .map(|_| if range > 0.0 { rng.gen_range(-range..range) } else { 0.0 })
                .collect();
            params.push(name, Tensor::matrix(r, c, data)?);
        }
        Ok(Self { vocab, hp, params, layout, epochs_completed: 0 })
    }

    /// Assemble a model from stored parameters, checking names and shapes
    /// against the layout implied by `hp` and `vocab`.
    pub fn from_parts(vocab: Vocabulary, hp: HyperParams, params: ParamStore, epochs_completed: usize) -> Result<Self, InflectorError> {
        hp.validate()?;
        let (layout, specs) = build_layout(&hp, &vocab);
        if specs.len() != params.len() {
            return Err(InflectorError::Config(format!(
                "expected {} parameter tensors, found {}",
                specs.len(),
                params.len()
            )));
        }
        for (i, (name, r, c)) in specs.iter().enumerate() {
            let t = params.tensor(i);
            if params.name(i) != name || t.shape() != [*r, *c] {
                return Err(InflectorError::Config(format!(
                    "parameter {i}: expected {name} {:?}, found {} {:?}",
                    [r, c],
                    params.name(i),
                    t.shape()
                )));
            }
        }
        Ok(Self { vocab, hp, params, layout, epochs_completed })
    }

    /// Parameter names and shapes this configuration requires.
    pub fn param_spec(hp: &HyperParams, vocab: &Vocabulary) -> Vec<(String, usize, usize)> {
        build_layout(hp, vocab).1
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn hparams(&self) -> &HyperParams {
        &self.hp
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn seed(&self) -> u64 {
        self.hp.seed
    }

    pub fn checksum(&self) -> u64 {
        self.params.checksum()
    }

    /// Round every parameter through `f32`, matching checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for i in 0..self.params.len() {
            self.params.tensor_mut(i).round_to_f32();
        }
    }

    pub fn output_cap(&self, input_len: usize) -> usize {
        input_len + self.hp.max_extra_len
    }

    // -----------------------------------------------------------------------
    // Forward pieces
    // -----------------------------------------------------------------------

    /// Run the bidirectional encoder over a batch of phoneme-id sequences
    /// (right-padded internally).
    pub(crate) fn encode(&self, tape: &mut Tape, batch: &[Vec<usize>], dropout: &mut DropoutCtx) -> Result<Encoded, NumericsError> {
        let b = batch.len();
        let t_max = batch.iter().map(Vec::len).max().unwrap_or(0);
        if b == 0 || t_max == 0 {
            return Err(NumericsError::Contract("encode needs at least one non-empty input".into()));
        }
        let lens: Vec<usize> = batch.iter().map(Vec::len).collect();
        let mut keep = Vec::with_capacity(t_max);
        let mut drop = Vec::with_capacity(t_max);
        for t in 0..t_max {
            let k: Vec<f64> = lens.iter().map(|&l| if t < l { 1.0 } else { 0.0 }).collect();
            let d: Vec<f64> = k.iter().map(|v| 1.0 - v).collect();
            keep.push(tape.constant(Tensor::column(k))?);
            drop.push(tape.constant(Tensor::column(d))?);
        }

        let table = tape.param(self.layout.enc_embed);
        let mut inputs = Vec::with_capacity(t_max);
        for t in 0..t_max {
            let ids: Vec<usize> = batch.iter().map(|s| s.get(t).copied().unwrap_or(PAD)).collect();
            let x = tape.embedding(table, &ids)?;
            inputs.push(maybe_dropout(tape, x, dropout)?);
        }

        let mut summaries = Vec::with_capacity(self.layout.enc.len());
        let n_layers = self.layout.enc.len();
        for (l, cells) in self.layout.enc.iter().enumerate() {
            let half = cells[0].hidden;
            let zero = tape.constant(Tensor::zeros(b, half))?;
            let mut fwd = vec![zero; t_max];
            let (mut h, mut c) = (zero, zero);
            for t in 0..t_max {
                let (h2, c2) = lstm_cell(tape, &cells[0], inputs[t], h, c)?;
                h = masked_update(tape, h2, h, keep[t], drop[t])?;
                c = masked_update(tape, c2, c, keep[t], drop[t])?;
                fwd[t] = h;
            }
            let (fh, fc) = (h, c);
            let mut bwd = vec![zero; t_max];
            let (mut h, mut c) = (zero, zero);
            for t in (0..t_max).rev() {
                let (h2, c2) = lstm_cell(tape, &cells[1], inputs[t], h, c)?;
                h = masked_update(tape, h2, h, keep[t], drop[t])?;
                c = masked_update(tape, c2, c, keep[t], drop[t])?;
                bwd[t] = h;
            }
            let sh = tape.concat(&[fh, h])?;
            let sc = tape.concat(&[fc, c])?;
            summaries.push((sh, sc));
            let mut outputs = Vec::with_capacity(t_max);
            for t in 0..t_max {
                let o = tape.concat(&[fwd[t], bwd[t]])?;
                outputs.push(if l + 1 < n_layers { maybe_dropout(tape, o, dropout)? } else { o });
            }
            inputs = outputs;
        }

        let w_enc = tape.param(self.layout.att_enc);
        let bias = tape.param(self.layout.att_bias);
        let mut keys = Vec::with_capacity(t_max);
        for &s in &inputs {
            let k = tape.matmul(s, w_enc)?;
            keys.push(tape.add(k, bias)?);
        }
        let mut mask = Vec::with_capacity(b * t_max);
        for &l in &lens {
            mask.extend((0..t_max).map(|t| if t < l { 0.0 } else { MASKED }));
        }
        let mask_bias = tape.constant(Tensor::matrix(b, t_max, mask)?)?;
        Ok(Encoded { states: inputs, keys, mask_bias, summaries })
    }

    pub(crate) fn initial_state(&self, enc: &Encoded) -> DecoderState {
        DecoderState { layers: enc.summaries.clone() }
    }

    /// One decoder step for `R` rows. `enc` has either `R` rows or one row
    /// shared by all. Returns output log-probabilities `[R, V_out]`.
    pub(crate) fn decode_step(
        &self,
        tape: &mut Tape,
        enc: &Encoded,
        state: &DecoderState,
        prev: &[usize],
        dropout: &mut DropoutCtx,
    ) -> Result<(NodeId, DecoderState), NumericsError> {
        // Additive attention, queried with the previous top-layer state.
        let w_dec = tape.param(self.layout.att_dec);
        let v = tape.param(self.layout.att_v);
        let q = tape.matmul(state.top(), w_dec)?;
        let mut scores = Vec::with_capacity(enc.keys.len());
        for &k in &enc.keys {
            let e = tape.add(k, q)?;
            let e = tape.tanh(e)?;
            scores.push(tape.matmul(e, v)?);
        }
        let scores = tape.concat(&scores)?;
        let scores = tape.add(scores, enc.mask_bias)?;
        let alpha = tape.softmax(scores)?;
        let mut ctx = None;
        for (t, &s) in enc.states.iter().enumerate() {
            let a = tape.slice(alpha, t, t + 1)?;
            let term = tape.mul(a, s)?;
            ctx = Some(match ctx {
                None => term,
                Some(acc) => tape.add(acc, term)?,
            });
        }
        let ctx = ctx.expect("non-empty encoder");

        let table = tape.param(self.layout.dec_embed);
        let emb = tape.embedding(table, prev)?;
        let emb = maybe_dropout(tape, emb, dropout)?;
        let mut x = tape.concat(&[emb, ctx])?;
        let mut layers = Vec::with_capacity(self.layout.dec.len());
        for (l, cell) in self.layout.dec.iter().enumerate() {
            let (h, c) = state.layers[l];
            let (h2, c2) = lstm_cell(tape, cell, x, h, c)?;
            layers.push((h2, c2));
            x = if l + 1 < self.layout.dec.len() { maybe_dropout(tape, h2, dropout)? } else { h2 };
        }
        let out_in = tape.concat(&[x, ctx])?;
        let w = tape.param(self.layout.out_w);
        let b = tape.param(self.layout.out_b);
        let logits = tape.matmul(out_in, w)?;
        let logits = tape.add(logits, b)?;
        let logp = tape.log_softmax(logits)?;
        Ok((logp, DecoderState { layers }))
    }

    /// Teacher-forced summed negative log-likelihood of `targets` (EOS is
    /// appended) divided by the batch size. Also returns the number of
    /// predicted symbols.
    pub(crate) fn batch_loss(
        &self,
        tape: &mut Tape,
        sources: &[Vec<usize>],
        targets: &[Vec<usize>],
        dropout: &mut DropoutCtx,
    ) -> Result<(NodeId, usize), NumericsError> {
        let b = sources.len();
        let enc = self.encode(tape, sources, dropout)?;
        let mut state = self.initial_state(&enc);
        let steps = targets.iter().map(|t| t.len() + 1).max().unwrap_or(1);
        let mut prev = vec![BOS; b];
        let mut total: Option<NodeId> = None;
        let mut n_symbols = 0;
        for t in 0..steps {
            let (logp, next) = self.decode_step(tape, &enc, &state, &prev, dropout)?;
            state = next;
            let mut classes = Vec::with_capacity(b);
            let mut weights = Vec::with_capacity(b);
            for (r, tgt) in targets.iter().enumerate() {
                let id = match t.cmp(&tgt.len()) {
                    std::cmp::Ordering::Less => tgt[t],
                    std::cmp::Ordering::Equal => EOS,
                    std::cmp::Ordering::Greater => PAD,
                };
                if id == PAD {
                    classes.push(0);
                    weights.push(0.0);
                } else {
                    classes.push(Vocabulary::class_of(id));
                    weights.push(1.0);
                    n_symbols += 1;
                }
                prev[r] = if id == PAD { EOS } else { id };
            }
            let picked = tape.pick(logp, &classes)?;
            let w = tape.constant(Tensor::column(weights))?;
            let picked = tape.mul(picked, w)?;
            let s = tape.sum(picked)?;
            total = Some(match total {
                None => s,
                Some(acc) => tape.add(acc, s)?,
            });
        }
        let loss = tape.scale(total.expect("at least one step"), -1.0 / b as f64)?;
        Ok((loss, n_symbols))
    }

    /// Batch loss (summed NLL over the batch divided by its size) for id
    /// sequences, without gradients. `dropout` enables train-time masks.
    pub fn loss(&self, sources: &[Vec<usize>], targets: &[Vec<usize>], dropout: Option<(f64, &mut rng::Rng)>) -> Result<f64, InflectorError> {
        let mut tape = Tape::new(&self.params);
        let mut ctx = dropout;
        let (loss, _) = self.batch_loss(&mut tape, sources, targets, &mut ctx)?;
        Ok(tape.value(loss).item()?)
    }

    /// Batch loss and its gradient with respect to every parameter, in
    /// parameter order.
    pub fn loss_and_gradients(
        &self,
        sources: &[Vec<usize>],
        targets: &[Vec<usize>],
        dropout: Option<(f64, &mut rng::Rng)>,
    ) -> Result<(f64, Gradients), InflectorError> {
        let mut tape = Tape::new(&self.params);
        let mut ctx = dropout;
        let (loss, _) = self.batch_loss(&mut tape, sources, targets, &mut ctx)?;
        Ok((tape.value(loss).item()?, tape.backward(loss)?))
    }
}
