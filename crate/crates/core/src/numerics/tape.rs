//! Computation tape: records primitive operations during the forward pass and
//! replays their adjoints in reverse for `backward`.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order. Parameters are borrowed from a [`ParamStore`] and only
//! become tape nodes when first used.

use std::borrow::Cow;
use std::collections::HashMap;

use rand::Rng;

use super::tensor::{self, Tensor};
use super::{NumericsError, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Concat(Vec<NodeId>),
    Slice { x: NodeId, start: usize },
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    LogSoftmax(NodeId),
    Log(NodeId),
    Embedding { table: NodeId, ids: Vec<usize> },
    Dropout { x: NodeId, mask: Tensor },
    Pick { x: NodeId, cols: Vec<usize> },
    SumAll(NodeId),
    GatherRows { x: NodeId, rows: Vec<usize> },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Concat(_) => "concat",
            Op::Slice { .. } => "slice",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Softmax(_) => "softmax",
            Op::LogSoftmax(_) => "log_softmax",
            Op::Log(_) => "log",
            Op::Embedding { .. } => "embedding",
            Op::Dropout { .. } => "dropout",
            Op::Pick { .. } => "pick",
            Op::SumAll(_) => "sum",
            Op::GatherRows { .. } => "gather_rows",
        }
    }
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Reverse-mode tape over one forward pass.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node<'p>>,
    bound: HashMap<usize, NodeId>,
}

/// Gradients of a scalar loss with respect to every parameter in the store.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, param: usize) -> &Tensor {
        &self.grads[param]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.grads.iter()
    }

    pub fn into_vec(self) -> Vec<Tensor> {
        self.grads
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params, nodes: Vec::new(), bound: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<NodeId, NumericsError> {
        if !value.is_finite() {
            return Err(NumericsError::NonFinite(op.name().to_string()));
        }
        let needs_grad = match &op {
            Op::Constant => false,
            Op::Param => true,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) => {
                self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad
            }
            Op::Concat(parts) => parts.iter().any(|p| self.nodes[p.0].needs_grad),
            Op::Scale(x, _)
            | Op::Slice { x, .. }
            | Op::Tanh(x)
            | Op::Sigmoid(x)
            | Op::Softmax(x)
            | Op::LogSoftmax(x)
            | Op::Log(x)
            | Op::Dropout { x, .. }
            | Op::Pick { x, .. }
            | Op::SumAll(x)
            | Op::GatherRows { x, .. } => self.nodes[x.0].needs_grad,
            Op::Embedding { table, .. } => self.nodes[table.0].needs_grad,
        };
        self.nodes.push(Node { value: Cow::Owned(value), op, needs_grad });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<NodeId, NumericsError> {
        self.push(value, Op::Constant)
    }

    /// Tape node for parameter `index`, bound on first use.
    pub fn param(&mut self, index: usize) -> NodeId {
        if let Some(&id) = self.bound.get(&index) {
            return id;
        }
        let value = self.params.tensor(index);
        self.nodes.push(Node { value: Cow::Borrowed(value), op: Op::Param, needs_grad: true });
        let id = NodeId(self.nodes.len() - 1);
        self.bound.insert(index, id);
        id
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        self.push(v, Op::MatMul(a, b))
    }

    /// Elementwise sum with rank-2 broadcasting over unit axes.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let v = tensor::broadcast_zip(self.value(a), self.value(b), "add", |x, y| x + y)?;
        self.push(v, Op::Add(a, b))
    }

    /// Elementwise product with rank-2 broadcasting over unit axes.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let v = tensor::broadcast_zip(self.value(a), self.value(b), "mul", |x, y| x * y)?;
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> Result<NodeId, NumericsError> {
        let v = self.value(x).map(|v| v * factor);
        self.push(v, Op::Scale(x, factor))
    }

    /// Concatenate along the last axis.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, NumericsError> {
        if parts.is_empty() {
            return Err(NumericsError::Shape("concat of zero tensors".into()));
        }
        let vals: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = tensor::concat_cols(&vals)?;
        self.push(v, Op::Concat(parts.to_vec()))
    }

    /// Columns `start..end` of the last axis.
    pub fn slice(&mut self, x: NodeId, start: usize, end: usize) -> Result<NodeId, NumericsError> {
        let v = tensor::slice_cols(self.value(x), start, end)?;
        self.push(v, Op::Slice { x, start })
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let v = self.value(x).map(f64::tanh);
        self.push(v, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let v = self.value(x).map(sigmoid);
        self.push(v, Op::Sigmoid(x))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        self.value(x).check_rank2("softmax")?;
        let v = tensor::softmax_rows(self.value(x));
        self.push(v, Op::Softmax(x))
    }

    /// Log-softmax over the last axis, fused for stability.
    pub fn log_softmax(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        self.value(x).check_rank2("log_softmax")?;
        let v = tensor::log_softmax_rows(self.value(x));
        self.push(v, Op::LogSoftmax(x))
    }

    pub fn log(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let v = self.value(x).map(f64::ln);
        self.push(v, Op::Log(x))
    }

    /// Rows of `table` selected by `ids`.
    pub fn embedding(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId, NumericsError> {
        let t = self.value(table);
        t.check_rank2("embedding")?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= t.rows()) {
            return Err(NumericsError::Shape(format!(
                "embedding: id {bad} out of range for table with {} rows",
                t.rows()
            )));
        }
        let v = t.gather_rows(ids);
        self.push(v, Op::Embedding { table, ids: ids.to_vec() })
    }

    /// Multiply by a precomputed mask (already scaled for inverted dropout).
    pub fn apply_mask(&mut self, x: NodeId, mask: Tensor) -> Result<NodeId, NumericsError> {
        if mask.shape() != self.value(x).shape() {
            return Err(NumericsError::Shape(format!(
                "dropout mask {:?} vs input {:?}",
                mask.shape(),
                self.value(x).shape()
            )));
        }
        let mut v = self.value(x).clone();
        for (a, m) in v.data_mut().iter_mut().zip(mask.data()) {
            *a *= m;
        }
        self.push(v, Op::Dropout { x, mask })
    }

    /// Inverted dropout: zero each unit with probability `p`, scale survivors
    /// by `1/(1-p)`. A no-op when `p == 0`.
    pub fn dropout<R: Rng>(&mut self, x: NodeId, p: f64, rng: &mut R) -> Result<NodeId, NumericsError> {
        if p <= 0.0 {
            return Ok(x);
        }
        let shape = self.value(x).shape().to_vec();
        let keep = 1.0 / (1.0 - p);
        let data = (0..self.value(x).len())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let mask = Tensor::new(shape, data)?;
        self.apply_mask(x, mask)
    }

    /// `out[r] = x[r, cols[r]]`, shape `[rows, 1]`.
    pub fn pick(&mut self, x: NodeId, cols: &[usize]) -> Result<NodeId, NumericsError> {
        let t = self.value(x);
        t.check_rank2("pick")?;
        if cols.len() != t.rows() || cols.iter().any(|&c| c >= t.cols()) {
            return Err(NumericsError::Shape(format!(
                "pick: {} indices for {:?}",
                cols.len(),
                t.shape()
            )));
        }
        let data = cols.iter().enumerate().map(|(r, &c)| t.get(r, c)).collect();
        self.push(Tensor::column(data), Op::Pick { x, cols: cols.to_vec() })
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(x))
    }

    pub fn gather_rows(&mut self, x: NodeId, rows: &[usize]) -> Result<NodeId, NumericsError> {
        let t = self.value(x);
        if rows.iter().any(|&r| r >= t.rows()) {
            return Err(NumericsError::Shape(format!("gather_rows out of range for {:?}", t.shape())));
        }
        let v = t.gather_rows(rows);
        self.push(v, Op::GatherRows { x, rows: rows.to_vec() })
    }

    /// Reverse pass from a scalar `loss`. Parameters the loss does not reach
    /// get zero gradients.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, NumericsError> {
        if self.value(loss).len() != 1 {
            return Err(NumericsError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::new(self.value(loss).shape().to_vec(), vec![1.0])?);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            match &node.op {
                Op::Constant => {}
                Op::Param => {
                    adj[i] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    if self.nodes[a.0].needs_grad {
                        accumulate(&mut adj, *a, tensor::matmul_nt(&g, bv));
                    }
                    if self.nodes[b.0].needs_grad {
                        accumulate(&mut adj, *b, tensor::matmul_tn(av, &g));
                    }
                }
                Op::Add(a, b) => {
                    for x in [a, b] {
                        if self.nodes[x.0].needs_grad {
                            let v = self.value(*x);
                            accumulate(&mut adj, *x, tensor::reduce_to(&g, v.rows(), v.cols()));
                        }
                    }
                }
                Op::Mul(a, b) => {
                    for (x, other) in [(a, b), (b, a)] {
                        if self.nodes[x.0].needs_grad {
                            let v = self.value(*x);
                            let full = tensor::broadcast_zip(&g, self.value(*other), "mul", |d, o| d * o)?;
                            accumulate(&mut adj, *x, tensor::reduce_to(&full, v.rows(), v.cols()));
                        }
                    }
                }
                Op::Scale(x, f) => accumulate(&mut adj, *x, g.map(|d| d * f)),
                Op::Concat(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        if self.nodes[p.0].needs_grad {
                            accumulate(&mut adj, *p, tensor::slice_cols(&g, start, start + w)?);
                        }
                        start += w;
                    }
                }
                Op::Slice { x, start } => {
                    let xv = self.value(*x);
                    let mut full = Tensor::zeros(xv.rows(), xv.cols());
                    let (w, xc) = (g.cols(), xv.cols());
                    for r in 0..g.rows() {
                        full.data_mut()[r * xc + start..r * xc + start + w].copy_from_slice(g.row_slice(r));
                    }
                    accumulate(&mut adj, *x, full);
                }
                Op::Tanh(x) => {
                    let y = node.value.as_ref();
                    accumulate(&mut adj, *x, zip(&g, y, |d, y| d * (1.0 - y * y)));
                }
                Op::Sigmoid(x) => {
                    let y = node.value.as_ref();
                    accumulate(&mut adj, *x, zip(&g, y, |d, y| d * y * (1.0 - y)));
                }
                Op::Softmax(x) => {
                    let y = node.value.as_ref();
                    let c = y.cols();
                    let mut dx = Tensor::zeros(y.rows(), c);
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row_slice(r), g.row_slice(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            dx.data_mut()[r * c + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    accumulate(&mut adj, *x, dx);
                }
                Op::LogSoftmax(x) => {
                    let y = node.value.as_ref();
                    let c = y.cols();
                    let mut dx = Tensor::zeros(y.rows(), c);
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row_slice(r), g.row_slice(r));
                        let total: f64 = gr.iter().sum();
                        for j in 0..c {
                            dx.data_mut()[r * c + j] = gr[j] - yr[j].exp() * total;
                        }
                    }
                    accumulate(&mut adj, *x, dx);
                }
                Op::Log(x) => {
                    accumulate(&mut adj, *x, zip(&g, self.value(*x), |d, v| d / v));
                }
                Op::Embedding { table, ids } => {
                    let t = self.value(*table);
                    let c = t.cols();
                    let mut dt = Tensor::zeros(t.rows(), c);
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, d) in dt.data_mut()[id * c..(id + 1) * c].iter_mut().zip(g.row_slice(r)) {
                            *o += d;
                        }
                    }
                    accumulate(&mut adj, *table, dt);
                }
                Op::Dropout { x, mask } => accumulate(&mut adj, *x, zip(&g, mask, |d, m| d * m)),
                Op::Pick { x, cols } => {
                    let xv = self.value(*x);
                    let c = xv.cols();
                    let mut dx = Tensor::zeros(xv.rows(), c);
                    for (r, &col) in cols.iter().enumerate() {
                        dx.data_mut()[r * c + col] = g.data()[r];
                    }
                    accumulate(&mut adj, *x, dx);
                }
                Op::SumAll(x) => {
                    let xv = self.value(*x);
                    accumulate(&mut adj, *x, Tensor::filled(xv.rows(), xv.cols(), g.data()[0]));
                }
                Op::GatherRows { x, rows } => {
                    let xv = self.value(*x);
                    let c = xv.cols();
                    let mut dx = Tensor::zeros(xv.rows(), c);
                    for (r, &src) in rows.iter().enumerate() {
                        for (o, d) in dx.data_mut()[src * c..(src + 1) * c].iter_mut().zip(g.row_slice(r)) {
                            *o += d;
                        }
                    }
                    accumulate(&mut adj, *x, dx);
                }
            }
        }

        let mut grads: Vec<Tensor> = (0..self.params.len())
            .map(|i| {
                let t = self.params.tensor(i);
                Tensor::zeros(t.rows(), t.cols())
            })
            .collect();
        for (&param, &node) in &self.bound {
            if node.0 <= loss.0 {
                if let Some(g) = adj[node.0].take() {
                    grads[param] = g;
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(adj: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut adj[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
