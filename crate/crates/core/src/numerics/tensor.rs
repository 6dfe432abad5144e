//! Dense row-major `f64` tensors and the raw kernels the tape is built from.
//!
//! Everything the model needs is rank 2 (`[rows, cols]`); a scalar is `[1, 1]`.

use super::NumericsError;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NumericsError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NumericsError::Shape(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { shape: vec![rows, cols], data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { shape: vec![rows, cols], data: vec![value; rows * cols] }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: vec![1, 1], data: vec![value] }
    }

    pub fn row(values: Vec<f64>) -> Self {
        Self { shape: vec![1, values.len()], data: values }
    }

    pub fn column(values: Vec<f64>) -> Self {
        Self { shape: vec![values.len(), 1], data: values }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> Result<f64, NumericsError> {
        if self.data.len() != 1 {
            return Err(NumericsError::Contract(format!(
                "item() on tensor of shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub(crate) fn check_rank2(&self, what: &str) -> Result<(), NumericsError> {
        if self.shape.len() != 2 {
            return Err(NumericsError::Shape(format!(
                "{what}: expected rank-2 tensor, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Rows selected (and possibly repeated) by index.
    pub fn gather_rows(&self, idx: &[usize]) -> Self {
        let c = self.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &r in idx {
            data.extend_from_slice(self.row_slice(r));
        }
        Self { shape: vec![idx.len(), c], data }
    }

    /// Round every value through `f32`.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// `a[m,k] · b[k,n]`
pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, NumericsError> {
    a.check_rank2("matmul")?;
    b.check_rank2("matmul")?;
    let (m, k) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    if k != k2 {
        return Err(NumericsError::Shape(format!(
            "matmul: [{m},{k}] x [{k2},{n}]"
        )));
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a.data[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(Tensor { shape: vec![m, n], data: out })
}

/// `a[m,n] · b[k,n]ᵀ`
pub(crate) fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, n) = (a.rows(), a.cols());
    let k = b.rows();
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let arow = &a.data[i * n..(i + 1) * n];
        for j in 0..k {
            let brow = &b.data[j * n..(j + 1) * n];
            out[i * k + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    Tensor { shape: vec![m, k], data: out }
}

/// `a[m,k]ᵀ · b[m,n]`
pub(crate) fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let n = b.cols();
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let arow = &a.data[i * k..(i + 1) * k];
        let brow = &b.data[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor { shape: vec![k, n], data: out }
}

/// Output shape of a two-operand rank-2 broadcast, where each axis either
/// matches or is 1 on one side.
pub(crate) fn broadcast_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<(usize, usize), NumericsError> {
    a.check_rank2(what)?;
    b.check_rank2(what)?;
    let axis = |x: usize, y: usize| -> Option<usize> {
        if x == y {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else if y == 1 {
            Some(x)
        } else {
            None
        }
    };
    match (axis(a.rows(), b.rows()), axis(a.cols(), b.cols())) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(NumericsError::Shape(format!(
            "{what}: cannot broadcast {:?} with {:?}",
            a.shape, b.shape
        ))),
    }
}

pub(crate) fn broadcast_zip(
    a: &Tensor,
    b: &Tensor,
    what: &str,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor, NumericsError> {
    let (r, c) = broadcast_shape(a, b, what)?;
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut data = Vec::with_capacity(r * c);
    for i in 0..r {
        let ai = if ar == 1 { 0 } else { i };
        let bi = if br == 1 { 0 } else { i };
        for j in 0..c {
            let aj = if ac == 1 { 0 } else { j };
            let bj = if bc == 1 { 0 } else { j };
            data.push(f(a.data[ai * ac + aj], b.data[bi * bc + bj]));
        }
    }
    Ok(Tensor { shape: vec![r, c], data })
}

/// Sum a broadcast result's gradient back down to an operand's shape.
pub(crate) fn reduce_to(grad: &Tensor, rows: usize, cols: usize) -> Tensor {
    if grad.rows() == rows && grad.cols() == cols {
        return grad.clone();
    }
    let mut out = Tensor::zeros(rows, cols);
    let gc = grad.cols();
    for i in 0..grad.rows() {
        let oi = if rows == 1 { 0 } else { i };
        for j in 0..gc {
            let oj = if cols == 1 { 0 } else { j };
            out.data[oi * cols + oj] += grad.data[i * gc + j];
        }
    }
    out
}

pub(crate) fn softmax_rows(x: &Tensor) -> Tensor {
    let c = x.cols();
    let mut data = x.data.clone();
    for row in data.chunks_mut(c) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Tensor { shape: x.shape.clone(), data }
}

pub(crate) fn log_softmax_rows(x: &Tensor) -> Tensor {
    let c = x.cols();
    let mut data = x.data.clone();
    for row in data.chunks_mut(c) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    Tensor { shape: x.shape.clone(), data }
}

pub(crate) fn concat_cols(parts: &[&Tensor]) -> Result<Tensor, NumericsError> {
    let rows = parts[0].rows();
    for p in parts {
        p.check_rank2("concat")?;
        if p.rows() != rows {
            return Err(NumericsError::Shape(format!(
                "concat: row counts differ ({} vs {})",
                rows,
                p.rows()
            )));
        }
    }
    let total: usize = parts.iter().map(|p| p.cols()).sum();
    let mut data = Vec::with_capacity(rows * total);
    for r in 0..rows {
        for p in parts {
            data.extend_from_slice(p.row_slice(r));
        }
    }
    Ok(Tensor { shape: vec![rows, total], data })
}

pub(crate) fn slice_cols(x: &Tensor, start: usize, end: usize) -> Result<Tensor, NumericsError> {
    x.check_rank2("slice")?;
    if start >= end || end > x.cols() {
        return Err(NumericsError::Shape(format!(
            "slice: columns {start}..{end} of {:?}",
            x.shape
        )));
    }
    let mut data = Vec::with_capacity(x.rows() * (end - start));
    for r in 0..x.rows() {
        data.extend_from_slice(&x.row_slice(r)[start..end]);
    }
    Ok(Tensor { shape: vec![x.rows(), end - start], data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_buffer() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn identity_matmul() {
        let a = Tensor::matrix(3, 3, (1..=9).map(|v| v as f64 * 0.7 - 2.0).collect()).unwrap();
        let out = matmul(&Tensor::identity(3), &a).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn transposed_kernels_agree_with_plain_matmul() {
        let a = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 4.0]).unwrap();
        let b = Tensor::matrix(4, 3, (0..12).map(|v| v as f64 - 5.0).collect()).unwrap();
        let mut bt = Tensor::zeros(3, 4);
        for i in 0..4 {
            for j in 0..3 {
                bt.data[j * 4 + i] = b.get(i, j);
            }
        }
        assert_eq!(matmul_nt(&a, &b), matmul(&a, &bt).unwrap());
        let c = Tensor::matrix(2, 4, (0..8).map(|v| v as f64 * 0.25).collect()).unwrap();
        let mut at = Tensor::zeros(3, 2);
        for i in 0..2 {
            for j in 0..3 {
                at.data[j * 2 + i] = a.get(i, j);
            }
        }
        assert_eq!(matmul_tn(&a, &c), matmul(&at, &c).unwrap());
    }

    #[test]
    fn broadcast_rejects_incompatible_shapes() {
        let a = Tensor::zeros(2, 3);
        let b = Tensor::zeros(3, 3);
        assert!(broadcast_shape(&a, &b, "add").is_err());
        assert_eq!(broadcast_shape(&a, &Tensor::zeros(1, 3), "add").unwrap(), (2, 3));
        assert_eq!(broadcast_shape(&Tensor::zeros(2, 1), &Tensor::zeros(1, 3), "mul").unwrap(), (2, 3));
    }
}
