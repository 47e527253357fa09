use crate::error::{Error, Result};

/// Dense row-major `f64` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::contract(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// Rank-0 tensor holding one value.
    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Self {
            shape: vec![values.len()],
            data: values,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Builds an `n x d` matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::contract(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), cols], data)
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

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Extent of the last axis (1 for scalars).
    pub fn cols(&self) -> usize {
        if self.shape.len() < 2 {
            self.shape.last().copied().unwrap_or(1)
        } else {
            self.shape[1..].iter().product()
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let c = self.cols().max(1);
        self.data.chunks(c)
    }

    /// Gathers the listed rows into a new `k x d` matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Tensor {
        let c = self.cols();
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Tensor {
            shape: vec![indices.len(), c],
            data,
        }
    }

    /// Stacks two matrices with equal column counts.
    pub fn vstack(&self, other: &Tensor) -> Result<Tensor> {
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        if self.cols() != other.cols() {
            return Err(Error::contract(format!(
                "cannot stack {} and {} columns",
                self.cols(),
                other.cols()
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Tensor::matrix(self.rows() + other.rows(), self.cols(), data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        debug_assert_eq!(self.shape, other.shape);
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn with_shape(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }
}

/// `[m,k] x [k,n]` product, i-k-j loop order.
pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.shape[0], a.shape[1]);
    let n = b.shape[1];
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::with_shape(vec![m, n], out)
}

pub(crate) fn transpose(a: &Tensor) -> Tensor {
    let (m, n) = (a.shape[0], a.shape[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.data[i * n + j];
        }
    }
    Tensor::with_shape(vec![n, m], out)
}

/// Numpy-style right-aligned broadcast compatibility of `from` into `to`.
pub(crate) fn broadcastable(from: &[usize], to: &[usize]) -> bool {
    if from.len() > to.len() {
        return false;
    }
    let off = to.len() - from.len();
    from.iter()
        .enumerate()
        .all(|(i, &e)| e == 1 || e == to[off + i])
}

/// Maps each flat index of `to` onto the flat index of `from` it reads.
fn broadcast_source_index(from: &[usize], to: &[usize]) -> Vec<usize> {
    let total: usize = to.iter().product();
    let off = to.len() - from.len();
    let mut strides = vec![0usize; to.len()];
    let mut s = 1;
    for i in (0..from.len()).rev() {
        strides[off + i] = if from[i] == 1 { 0 } else { s };
        s *= from[i];
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; to.len()];
    for _ in 0..total {
        out.push(idx.iter().zip(&strides).map(|(a, b)| a * b).sum());
        for ax in (0..to.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < to[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    out
}

pub(crate) fn broadcast_to(a: &Tensor, to: &[usize]) -> Tensor {
    if a.shape == to {
        return a.clone();
    }
    if a.data.len() == 1 {
        return Tensor::filled(to, a.data[0]);
    }
    let map = broadcast_source_index(&a.shape, to);
    Tensor::with_shape(to.to_vec(), map.into_iter().map(|i| a.data[i]).collect())
}

/// Sums `a` down onto the (broadcast-compatible) shape `to`.
pub(crate) fn reduce_to(a: &Tensor, to: &[usize]) -> Tensor {
    if a.shape == to {
        return a.clone();
    }
    let total: usize = to.iter().product();
    if total == 1 {
        return Tensor::with_shape(to.to_vec(), vec![a.data.iter().sum()]);
    }
    let map = broadcast_source_index(to, &a.shape);
    let mut out = vec![0.0; total];
    for (v, i) in a.data.iter().zip(map) {
        out[i] += v;
    }
    Tensor::with_shape(to.to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_value_count() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap();
        assert_eq!(t.rows(), 2);
        assert_eq!(t.cols(), 3);
    }

    #[test]
    fn matmul_small() {
        let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(matmul(&a, &b).data(), &[3.0, 7.0]);
        assert_eq!(transpose(&a).data(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn broadcast_and_reduce_are_adjoint_shapes() {
        let b = Tensor::vector(vec![1.0, 2.0, 3.0]);
        let m = broadcast_to(&b, &[2, 3]);
        assert_eq!(m.data(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        assert_eq!(reduce_to(&m, &[3]).data(), &[2.0, 4.0, 6.0]);
        let col = Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap();
        let m = broadcast_to(&col, &[2, 3]);
        assert_eq!(m.data(), &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert_eq!(reduce_to(&m, &[2, 1]).data(), &[3.0, 6.0]);
        assert!(broadcastable(&[], &[4, 5]));
        assert!(!broadcastable(&[2], &[4, 5]));
    }
}
