//! Dense row-major `f64` tensors and the plain (non-recording) kernels the
//! tape replays. Almost everything in the model is a matrix; scalars are
//! stored with shape `[1]`.

use std::fmt;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const PREVIEW: usize = 8;
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= PREVIEW {
            write!(f, "{:?}", self.data)
        } else {
            write!(f, "{:?}..", &self.data[..PREVIEW])
        }
    }
}

impl Tensor {
    /// Panics if the shape has a zero dimension or does not cover `data`.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d > 0),
            "tensor dims must be positive, got {shape:?}"
        );
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} values",
            data.len()
        );
        Tensor { shape, data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn scalar(value: f64) -> Self {
        Tensor::new(vec![1], vec![value])
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor::new(vec![data.len()], data)
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Tensor::new(shape, vec![value; n])
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        Tensor::full(shape, 0.0)
    }

    pub fn ones(shape: Vec<usize>) -> Self {
        Tensor::full(shape, 1.0)
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Tensor::zeros(other.shape.clone())
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

    /// Rows and columns of a rank-2 tensor. Rank-1 tensors read as a single row.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            s => panic!("expected a matrix, got shape {s:?}"),
        }
    }

    pub fn rows(&self) -> usize {
        self.dims2().0
    }

    pub fn cols(&self) -> usize {
        self.dims2().1
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn get2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.data.len(),
            "cannot reshape {:?} into {shape:?}",
            self.shape
        );
        self.shape = shape;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(self.shape, other.shape, "elementwise shape mismatch");
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

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape, "accumulate shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, k: f64) -> Tensor {
        self.map(|x| x * k)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = self.dims2();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::matrix(c, r, out)
    }

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let (m, k) = self.dims2();
        let (k2, n) = other.dims2();
        assert_eq!(k, k2, "matmul inner dims {:?} x {:?}", self.shape, other.shape);
        let mut out = vec![0.0; m * n];
        gemm(false, false, m, k, n, &self.data, &other.data, &mut out);
        Tensor::matrix(m, n, out)
    }

    /// `x W + b` with `b` of shape `[1, n]` broadcast over rows.
    pub fn linear(&self, w: &Tensor, b: &Tensor) -> Tensor {
        let mut y = self.matmul(w);
        y.add_row_assign(b);
        y
    }

    pub fn add_row_assign(&mut self, row: &Tensor) {
        let c = self.cols();
        assert_eq!(row.len(), c, "row broadcast width mismatch");
        for chunk in self.data.chunks_mut(c) {
            for (a, b) in chunk.iter_mut().zip(&row.data) {
                *a += b;
            }
        }
    }

    pub fn gather_rows(&self, idx: &[usize]) -> Tensor {
        let c = self.cols();
        let rows = self.rows();
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            assert!(i < rows, "gather index {i} out of {rows} rows");
            out.extend_from_slice(&self.data[i * c..(i + 1) * c]);
        }
        Tensor::matrix(idx.len(), c, out)
    }

    pub fn relu(&self) -> Tensor {
        self.map(|x| x.max(0.0))
    }

    pub fn sigmoid(&self) -> Tensor {
        self.map(sigmoid)
    }

    pub fn softmax_rows(&self) -> Tensor {
        let (r, c) = self.dims2();
        let mut out = self.data.clone();
        for row in out.chunks_mut(c) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                z += *x;
            }
            for x in row.iter_mut() {
                *x /= z;
            }
        }
        Tensor::matrix(r, c, out)
    }

    /// Concatenates matrices along rows (`axis == 0`) or columns (`axis == 1`).
    pub fn concat(parts: &[&Tensor], axis: usize) -> Tensor {
        assert!(!parts.is_empty(), "concat of nothing");
        match axis {
            0 => {
                let c = parts[0].cols();
                let mut data = Vec::new();
                let mut rows = 0;
                for p in parts {
                    assert_eq!(p.cols(), c, "concat rows: width mismatch");
                    data.extend_from_slice(&p.data);
                    rows += p.rows();
                }
                Tensor::matrix(rows, c, data)
            }
            1 => {
                let r = parts[0].rows();
                let total: usize = parts.iter().map(|p| p.cols()).sum();
                let mut data = Vec::with_capacity(r * total);
                for i in 0..r {
                    for p in parts {
                        assert_eq!(p.rows(), r, "concat cols: height mismatch");
                        data.extend_from_slice(p.row(i));
                    }
                }
                Tensor::matrix(r, total, data)
            }
            _ => panic!("concat axis must be 0 or 1"),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `c += op(a) * op(b)` for row-major buffers, where `op` optionally
/// transposes. `a` is m×k after `op`, `b` is k×n after `op`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: strides describe exactly the m×k, k×n and m×n extents of the
    // three buffers, whose lengths are checked by the callers' shapes.
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k) = a.dims2();
        let n = b.cols();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for l in 0..k {
                    out[i * n + j] += a.get2(i, l) * b.get2(l, j);
                }
            }
        }
        Tensor::matrix(m, n, out)
    }

    #[test]
    fn matmul_matches_naive_loop() {
        let a = Tensor::matrix(3, 4, (0..12).map(|x| x as f64 * 0.5 - 2.0).collect());
        let b = Tensor::matrix(4, 2, (0..8).map(|x| (x as f64).sin()).collect());
        assert!(a.matmul(&b).max_abs_diff(&naive_matmul(&a, &b)) < 1e-12);
    }

    #[test]
    fn transposed_gemm_variants() {
        let a = Tensor::matrix(3, 2, vec![1., 2., 3., 4., 5., 6.]);
        let b = Tensor::matrix(3, 4, (0..12).map(|x| x as f64).collect());
        // aᵀ b
        let mut c = vec![0.0; 8];
        gemm(true, false, 2, 3, 4, a.data(), b.data(), &mut c);
        let expect = naive_matmul(&a.transpose(), &b);
        assert_eq!(c, expect.data());
        // b bᵀ
        let mut d = vec![0.0; 9];
        gemm(false, true, 3, 4, 3, b.data(), b.data(), &mut d);
        assert_eq!(d, naive_matmul(&b, &b.transpose()).data());
    }

    #[test]
    fn softmax_of_zero_row_is_uniform() {
        let s = Tensor::matrix(1, 2, vec![0.0, 0.0]).softmax_rows();
        assert_eq!(s.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let s = Tensor::matrix(1, 3, vec![1000.0, 1000.0, -1000.0]).softmax_rows();
        assert!(s.all_finite());
        assert!((s.data()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn concat_columns_interleaves_rows() {
        let a = Tensor::matrix(2, 1, vec![1., 2.]);
        let b = Tensor::matrix(2, 2, vec![3., 4., 5., 6.]);
        let c = Tensor::concat(&[&a, &b], 1);
        assert_eq!(c.data(), &[1., 3., 4., 2., 5., 6.]);
    }

    #[test]
    #[should_panic(expected = "does not match")]
    fn shape_must_cover_data() {
        Tensor::new(vec![2, 2], vec![1.0; 3]);
    }
}
