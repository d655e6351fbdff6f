//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every operation in execution order, so node indices are
//! already a topological order. [`Tape::backward`] walks the record in
//! reverse and returns a gradient for every leaf registered with
//! [`Tape::leaf`]; constants never receive or propagate gradients.
//!
//! Shape mismatches are programming errors and panic. Domain errors on
//! `ln`/`ln_gamma` inputs are reported as [`Error::Domain`].

use std::collections::HashMap;
use std::sync::Arc;

use super::sparse::SparseRows;
use super::special::{digamma, ln_gamma};
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Input,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MatMul(Var, Var),
    Linear(Var, Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    DivCol(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Transpose(Var),
    Reshape(Var),
    Concat(Vec<Var>, usize),
    RepeatRows(Var),
    GatherRows(Var, Arc<[usize]>),
    Sparse(Var, Arc<SparseRows>),
    Relu(Var),
    Sigmoid(Var),
    Ln(Var),
    Exp(Var),
    LnGamma(Var),
    XLogX(Var),
    SoftmaxRows(Var),
    SumAll(Var),
    MeanAll(Var),
    SumRows(Var),
    SumCols(Var),
    Clamp(Var, f64, f64),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    leaf: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every leaf on the tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: HashMap<Var, Tensor>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> &Tensor {
        self.grads
            .get(&v)
            .unwrap_or_else(|| panic!("{v:?} is not a leaf of this tape"))
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        self.grads
            .remove(&v)
            .unwrap_or_else(|| panic!("{v:?} is not a leaf of this tape"))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Trainable input: receives a gradient from [`Tape::backward`].
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_node(value, Op::Input, true, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_node(value, Op::Input, false, false)
    }

    fn push_node(&mut self, value: Tensor, op: Op, requires_grad: bool, leaf: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            leaf,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push_node(value, op, requires_grad, false)
    }

    fn val(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let y = self.val(a).zip_map(self.val(b), |x, y| x + y);
        self.push(y, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let y = self.val(a).zip_map(self.val(b), |x, y| x - y);
        self.push(y, Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let y = self.val(a).zip_map(self.val(b), |x, y| x * y);
        self.push(y, Op::Mul(a, b), &[a, b])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let y = self.val(a).matmul(self.val(b));
        self.push(y, Op::MatMul(a, b), &[a, b])
    }

    /// `x W + b`, bias of shape `[1, n]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let y = self.val(x).linear(self.val(w), self.val(b));
        self.push(y, Op::Linear(x, w, b), &[x, w, b])
    }

    /// Adds a `[1, c]` row to every row of an `[m, c]` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let mut y = self.val(a).clone();
        y.add_row_assign(self.val(row));
        self.push(y, Op::AddRow(a, row), &[a, row])
    }

    /// Scales row `i` of `a` by `s[i]`, `s` of shape `[m, 1]`.
    pub fn mul_col(&mut self, a: Var, s: Var) -> Var {
        let y = scale_rows(self.val(a), self.val(s), |x, s| x * s);
        self.push(y, Op::MulCol(a, s), &[a, s])
    }

    /// Divides row `i` of `a` by `s[i]`. Panics on a zero divisor.
    pub fn div_col(&mut self, a: Var, s: Var) -> Var {
        assert!(
            self.val(s).data().iter().all(|&x| x != 0.0),
            "div_col by zero"
        );
        let y = scale_rows(self.val(a), self.val(s), |x, s| x / s);
        self.push(y, Op::DivCol(a, s), &[a, s])
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let y = self.val(a).scale(k);
        self.push(y, Op::Scale(a, k), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let y = self.val(a).map(|x| x + k);
        self.push(y, Op::AddScalar(a), &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let y = self.val(a).transpose();
        self.push(y, Op::Transpose(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Var {
        let y = self.val(a).clone().reshape(shape);
        self.push(y, Op::Reshape(a), &[a])
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Var {
        let vals: Vec<&Tensor> = parts.iter().map(|&p| self.val(p)).collect();
        let y = Tensor::concat(&vals, axis);
        self.push(y, Op::Concat(parts.to_vec(), axis), parts)
    }

    /// Broadcast-repeats a single row `times` times.
    pub fn repeat_rows(&mut self, a: Var, times: usize) -> Var {
        let v = self.val(a);
        assert_eq!(v.rows(), 1, "repeat_rows expects a single row");
        let y = v.gather_rows(&vec![0; times]);
        self.push(y, Op::RepeatRows(a), &[a])
    }

    pub fn gather_rows(&mut self, a: Var, idx: impl Into<Arc<[usize]>>) -> Var {
        let idx = idx.into();
        let y = self.val(a).gather_rows(&idx);
        self.push(y, Op::GatherRows(a, idx), &[a])
    }

    /// Applies a constant sparse row operator: `A x`.
    pub fn sparse_apply(&mut self, op: &Arc<SparseRows>, x: Var) -> Var {
        let xv = self.val(x);
        let (rows, width) = xv.dims2();
        assert_eq!(op.cols(), rows, "sparse operator width mismatch");
        let y = Tensor::matrix(op.rows(), width, op.apply(xv.data(), width));
        self.push(y, Op::Sparse(x, Arc::clone(op)), &[x])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let y = self.val(a).relu();
        self.push(y, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let y = self.val(a).sigmoid();
        self.push(y, Op::Sigmoid(a), &[a])
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        if let Some(bad) = self.val(a).data().iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::Domain(format!("ln of non-positive value {bad}")));
        }
        let y = self.val(a).map(f64::ln);
        Ok(self.push(y, Op::Ln(a), &[a]))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let y = self.val(a).map(f64::exp);
        self.push(y, Op::Exp(a), &[a])
    }

    pub fn ln_gamma(&mut self, a: Var) -> Result<Var> {
        if let Some(bad) = self.val(a).data().iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::Domain(format!("ln_gamma of non-positive value {bad}")));
        }
        let y = self.val(a).map(ln_gamma);
        Ok(self.push(y, Op::LnGamma(a), &[a]))
    }

    /// Elementwise `x ln x` with `0 ln 0 := 0`. Inputs must be non-negative.
    pub fn xlogx(&mut self, a: Var) -> Var {
        let y = self.val(a).map(|x| {
            assert!(x >= 0.0, "xlogx of negative value {x}");
            if x == 0.0 {
                0.0
            } else {
                x * x.ln()
            }
        });
        self.push(y, Op::XLogX(a), &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let y = self.val(a).softmax_rows();
        self.push(y, Op::SoftmaxRows(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let y = Tensor::scalar(self.val(a).sum());
        self.push(y, Op::SumAll(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.val(a);
        let y = Tensor::scalar(v.sum() / v.len() as f64);
        self.push(y, Op::MeanAll(a), &[a])
    }

    /// Sums over axis 1: `[m, c] -> [m, 1]`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = self.val(a);
        let (r, c) = v.dims2();
        let data = v.data().chunks(c).map(|row| row.iter().sum()).collect();
        self.push(Tensor::matrix(r, 1, data), Op::SumRows(a), &[a])
    }

    /// Sums over axis 0: `[m, c] -> [1, c]`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let y = col_sums(self.val(a));
        self.push(y, Op::SumCols(a), &[a])
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        assert!(lo <= hi, "clamp bounds reversed");
        let y = self.val(a).map(|x| x.clamp(lo, hi));
        self.push(y, Op::Clamp(a, lo, hi), &[a])
    }

    pub fn clamp_min(&mut self, a: Var, lo: f64) -> Var {
        self.clamp(a, lo, f64::INFINITY)
    }

    /// Gradients of the scalar `output` (shape `[1]`) with respect to every
    /// leaf. Leaves that do not influence `output` get zero tensors.
    pub fn backward(&self, output: Var) -> Gradients {
        let out_shape = self.val(output).shape();
        assert!(
            out_shape == [1] || out_shape == [1, 1],
            "backward needs a scalar output, got shape {out_shape:?}"
        );
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::ones(out_shape.to_vec()));

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || node.leaf {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        let mut out = HashMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.leaf {
                let g = grads[i]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros_like(&node.value));
                out.insert(Var(i), g);
            }
        }
        Gradients { grads: out }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, delta: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let y = &node.value;

        match &node.op {
            Op::Input => {}
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    acc(*a, g.zip_map(self.val(*b), |g, b| g * b));
                }
                if needs(*b) {
                    acc(*b, g.zip_map(self.val(*a), |g, a| g * a));
                }
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                if needs(*a) {
                    acc(*a, matmul_nt(g, bv));
                }
                if needs(*b) {
                    acc(*b, matmul_tn(av, g));
                }
            }
            Op::Linear(x, w, b) => {
                let (xv, wv) = (self.val(*x), self.val(*w));
                if needs(*x) {
                    acc(*x, matmul_nt(g, wv));
                }
                if needs(*w) {
                    acc(*w, matmul_tn(xv, g));
                }
                if needs(*b) {
                    acc(*b, col_sums(g).reshape(self.val(*b).shape().to_vec()));
                }
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                if needs(*row) {
                    acc(*row, col_sums(g).reshape(self.val(*row).shape().to_vec()));
                }
            }
            Op::MulCol(a, s) => {
                let (av, sv) = (self.val(*a), self.val(*s));
                if needs(*a) {
                    acc(*a, scale_rows(g, sv, |g, s| g * s));
                }
                if needs(*s) {
                    acc(*s, row_dots(g, av, sv.shape()));
                }
            }
            Op::DivCol(a, s) => {
                let (av, sv) = (self.val(*a), self.val(*s));
                if needs(*a) {
                    acc(*a, scale_rows(g, sv, |g, s| g / s));
                }
                if needs(*s) {
                    let mut d = row_dots(g, av, sv.shape());
                    for (d, s) in d.data_mut().iter_mut().zip(sv.data()) {
                        *d = -*d / (s * s);
                    }
                    acc(*s, d);
                }
            }
            Op::Scale(a, k) => acc(*a, g.scale(*k)),
            Op::AddScalar(a) => acc(*a, g.clone()),
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::Reshape(a) => acc(*a, g.clone().reshape(self.val(*a).shape().to_vec())),
            Op::Concat(parts, axis) => {
                let cols = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let pv = self.val(p);
                    let (pr, pc) = pv.dims2();
                    let piece = if *axis == 0 {
                        let span = offset * cols..(offset + pr) * cols;
                        offset += pr;
                        Tensor::matrix(pr, pc, g.data()[span].to_vec())
                    } else {
                        let mut d = Vec::with_capacity(pr * pc);
                        for r in 0..pr {
                            d.extend_from_slice(&g.row(r)[offset..offset + pc]);
                        }
                        offset += pc;
                        Tensor::matrix(pr, pc, d)
                    };
                    acc(p, piece.reshape(pv.shape().to_vec()));
                }
            }
            Op::RepeatRows(a) => acc(*a, col_sums(g).reshape(self.val(*a).shape().to_vec())),
            Op::GatherRows(a, idx) => {
                if needs(*a) {
                    let av = self.val(*a);
                    let c = av.cols();
                    let mut d = Tensor::zeros_like(av);
                    let dd = d.data_mut();
                    for (k, &i) in idx.iter().enumerate() {
                        for (t, s) in dd[i * c..(i + 1) * c].iter_mut().zip(g.row(k)) {
                            *t += s;
                        }
                    }
                    acc(*a, d);
                }
            }
            Op::Sparse(x, op) => {
                if needs(*x) {
                    let xv = self.val(*x);
                    let width = xv.cols();
                    let mut d = Tensor::zeros_like(xv);
                    op.apply_transpose_into(g.data(), width, d.data_mut());
                    acc(*x, d);
                }
            }
            Op::Relu(a) => acc(
                *a,
                g.zip_map(self.val(*a), |g, x| if x > 0.0 { g } else { 0.0 }),
            ),
            Op::Sigmoid(a) => acc(*a, g.zip_map(y, |g, s| g * s * (1.0 - s))),
            Op::Ln(a) => acc(*a, g.zip_map(self.val(*a), |g, x| g / x)),
            Op::Exp(a) => acc(*a, g.zip_map(y, |g, e| g * e)),
            Op::LnGamma(a) => acc(*a, g.zip_map(self.val(*a), |g, x| g * digamma(x))),
            Op::XLogX(a) => acc(
                *a,
                g.zip_map(self.val(*a), |g, x| if x > 0.0 { g * (x.ln() + 1.0) } else { 0.0 }),
            ),
            Op::SoftmaxRows(a) => {
                let c = y.cols();
                let mut d = g.zip_map(y, |g, s| g * s);
                for (drow, yrow) in d.data_mut().chunks_mut(c).zip(y.data().chunks(c)) {
                    let dot: f64 = drow.iter().sum();
                    for (dv, yv) in drow.iter_mut().zip(yrow) {
                        *dv -= yv * dot;
                    }
                }
                acc(*a, d);
            }
            Op::SumAll(a) => {
                let av = self.val(*a);
                acc(*a, Tensor::full(av.shape().to_vec(), g.item()));
            }
            Op::MeanAll(a) => {
                let av = self.val(*a);
                acc(
                    *a,
                    Tensor::full(av.shape().to_vec(), g.item() / av.len() as f64),
                );
            }
            Op::SumRows(a) => {
                let av = self.val(*a);
                let c = av.cols();
                let data = g
                    .data()
                    .iter()
                    .flat_map(|&gi| std::iter::repeat(gi).take(c))
                    .collect();
                acc(*a, Tensor::new(av.shape().to_vec(), data));
            }
            Op::SumCols(a) => {
                let av = self.val(*a);
                let r = av.rows();
                let mut data = Vec::with_capacity(av.len());
                for _ in 0..r {
                    data.extend_from_slice(g.data());
                }
                acc(*a, Tensor::new(av.shape().to_vec(), data));
            }
            Op::Clamp(a, lo, hi) => acc(
                *a,
                g.zip_map(self.val(*a), |g, x| if x >= *lo && x <= *hi { g } else { 0.0 }),
            ),
        }
    }
}

fn scale_rows(a: &Tensor, s: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let (r, c) = a.dims2();
    assert_eq!(s.len(), r, "row scaling needs one factor per row");
    let mut out = a.clone();
    for (row, &k) in out.data_mut().chunks_mut(c).zip(s.data()) {
        for x in row.iter_mut() {
            *x = f(*x, k);
        }
    }
    out
}

fn row_dots(a: &Tensor, b: &Tensor, shape: &[usize]) -> Tensor {
    let c = a.cols();
    let data = a
        .data()
        .chunks(c)
        .zip(b.data().chunks(c))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    Tensor::new(shape.to_vec(), data)
}

fn col_sums(a: &Tensor) -> Tensor {
    let (_, c) = a.dims2();
    let mut out = vec![0.0; c];
    for row in a.data().chunks(c) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    Tensor::matrix(1, c, out)
}

/// `a bᵀ`
fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = a.dims2();
    let (n, k2) = b.dims2();
    assert_eq!(k, k2);
    let mut out = vec![0.0; m * n];
    gemm(false, true, m, k, n, a.data(), b.data(), &mut out);
    Tensor::matrix(m, n, out)
}

/// `aᵀ b`
fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    let (k, m) = a.dims2();
    let (k2, n) = b.dims2();
    assert_eq!(k, k2);
    let mut out = vec![0.0; m * n];
    gemm(true, false, m, k, n, a.data(), b.data(), &mut out);
    Tensor::matrix(m, n, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_sum_gradient_is_twice_input() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1., 2., 3.]));
        let sq = t.mul(x, x);
        let s = t.sum(sq);
        let g = t.backward(s);
        assert_eq!(g.get(x).data(), &[2., 4., 6.]);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(0.0));
        let y = t.sigmoid(x);
        let g = t.backward(y);
        assert_eq!(g.get(x).item(), 0.25);
    }

    #[test]
    fn untouched_leaf_gets_zero_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(3.0));
        let unused = t.leaf(Tensor::matrix(2, 2, vec![1.0; 4]));
        let y = t.scale(x, 2.0);
        let g = t.backward(y);
        assert_eq!(g.get(x).item(), 2.0);
        assert_eq!(g.get(unused), &Tensor::zeros(vec![2, 2]));
    }

    #[test]
    fn constants_are_not_in_gradient_map() {
        let mut t = Tape::new();
        let c = t.constant(Tensor::scalar(1.0));
        let x = t.leaf(Tensor::scalar(2.0));
        let y = t.mul(c, x);
        let g = t.backward(y);
        assert_eq!(g.len(), 1);
        assert_eq!(g.get(x).item(), 1.0);
    }

    #[test]
    fn reused_node_accumulates() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(1.5));
        let a = t.add(x, x);
        let b = t.add(a, x);
        let g = t.backward(b);
        assert_eq!(g.get(x).item(), 3.0);
    }

    #[test]
    #[should_panic(expected = "scalar output")]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]));
        t.backward(x);
    }

    #[test]
    fn ln_rejects_non_positive() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 0.0]));
        assert!(matches!(t.ln(x), Err(Error::Domain(_))));
        assert!(matches!(t.ln_gamma(x), Err(Error::Domain(_))));
    }

    #[test]
    fn ln_gamma_forward_values() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![1.0, 3.0]));
        let y = t.ln_gamma(x).unwrap();
        assert_eq!(t.value(y).data()[0], 0.0);
        assert!((t.value(y).data()[1] - 0.6931471805599453).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "elementwise shape mismatch")]
    fn shape_mismatch_panics() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::vector(vec![1.0, 2.0]));
        let b = t.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]));
        t.add(a, b);
    }
}
