//! Reverse-mode differentiation over a recorded tape of matrix ops.
//!
//! A [`Tape`] borrows a [`ParamSet`] for one forward pass. Every op appends a
//! node and returns a [`Var`] handle; [`Tape::backward`] walks the nodes in
//! reverse and returns gradients for every node and every parameter.
//! A value used twice receives the sum of both contributions.

use std::rc::Rc;

use rand::Rng;
use thiserror::Error;

use super::params::{ParamId, ParamSet};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: {lhs} is {lhs_shape:?} but {rhs} is {rhs_shape:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: &'static str,
        lhs_shape: (usize, usize),
        rhs: &'static str,
        rhs_shape: (usize, usize),
    },
    #[error("{0}: no operands")]
    Empty(&'static str),
    #[error("gather: row {index} out of range for {rows} rows")]
    GatherIndex { index: usize, rows: usize },
    #[error("backward needs a 1x1 loss, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("bce: {logits} logits but {labels} labels")]
    LabelCount { logits: usize, labels: usize },
}

fn mismatch(op: &'static str, lhs: &'static str, a: &Tensor, rhs: &'static str, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs,
        lhs_shape: a.shape(),
        rhs,
        rhs_shape: b.shape(),
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    SumRows(Var),
    AddN(Vec<Var>),
    Gather(Var, Rc<[usize]>),
    SoftmaxRows(Var),
    Fourier(Var, Var),
    MulConst(Var, Rc<Tensor>),
    Bce(Var, Rc<[f64]>),
    SumAll(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    /// One tensor per parameter of the borrowed set, zero when unreachable.
    pub params: Vec<Tensor>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` influences it.
    pub fn of(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].as_ref()
    }
}

pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match self.nodes[v.0].op {
            Op::Param(id) => self.params.value(id),
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    /// A non-trainable input. Its gradient is still reported.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(Tensor::zeros(0, 0), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols != y.rows {
            return Err(mismatch("matmul", "lhs", x, "rhs", y));
        }
        let out = x.matmul(y);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `a * b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols != y.cols {
            return Err(mismatch("matmul_nt", "lhs", x, "rhs", y));
        }
        let out = x.matmul_nt(y);
        Ok(self.push(out, Op::MatMulNt(a, b)))
    }

    /// Adds the `1 x c` row `b` to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var, TensorError> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows != 1 || bv.cols != xv.cols {
            return Err(mismatch("add_row", "input", xv, "bias", bv));
        }
        let mut out = xv.clone();
        for r in 0..out.rows {
            for (o, bb) in out.data[r * out.cols..(r + 1) * out.cols].iter_mut().zip(&bv.data) {
                *o += bb;
            }
        }
        Ok(self.push(out, Op::AddRow(x, b)))
    }

    /// `x W + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch(op, "lhs", x, "rhs", y));
        }
        Ok(x.zip_map(y, f))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| 1.0 - x);
        self.push(out, Op::OneMinus(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    /// Column-wise concatenation of equally tall operands.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts.first().ok_or(TensorError::Empty("concat"))?;
        let rows = self.value(first).rows;
        for &p in parts {
            let v = self.value(p);
            if v.rows != rows {
                return Err(mismatch("concat", "first", self.value(first), "part", v));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let v = self.value(p);
                out.data[r * cols + offset..r * cols + offset + v.cols].copy_from_slice(v.row_slice(r));
                offset += v.cols;
            }
        }
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    /// `1 x c` sum over rows.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let mut out = Tensor::zeros(1, v.cols);
        for r in 0..v.rows {
            for (o, x) in out.data.iter_mut().zip(v.row_slice(r)) {
                *o += x;
            }
        }
        self.push(out, Op::SumRows(a))
    }

    /// `1 x c` mean over rows.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let n = self.value(a).rows.max(1);
        let s = self.sum_rows(a);
        self.scale(s, 1.0 / n as f64)
    }

    /// Elementwise sum of equally shaped operands.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts.first().ok_or(TensorError::Empty("sum"))?;
        let mut out = self.value(first).clone();
        for &p in &parts[1..] {
            let v = self.value(p);
            if v.shape() != out.shape() {
                return Err(mismatch("sum", "first", self.value(first), "part", v));
            }
            out.add_assign(v);
        }
        Ok(self.push(out, Op::AddN(parts.to_vec())))
    }

    /// Elementwise mean of equally shaped operands.
    pub fn mean(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let s = self.sum(parts)?;
        Ok(self.scale(s, 1.0 / parts.len() as f64))
    }

    /// Rows of `a` picked by `index`, duplicates allowed.
    pub fn gather_rows(&mut self, a: Var, index: impl Into<Rc<[usize]>>) -> Result<Var, TensorError> {
        let index: Rc<[usize]> = index.into();
        let v = self.value(a);
        let mut out = Tensor::zeros(index.len(), v.cols);
        for (i, &src) in index.iter().enumerate() {
            if src >= v.rows {
                return Err(TensorError::GatherIndex {
                    index: src,
                    rows: v.rows,
                });
            }
            out.data[i * v.cols..(i + 1) * v.cols].copy_from_slice(v.row_slice(src));
        }
        Ok(self.push(out, Op::Gather(a, index)))
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let mut out = v.clone();
        for r in 0..out.rows {
            let row = &mut out.data[r * out.cols..(r + 1) * out.cols];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    /// Fourier time features: `dt` is `n x 1`, `omega` is `1 x d`; the result
    /// is `n x 2d` laid out `[cos(w1 dt), sin(w1 dt), ..., cos(wd dt), sin(wd dt)]`.
    pub fn fourier(&mut self, dt: Var, omega: Var) -> Result<Var, TensorError> {
        let (t, w) = (self.value(dt), self.value(omega));
        if t.cols != 1 || w.rows != 1 {
            return Err(mismatch("fourier", "dt", t, "omega", w));
        }
        let d = w.cols;
        let mut out = Tensor::zeros(t.rows, 2 * d);
        for i in 0..t.rows {
            for k in 0..d {
                let (s, c) = (w.data[k] * t.data[i]).sin_cos();
                out.data[i * 2 * d + 2 * k] = c;
                out.data[i * 2 * d + 2 * k + 1] = s;
            }
        }
        Ok(self.push(out, Op::Fourier(dt, omega)))
    }

    /// Elementwise product with a constant tensor.
    pub fn mul_const(&mut self, a: Var, c: Rc<Tensor>) -> Result<Var, TensorError> {
        let v = self.value(a);
        if v.shape() != c.shape() {
            return Err(mismatch("mul_const", "input", v, "constant", &c));
        }
        let out = v.zip_map(&c, |x, y| x * y);
        Ok(self.push(out, Op::MulConst(a, c)))
    }

    /// Inverted dropout. The identity when `train` is off or `rate` is zero.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, train: bool, rng: &mut R) -> Var {
        if !train || rate <= 0.0 {
            return a;
        }
        let (r, c) = self.shape(a);
        let keep = 1.0 / (1.0 - rate);
        let mask = (0..r * c)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        self.mul_const(a, Rc::new(Tensor::from_vec(r, c, mask)))
            .expect("mask shape matches by construction")
    }

    /// Mean binary cross-entropy of `n x 1` logits against `labels`.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[f64]) -> Result<Var, TensorError> {
        let z = self.value(logits);
        if z.cols != 1 || z.rows != labels.len() {
            return Err(TensorError::LabelCount {
                logits: z.len(),
                labels: labels.len(),
            });
        }
        let n = labels.len().max(1) as f64;
        let loss: f64 = z
            .data
            .iter()
            .zip(labels)
            .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        Ok(self.push(Tensor::row(&[loss]), Op::Bce(logits, labels.into())))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Tensor::row(&[s]), Op::SumAll(a))
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(TensorError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::row(&[1.0]));
        let mut param_grads: Vec<Tensor> = self
            .params
            .iter()
            .map(|p| Tensor::zeros(p.value.rows, p.value.cols))
            .collect();

        for idx in (0..=loss.0).rev() {
            let Some(gy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => param_grads[id.0].add_assign(&gy),
                Op::MatMul(a, b) => {
                    let ga = gy.matmul_nt(self.value(*b));
                    let gb = self.value(*a).matmul_tn(&gy);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulNt(a, b) => {
                    let ga = gy.matmul(self.value(*b));
                    let gb = gy.matmul_tn(self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRow(x, b) => {
                    let mut gb = Tensor::zeros(1, gy.cols);
                    for r in 0..gy.rows {
                        for (o, g) in gb.data.iter_mut().zip(gy.row_slice(r)) {
                            *o += g;
                        }
                    }
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *x, gy.clone());
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, gy.clone());
                    accumulate(&mut grads, *b, gy.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, gy.map(|g| -g));
                    accumulate(&mut grads, *a, gy.clone());
                }
                Op::Mul(a, b) => {
                    let ga = gy.zip_map(self.value(*b), |g, y| g * y);
                    let gb = gy.zip_map(self.value(*a), |g, x| g * x);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, gy.map(|g| g * s)),
                Op::OneMinus(a) => accumulate(&mut grads, *a, gy.map(|g| -g)),
                Op::Relu(a) => {
                    let ga = gy.zip_map(self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let ga = gy.zip_map(&node.value, |g, y| g * (1.0 - y * y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = gy.zip_map(&node.value, |g, y| g * y * (1.0 - y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let cols = self.value(p).cols;
                        let mut gp = Tensor::zeros(gy.rows, cols);
                        for r in 0..gy.rows {
                            gp.data[r * cols..(r + 1) * cols]
                                .copy_from_slice(&gy.row_slice(r)[offset..offset + cols]);
                        }
                        offset += cols;
                        accumulate(&mut grads, p, gp);
                    }
                }
                Op::SumRows(a) => {
                    let rows = self.value(*a).rows;
                    let mut ga = Tensor::zeros(rows, gy.cols);
                    for r in 0..rows {
                        ga.data[r * gy.cols..(r + 1) * gy.cols].copy_from_slice(&gy.data);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::AddN(parts) => {
                    for &p in parts {
                        accumulate(&mut grads, p, gy.clone());
                    }
                }
                Op::Gather(a, index) => {
                    let v = self.value(*a);
                    let mut ga = Tensor::zeros(v.rows, v.cols);
                    for (i, &src) in index.iter().enumerate() {
                        for (o, g) in ga.data[src * v.cols..(src + 1) * v.cols].iter_mut().zip(gy.row_slice(i)) {
                            *o += g;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut ga = Tensor::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let (yr, gr) = (y.row_slice(r), gy.row_slice(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for c in 0..y.cols {
                            ga.data[r * y.cols + c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Fourier(dt, omega) => {
                    let (t, w) = (self.value(*dt), self.value(*omega));
                    let d = w.cols;
                    let mut gt = Tensor::zeros(t.rows, 1);
                    let mut gw = Tensor::zeros(1, d);
                    for i in 0..t.rows {
                        for k in 0..d {
                            let (s, c) = (w.data[k] * t.data[i]).sin_cos();
                            let g_cos = gy.data[i * 2 * d + 2 * k];
                            let g_sin = gy.data[i * 2 * d + 2 * k + 1];
                            let inner = -g_cos * s + g_sin * c;
                            gw.data[k] += inner * t.data[i];
                            gt.data[i] += inner * w.data[k];
                        }
                    }
                    accumulate(&mut grads, *dt, gt);
                    accumulate(&mut grads, *omega, gw);
                }
                Op::MulConst(a, c) => accumulate(&mut grads, *a, gy.zip_map(c, |g, m| g * m)),
                Op::Bce(z, labels) => {
                    let zv = self.value(*z);
                    let n = labels.len().max(1) as f64;
                    let g = gy.data[0];
                    let data = zv
                        .data
                        .iter()
                        .zip(labels.iter())
                        .map(|(&x, &y)| g * (sigmoid(x) - y) / n)
                        .collect();
                    accumulate(&mut grads, *z, Tensor::from_vec(zv.rows, 1, data));
                }
                Op::SumAll(a) => {
                    let (r, c) = self.shape(*a);
                    accumulate(&mut grads, *a, Tensor::filled(r, c, gy.data[0]));
                }
            }
            grads[idx] = Some(gy);
        }
        Ok(Gradients {
            nodes: grads,
            params: param_grads,
        })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
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
