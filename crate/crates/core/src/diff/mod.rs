//! A small tensor-level reverse-mode differentiation engine.
//!
//! A [`Tape`] records one forward evaluation as a topologically ordered list
//! of nodes. Every operation appends a node holding its value; [`Tape::backward`]
//! walks the list in reverse and accumulates vector-Jacobian products into
//! the nodes' gradients. The tape is rebuilt for every forward pass.
//!
//! Values are dense `f64` matrices (scalars are 1x1). Constants and anything
//! computed only from constants never receive gradient contributions.
//!
//! Subgradients at kinks are fixed: `relu'(0) = 0`, `leaky_relu'(0) = slope`.

mod check;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::Csr;
use crate::matrix::{dot, Matrix};

pub use check::{grad_check, grad_check_many};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    SparseMatMul(Arc<Csr>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    ConcatCols(Var, Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Exp(Var),
    SegmentSoftmax(Var, Arc<[usize]>),
    SegmentSum(Var, Arc<[usize]>),
    Mse(Var, Var),
    BceWithLogits(Var, Arc<[f64]>),
    Mean(Var),
    GatherRows(Var, Arc<[usize]>),
    RowDot(Var, Var),
    ScaleRows(Var, Var),
    AddBias(Var, Var),
    MaskRows(Var, Var, Arc<[bool]>),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
    grad: Option<Matrix>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::Shape {
        op,
        lhs: a.shape(),
        rhs: b.shape(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_segments(op: &'static str, seg: &[usize], rows: usize, n_seg: usize) -> Result<()> {
    if seg.len() != rows {
        return Err(Error::Shape {
            op,
            lhs: (rows, 0),
            rhs: (seg.len(), 0),
        });
    }
    if seg.windows(2).any(|w| w[0] > w[1]) || seg.last().is_some_and(|&s| s >= n_seg) {
        return Err(Error::invalid(format!("{op}: segment ids must be sorted and < {n_seg}")));
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last `backward` output with respect to `v`; zeros if
    /// `v` does not influence it.
    pub fn grad(&self, v: Var) -> Matrix {
        let node = &self.nodes[v.0];
        node.grad
            .clone()
            .unwrap_or_else(|| Matrix::zeros(node.value.rows(), node.value.cols()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn sparse_matmul(&mut self, s: &Arc<Csr>, x: Var) -> Result<Var> {
        let value = s.matmul(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::SparseMatMul(Arc::clone(s), x), rg))
    }

    fn zip_same(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err(op, va, vb));
        }
        let data = va.as_slice().iter().zip(vb.as_slice()).map(|(&x, &y)| f(x, y)).collect();
        Matrix::from_vec(va.rows(), va.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same("add", a, b, |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x * c);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.rows() != vb.rows() {
            return Err(shape_err("concat_cols", va, vb));
        }
        let mut data = Vec::with_capacity(va.len() + vb.len());
        for r in 0..va.rows() {
            data.extend_from_slice(va.row(r));
            data.extend_from_slice(vb.row(r));
        }
        let value = Matrix::from_vec(va.rows(), va.cols() + vb.cols(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::ConcatCols(a, b), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(a);
        self.push(value, Op::LeakyRelu(a, slope), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        let rg = self.rg(a);
        self.push(value, Op::Exp(a), rg)
    }

    /// Softmax within each segment, independently per column. Segment ids
    /// must be sorted; each segment's maximum is subtracted before `exp`.
    pub fn segment_softmax(&mut self, scores: Var, seg: &Arc<[usize]>, n_seg: usize) -> Result<Var> {
        let x = self.value(scores);
        check_segments("segment_softmax", seg, x.rows(), n_seg)?;
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for span in segment_spans(seg) {
            for c in 0..x.cols() {
                let max = span.clone().map(|k| x.get(k, c)).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for k in span.clone() {
                    let e = (x.get(k, c) - max).exp();
                    out.set(k, c, e);
                    total += e;
                }
                for k in span.clone() {
                    out.set(k, c, out.get(k, c) / total);
                }
            }
        }
        let rg = self.rg(scores);
        Ok(self.push(out, Op::SegmentSoftmax(scores, Arc::clone(seg)), rg))
    }

    /// Row `s` of the result is the sum of the input rows tagged `s`.
    pub fn segment_sum(&mut self, values: Var, seg: &Arc<[usize]>, n_seg: usize) -> Result<Var> {
        let x = self.value(values);
        check_segments("segment_sum", seg, x.rows(), n_seg)?;
        let mut out = Matrix::zeros(n_seg, x.cols());
        for (k, &s) in seg.iter().enumerate() {
            for (o, &v) in out.row_mut(s).iter_mut().zip(x.row(k)) {
                *o += v;
            }
        }
        let rg = self.rg(values);
        Ok(self.push(out, Op::SegmentSum(values, Arc::clone(seg)), rg))
    }

    /// Mean squared error over all entries.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("mse", va, vb));
        }
        if va.is_empty() {
            return Err(Error::invalid("mse of empty matrices"));
        }
        let total: f64 = va.as_slice().iter().zip(vb.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
        let value = Matrix::scalar(total / va.len() as f64);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mse(a, b), rg))
    }

    /// Mean binary cross-entropy of `m x 1` logits against 0/1 labels.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[f64]) -> Result<Var> {
        let x = self.value(logits);
        if x.cols() != 1 || x.rows() != labels.len() || labels.is_empty() {
            return Err(Error::Shape {
                op: "bce_with_logits",
                lhs: x.shape(),
                rhs: (labels.len(), 1),
            });
        }
        let total: f64 = x
            .as_slice()
            .iter()
            .zip(labels)
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum();
        let value = Matrix::scalar(total / labels.len() as f64);
        let rg = self.rg(logits);
        Ok(self.push(value, Op::BceWithLogits(logits, labels.into()), rg))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::invalid("mean of empty matrix"));
        }
        let value = Matrix::scalar(x.as_slice().iter().sum::<f64>() / x.len() as f64);
        let rg = self.rg(a);
        Ok(self.push(value, Op::Mean(a), rg))
    }

    pub fn gather_rows(&mut self, a: Var, idx: &Arc<[usize]>) -> Result<Var> {
        let x = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::invalid(format!("gather_rows: row {bad} out of {}", x.rows())));
        }
        let mut data = Vec::with_capacity(idx.len() * x.cols());
        for &i in idx.iter() {
            data.extend_from_slice(x.row(i));
        }
        let value = Matrix::from_vec(idx.len(), x.cols(), data)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::GatherRows(a, Arc::clone(idx)), rg))
    }

    /// Row-wise dot products, `m x d` and `m x d` to `m x 1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("row_dot", va, vb));
        }
        let data = (0..va.rows()).map(|r| dot(va.row(r), vb.row(r))).collect();
        let value = Matrix::from_vec(va.rows(), 1, data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::RowDot(a, b), rg))
    }

    /// Multiplies row `k` of `x` by `s[k]`, where `s` is `m x 1`.
    pub fn scale_rows(&mut self, x: Var, s: Var) -> Result<Var> {
        let (vx, vs) = (self.value(x), self.value(s));
        if vs.cols() != 1 || vs.rows() != vx.rows() {
            return Err(shape_err("scale_rows", vx, vs));
        }
        let mut value = vx.clone();
        for r in 0..vx.rows() {
            let f = vs.get(r, 0);
            value.row_mut(r).iter_mut().for_each(|v| *v *= f);
        }
        let rg = self.rg(x) || self.rg(s);
        Ok(self.push(value, Op::ScaleRows(x, s), rg))
    }

    /// Adds the `1 x d` row `b` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (vx, vb) = (self.value(x), self.value(b));
        if vb.rows() != 1 || vb.cols() != vx.cols() {
            return Err(shape_err("add_bias", vx, vb));
        }
        let mut value = vx.clone();
        for r in 0..vx.rows() {
            for (v, &bias) in value.row_mut(r).iter_mut().zip(vb.row(0)) {
                *v += bias;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(value, Op::AddBias(x, b), rg))
    }

    /// Rows where `mask` is set come from `replacement`, the rest from `base`.
    pub fn mask_rows(&mut self, base: Var, replacement: Var, mask: &Arc<[bool]>) -> Result<Var> {
        let (vb, vr) = (self.value(base), self.value(replacement));
        if vb.shape() != vr.shape() || mask.len() != vb.rows() {
            return Err(shape_err("mask_rows", vb, vr));
        }
        let mut value = vb.clone();
        for (r, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            value.row_mut(r).copy_from_slice(vr.row(r));
        }
        let rg = self.rg(base) || self.rg(replacement);
        Ok(self.push(value, Op::MaskRows(base, replacement, Arc::clone(mask)), rg))
    }

    /// Fills every node's gradient with `∂output/∂node`. Gradients from any
    /// previous call are discarded first.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        let shape = self.shape(output);
        if shape != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                lhs: shape,
                rhs: (1, 1),
            });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[output.0].grad = Some(Matrix::scalar(1.0));
        for idx in (0..=output.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[idx].grad.take() else {
                continue;
            };
            self.propagate(idx, &g)?;
            self.nodes[idx].grad = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Matrix) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&mut self, idx: usize, g: &Matrix) -> Result<()> {
        let op = self.nodes[idx].op.clone();
        match op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                if self.rg(a) {
                    let ga = g.matmul_t(self.value(b))?;
                    self.accumulate(a, ga);
                }
                if self.rg(b) {
                    let gb = self.value(a).t_matmul(g)?;
                    self.accumulate(b, gb);
                }
            }
            Op::SparseMatMul(s, x) => {
                let gx = s.t_matmul(g);
                self.accumulate(x, gx);
            }
            Op::Add(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g.map(|x| -x));
            }
            Op::Scale(a, c) => self.accumulate(a, g.map(|x| x * c)),
            Op::ConcatCols(a, b) => {
                let ca = self.value(a).cols();
                let (mut ga, mut gb) = (Matrix::zeros(g.rows(), ca), Matrix::zeros(g.rows(), g.cols() - ca));
                for r in 0..g.rows() {
                    ga.row_mut(r).copy_from_slice(&g.row(r)[..ca]);
                    gb.row_mut(r).copy_from_slice(&g.row(r)[ca..]);
                }
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::Relu(a) => {
                let ga = self.zip_grad(a, g, |x, gv| if x > 0.0 { gv } else { 0.0 });
                self.accumulate(a, ga);
            }
            Op::LeakyRelu(a, slope) => {
                let ga = self.zip_grad(a, g, |x, gv| if x > 0.0 { gv } else { slope * gv });
                self.accumulate(a, ga);
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[idx].value;
                let data = y.as_slice().iter().zip(g.as_slice()).map(|(&s, &gv)| gv * s * (1.0 - s)).collect();
                let ga = Matrix::from_vec(y.rows(), y.cols(), data)?;
                self.accumulate(a, ga);
            }
            Op::Exp(a) => {
                let y = &self.nodes[idx].value;
                let data = y.as_slice().iter().zip(g.as_slice()).map(|(&e, &gv)| gv * e).collect();
                let ga = Matrix::from_vec(y.rows(), y.cols(), data)?;
                self.accumulate(a, ga);
            }
            Op::SegmentSoftmax(x, seg) => {
                let y = &self.nodes[idx].value;
                let mut gx = Matrix::zeros(y.rows(), y.cols());
                for span in segment_spans(&seg) {
                    for c in 0..y.cols() {
                        let inner: f64 = span.clone().map(|k| y.get(k, c) * g.get(k, c)).sum();
                        for k in span.clone() {
                            gx.set(k, c, y.get(k, c) * (g.get(k, c) - inner));
                        }
                    }
                }
                self.accumulate(x, gx);
            }
            Op::SegmentSum(x, seg) => {
                let cols = g.cols();
                let mut gx = Matrix::zeros(seg.len(), cols);
                for (k, &s) in seg.iter().enumerate() {
                    gx.row_mut(k).copy_from_slice(g.row(s));
                }
                self.accumulate(x, gx);
            }
            Op::Mse(a, b) => {
                let (va, vb) = (self.value(a), self.value(b));
                let f = 2.0 * g.item() / va.len() as f64;
                let data = va.as_slice().iter().zip(vb.as_slice()).map(|(x, y)| f * (x - y)).collect();
                let ga = Matrix::from_vec(va.rows(), va.cols(), data)?;
                if self.rg(b) {
                    self.accumulate(b, ga.map(|x| -x));
                }
                self.accumulate(a, ga);
            }
            Op::BceWithLogits(x, labels) => {
                let vx = self.value(x);
                let f = g.item() / labels.len() as f64;
                let data = vx.as_slice().iter().zip(labels.iter()).map(|(&z, &y)| f * (sigmoid(z) - y)).collect();
                let gx = Matrix::from_vec(vx.rows(), 1, data)?;
                self.accumulate(x, gx);
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(a);
                let gx = Matrix::filled(r, c, g.item() / (r * c) as f64);
                self.accumulate(a, gx);
            }
            Op::GatherRows(a, ids) => {
                let (r, c) = self.shape(a);
                let mut ga = Matrix::zeros(r, c);
                for (k, &i) in ids.iter().enumerate() {
                    for (o, &gv) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += gv;
                    }
                }
                self.accumulate(a, ga);
            }
            Op::RowDot(a, b) => {
                let scale_by = |m: &Matrix| {
                    let mut out = m.clone();
                    for r in 0..m.rows() {
                        let f = g.get(r, 0);
                        out.row_mut(r).iter_mut().for_each(|v| *v *= f);
                    }
                    out
                };
                let ga = scale_by(self.value(b));
                let gb = scale_by(self.value(a));
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::ScaleRows(x, s) => {
                let (vx, vs) = (self.value(x), self.value(s));
                let mut gx = g.clone();
                let mut gs = Matrix::zeros(vs.rows(), 1);
                for r in 0..vx.rows() {
                    let f = vs.get(r, 0);
                    gx.row_mut(r).iter_mut().for_each(|v| *v *= f);
                    gs.set(r, 0, dot(g.row(r), vx.row(r)));
                }
                self.accumulate(x, gx);
                self.accumulate(s, gs);
            }
            Op::AddBias(x, b) => {
                let mut gb = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, &gv) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                        *o += gv;
                    }
                }
                self.accumulate(x, g.clone());
                self.accumulate(b, gb);
            }
            Op::MaskRows(base, repl, mask) => {
                let mut g_base = g.clone();
                let mut g_repl = Matrix::zeros(g.rows(), g.cols());
                for (r, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
                    g_repl.row_mut(r).copy_from_slice(g.row(r));
                    g_base.row_mut(r).iter_mut().for_each(|v| *v = 0.0);
                }
                self.accumulate(base, g_base);
                self.accumulate(repl, g_repl);
            }
        }
        Ok(())
    }

    fn zip_grad(&self, a: Var, g: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        let x = self.value(a);
        let data = x.as_slice().iter().zip(g.as_slice()).map(|(&xv, &gv)| f(xv, gv)).collect();
        Matrix::from_vec(x.rows(), x.cols(), data).expect("same shape")
    }
}

fn segment_spans(seg: &[usize]) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
    let mut start = 0;
    std::iter::from_fn(move || {
        if start >= seg.len() {
            return None;
        }
        let s = seg[start];
        let end = start + seg[start..].iter().take_while(|&&t| t == s).count();
        let span = start..end;
        start = end;
        Some(span)
    })
}

#[cfg(test)]
mod tests;
