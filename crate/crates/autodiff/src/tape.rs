//! Define-by-run tape for reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value and the
//! information needed to push gradients back to its inputs. Because nodes
//! are appended in evaluation order, the tape is already topologically
//! sorted and [`Tape::backward`] is a single reverse sweep.
//!
//! ```
//! use cadren_autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.param(Tensor::new(vec![3], vec![1.0, -2.0, 3.0]).unwrap());
//! let sq = tape.hadamard(x, x).unwrap();
//! let loss = tape.sum(sq).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[2.0, -4.0, 6.0]);
//! ```

use crate::error::{Result, TensorError};
use crate::tensor::{matmul_nt, matmul_tn, Tensor};

/// Clamp applied to predictions inside [`Tape::bce`].
pub const BCE_EPS: f64 = 1e-7;

/// Variance floor used by [`Tape::layer_norm`].
pub const LAYER_NORM_EPS: f64 = 1e-10;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    ScalarMul(Var, f64),
    Scale(Var, Var),
    Concat { inputs: Vec<Var>, axis: usize },
    SliceCols { input: Var, start: usize },
    Reshape(Var),
    Transpose(Var),
    Relu(Var),
    Sigmoid(Var),
    Softmax { input: Var, axis: usize },
    LayerNorm { input: Var, inv_std: Vec<f64> },
    Mean(Var),
    Sum(Var),
    SumAxis { input: Var, axis: usize },
    Bce { pred: Var, target: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every trainable leaf.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    if t.rank() != 2 {
        return Err(TensorError::InvalidShape {
            shape: t.shape().to_vec(),
            reason: format!("{op} expects a matrix"),
        });
    }
    Ok((t.shape()[0], t.shape()[1]))
}

fn accumulate(slot: &mut Option<Vec<f64>>, delta: &[f64]) {
    match slot {
        Some(g) => g.iter_mut().zip(delta).for_each(|(a, b)| *a += b),
        None => *slot = Some(delta.to_vec()),
    }
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

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn binary_same_shape(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(name, value, op, &[a, b])
    }

    fn unary(&mut self, name: &'static str, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let ta = self.value(a);
        let value = Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|&x| f(x)).collect())?;
        self.push(name, value, op, &[a])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("hadamard", a, b, |x, y| x * y, Op::Hadamard(a, b))
    }

    /// Adds a `[1, m]` (or `[m]`) row to every row of an `[n, m]` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        let (n, m) = require_matrix("add_row", ta)?;
        if tr.numel() != m || tr.dims2().0 != 1 {
            return Err(mismatch("add_row", ta, tr));
        }
        let mut data = ta.data().to_vec();
        for r in data.chunks_mut(m) {
            r.iter_mut().zip(tr.data()).for_each(|(x, b)| *x += b);
        }
        let value = Tensor::new(vec![n, m], data)?;
        self.push("add_row", value, Op::AddRow(a, row), &[a, row])
    }

    pub fn scalar_mul(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary("scalar_mul", a, |x| x * c, Op::ScalarMul(a, c))
    }

    /// Multiplies every element of `a` by the single element of `s`.
    pub fn scale(&mut self, a: Var, s: Var) -> Result<Var> {
        let ts = self.value(s);
        if ts.numel() != 1 {
            return Err(mismatch("scale", self.value(a), ts));
        }
        let c = ts.item();
        let ta = self.value(a);
        let value = Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|x| x * c).collect())?;
        self.push("scale", value, Op::Scale(a, s), &[a, s])
    }

    /// Concatenates matrices along `axis` (0 = stack rows, 1 = join columns).
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        if axis > 1 {
            return Err(TensorError::InvalidAxis {
                op: "concat",
                axis,
                rank: 2,
            });
        }
        let first = *inputs.first().ok_or_else(|| TensorError::InvalidShape {
            shape: vec![],
            reason: "concat of zero tensors".into(),
        })?;
        let (r0, c0) = require_matrix("concat", self.value(first))?;
        for &v in &inputs[1..] {
            let (r, c) = require_matrix("concat", self.value(v))?;
            if (axis == 0 && c != c0) || (axis == 1 && r != r0) {
                return Err(mismatch("concat", self.value(first), self.value(v)));
            }
        }
        let value = if axis == 0 {
            let rows: usize = inputs.iter().map(|&v| self.value(v).shape()[0]).sum();
            let data = inputs
                .iter()
                .flat_map(|&v| self.value(v).data().iter().copied())
                .collect();
            Tensor::new(vec![rows, c0], data)?
        } else {
            let cols: usize = inputs.iter().map(|&v| self.value(v).shape()[1]).sum();
            let mut data = Vec::with_capacity(r0 * cols);
            for i in 0..r0 {
                for &v in inputs {
                    data.extend_from_slice(self.value(v).row(i));
                }
            }
            Tensor::new(vec![r0, cols], data)?
        };
        let op = Op::Concat {
            inputs: inputs.to_vec(),
            axis,
        };
        self.push("concat", value, op, inputs)
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ta = self.value(a);
        let (n, m) = require_matrix("slice_cols", ta)?;
        if start >= end || end > m {
            return Err(TensorError::InvalidShape {
                shape: ta.shape().to_vec(),
                reason: format!("column range {start}..{end} out of bounds"),
            });
        }
        let w = end - start;
        let mut data = Vec::with_capacity(n * w);
        for i in 0..n {
            data.extend_from_slice(&ta.row(i)[start..end]);
        }
        let value = Tensor::new(vec![n, w], data)?;
        self.push("slice_cols", value, Op::SliceCols { input: a, start }, &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).reshaped(shape)?;
        self.push("reshape", value, Op::Reshape(a), &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        require_matrix("transpose", self.value(a))?;
        let value = self.value(a).transposed();
        self.push("transpose", value, Op::Transpose(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", a, sigmoid, Op::Sigmoid(a))
    }

    /// Softmax of a matrix along `axis` (1 = within each row).
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let ta = self.value(a);
        let (n, m) = require_matrix("softmax", ta)?;
        if axis > 1 {
            return Err(TensorError::InvalidAxis {
                op: "softmax",
                axis,
                rank: 2,
            });
        }
        let value = if axis == 1 {
            let mut data = Vec::with_capacity(n * m);
            for r in ta.rows() {
                data.extend(softmax_slice(r));
            }
            Tensor::new(vec![n, m], data)?
        } else {
            let t = ta.transposed();
            let mut data = Vec::with_capacity(n * m);
            for r in t.rows() {
                data.extend(softmax_slice(r));
            }
            Tensor::new(vec![m, n], data)?.transposed()
        };
        self.push("softmax", value, Op::Softmax { input: a, axis }, &[a])
    }

    /// Normalizes each row to zero mean and unit variance (no affine part).
    pub fn layer_norm(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let (_, m) = ta.dims2();
        let mut data = Vec::with_capacity(ta.numel());
        let mut inv_std = Vec::new();
        for r in ta.rows() {
            let mean = r.iter().sum::<f64>() / m as f64;
            let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            data.extend(r.iter().map(|x| (x - mean) * is));
            inv_std.push(is);
        }
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        self.push("layer_norm", value, Op::LayerNorm { input: a, inv_std }, &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let value = Tensor::scalar(ta.data().iter().sum::<f64>() / ta.numel() as f64);
        self.push("mean", value, Op::Mean(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(a).data().iter().sum());
        self.push("sum", value, Op::Sum(a), &[a])
    }

    /// Sums a matrix along `axis`, keeping it as a length-1 dimension.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let ta = self.value(a);
        let (n, m) = require_matrix("sum_axis", ta)?;
        let value = match axis {
            0 => {
                let mut out = vec![0.0; m];
                for r in ta.rows() {
                    out.iter_mut().zip(r).for_each(|(o, x)| *o += x);
                }
                Tensor::new(vec![1, m], out)?
            }
            1 => Tensor::new(vec![n, 1], ta.rows().map(|r| r.iter().sum()).collect())?,
            _ => {
                return Err(TensorError::InvalidAxis {
                    op: "sum_axis",
                    axis,
                    rank: 2,
                })
            }
        };
        self.push("sum_axis", value, Op::SumAxis { input: a, axis }, &[a])
    }

    /// Mean binary cross-entropy of `pred` against a constant `target`.
    ///
    /// Predictions are clamped to `[BCE_EPS, 1 - BCE_EPS]`; the clamp has
    /// zero gradient outside that interval.
    pub fn bce(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let tp = self.value(pred);
        if tp.shape() != target.shape() {
            return Err(mismatch("bce", tp, target));
        }
        let n = tp.numel() as f64;
        let loss = tp
            .data()
            .iter()
            .zip(target.data())
            .map(|(&p, &t)| {
                let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / n;
        let op = Op::Bce {
            pred,
            target: target.data().to_vec(),
        };
        self.push("bce", Tensor::scalar(loss), op, &[pred])
    }

    /// Scaled dot-product attention `softmax(Q K^T / sqrt(d)) V`.
    pub fn attention(&mut self, q: Var, k: Var, v: Var) -> Result<Var> {
        let (tq, tk, tv) = (self.value(q), self.value(k), self.value(v));
        let (_, dq) = require_matrix("attention", tq)?;
        let (mk, dk) = require_matrix("attention", tk)?;
        let (mv, _) = require_matrix("attention", tv)?;
        if dq != dk {
            return Err(mismatch("attention", tq, tk));
        }
        if mk != mv {
            return Err(mismatch("attention", tk, tv));
        }
        let kt = self.transpose(k)?;
        let scores = self.matmul(q, kt)?;
        let scaled = self.scalar_mul(scores, 1.0 / (dq as f64).sqrt())?;
        let weights = self.softmax(scaled, 1)?;
        self.matmul(weights, v)
    }

    /// Reverse sweep from a scalar `loss`, consuming the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).numel() != 1 {
            return Err(TensorError::NonScalarLoss(shape));
        }
        let nodes = self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..nodes.len()).rev() {
            let node = &nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let val = |v: Var| &nodes[v.0].value;
            let wants = |v: Var| nodes[v.0].needs_grad;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (n, k) = (val(*a).shape()[0], val(*a).shape()[1]);
                    let m = val(*b).shape()[1];
                    if wants(*a) {
                        accumulate(&mut grads[a.0], &matmul_nt(&g, val(*b).data(), n, m, k));
                    }
                    if wants(*b) {
                        accumulate(&mut grads[b.0], &matmul_tn(val(*a).data(), &g, n, k, m));
                    }
                }
                Op::Add(a, b) => {
                    if wants(*a) {
                        accumulate(&mut grads[a.0], &g);
                    }
                    if wants(*b) {
                        accumulate(&mut grads[b.0], &g);
                    }
                }
                Op::AddRow(a, row) => {
                    if wants(*a) {
                        accumulate(&mut grads[a.0], &g);
                    }
                    if wants(*row) {
                        let m = val(*row).numel();
                        let mut colsum = vec![0.0; m];
                        for r in g.chunks(m) {
                            colsum.iter_mut().zip(r).for_each(|(c, x)| *c += x);
                        }
                        accumulate(&mut grads[row.0], &colsum);
                    }
                }
                Op::Sub(a, b) => {
                    if wants(*a) {
                        accumulate(&mut grads[a.0], &g);
                    }
                    if wants(*b) {
                        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                        accumulate(&mut grads[b.0], &neg);
                    }
                }
                Op::Hadamard(a, b) => {
                    if wants(*a) {
                        let d: Vec<f64> = g.iter().zip(val(*b).data()).map(|(x, y)| x * y).collect();
                        accumulate(&mut grads[a.0], &d);
                    }
                    if wants(*b) {
                        let d: Vec<f64> = g.iter().zip(val(*a).data()).map(|(x, y)| x * y).collect();
                        accumulate(&mut grads[b.0], &d);
                    }
                }
                Op::ScalarMul(a, c) => {
                    let d: Vec<f64> = g.iter().map(|x| x * c).collect();
                    accumulate(&mut grads[a.0], &d);
                }
                Op::Scale(a, s) => {
                    if wants(*a) {
                        let c = val(*s).item();
                        let d: Vec<f64> = g.iter().map(|x| x * c).collect();
                        accumulate(&mut grads[a.0], &d);
                    }
                    if wants(*s) {
                        let d: f64 = g.iter().zip(val(*a).data()).map(|(x, y)| x * y).sum();
                        accumulate(&mut grads[s.0], &[d]);
                    }
                }
                Op::Concat { inputs, axis } => {
                    if *axis == 0 {
                        let mut offset = 0;
                        for v in inputs {
                            let len = val(*v).numel();
                            if wants(*v) {
                                accumulate(&mut grads[v.0], &g[offset..offset + len]);
                            }
                            offset += len;
                        }
                    } else {
                        let total = node.value.shape()[1];
                        let mut offset = 0;
                        for v in inputs {
                            let (r, c) = (val(*v).shape()[0], val(*v).shape()[1]);
                            if wants(*v) {
                                let mut d = Vec::with_capacity(r * c);
                                for i in 0..r {
                                    d.extend_from_slice(&g[i * total + offset..i * total + offset + c]);
                                }
                                accumulate(&mut grads[v.0], &d);
                            }
                            offset += c;
                        }
                    }
                }
                Op::SliceCols { input, start } => {
                    let (n, m) = (val(*input).shape()[0], val(*input).shape()[1]);
                    let w = node.value.shape()[1];
                    let mut d = vec![0.0; n * m];
                    for i in 0..n {
                        d[i * m + start..i * m + start + w].copy_from_slice(&g[i * w..(i + 1) * w]);
                    }
                    accumulate(&mut grads[input.0], &d);
                }
                Op::Reshape(a) => accumulate(&mut grads[a.0], &g),
                Op::Transpose(a) => {
                    let (r, c) = (node.value.shape()[0], node.value.shape()[1]);
                    let gt = Tensor::new(vec![r, c], g).expect("grad shape").transposed();
                    accumulate(&mut grads[a.0], gt.data());
                }
                Op::Relu(a) => {
                    let d: Vec<f64> = g
                        .iter()
                        .zip(val(*a).data())
                        .map(|(x, &inp)| if inp > 0.0 { *x } else { 0.0 })
                        .collect();
                    accumulate(&mut grads[a.0], &d);
                }
                Op::Sigmoid(a) => {
                    let d: Vec<f64> = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(x, y)| x * y * (1.0 - y))
                        .collect();
                    accumulate(&mut grads[a.0], &d);
                }
                Op::Softmax { input, axis } => {
                    let (n, m) = (node.value.shape()[0], node.value.shape()[1]);
                    let y = node.value.data();
                    let mut d = vec![0.0; n * m];
                    if *axis == 1 {
                        for i in 0..n {
                            let row = i * m..(i + 1) * m;
                            let dot: f64 = g[row.clone()].iter().zip(&y[row.clone()]).map(|(a, b)| a * b).sum();
                            for j in row {
                                d[j] = y[j] * (g[j] - dot);
                            }
                        }
                    } else {
                        for j in 0..m {
                            let dot: f64 = (0..n).map(|i| g[i * m + j] * y[i * m + j]).sum();
                            for i in 0..n {
                                d[i * m + j] = y[i * m + j] * (g[i * m + j] - dot);
                            }
                        }
                    }
                    accumulate(&mut grads[input.0], &d);
                }
                Op::LayerNorm { input, inv_std } => {
                    let (_, m) = node.value.dims2();
                    let y = node.value.data();
                    let mut d = vec![0.0; y.len()];
                    for (i, is) in inv_std.iter().enumerate() {
                        let row = i * m..(i + 1) * m;
                        let gm = g[row.clone()].iter().sum::<f64>() / m as f64;
                        let gym = g[row.clone()].iter().zip(&y[row.clone()]).map(|(a, b)| a * b).sum::<f64>()
                            / m as f64;
                        for j in row {
                            d[j] = is * (g[j] - gm - y[j] * gym);
                        }
                    }
                    accumulate(&mut grads[input.0], &d);
                }
                Op::Mean(a) => {
                    let n = val(*a).numel();
                    accumulate(&mut grads[a.0], &vec![g[0] / n as f64; n]);
                }
                Op::Sum(a) => {
                    let n = val(*a).numel();
                    accumulate(&mut grads[a.0], &vec![g[0]; n]);
                }
                Op::SumAxis { input, axis } => {
                    let (n, m) = (val(*input).shape()[0], val(*input).shape()[1]);
                    let mut d = vec![0.0; n * m];
                    for i in 0..n {
                        for j in 0..m {
                            d[i * m + j] = if *axis == 1 { g[i] } else { g[j] };
                        }
                    }
                    accumulate(&mut grads[input.0], &d);
                }
                Op::Bce { pred, target } => {
                    let p = val(*pred).data();
                    let n = p.len() as f64;
                    let d: Vec<f64> = p
                        .iter()
                        .zip(target)
                        .map(|(&p, &t)| {
                            if p <= BCE_EPS || p >= 1.0 - BCE_EPS {
                                0.0
                            } else {
                                g[0] * (-t / p + (1.0 - t) / (1.0 - p)) / n
                            }
                        })
                        .collect();
                    accumulate(&mut grads[pred.0], &d);
                }
            }
        }

        let grads = grads
            .into_iter()
            .zip(&nodes)
            .map(|(g, node)| match (&node.op, node.needs_grad, g) {
                (Op::Leaf, true, Some(g)) => {
                    Some(Tensor::new(node.value.shape().to_vec(), g).expect("grad shape"))
                }
                (Op::Leaf, true, None) => Some(Tensor::zeros(node.value.shape())),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
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

fn softmax_slice(r: &[f64]) -> impl Iterator<Item = f64> + '_ {
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = r.iter().map(|x| (x - max).exp()).sum();
    r.iter().map(move |x| (x - max).exp() / z)
}
