//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the node vector is already a
//! topological order and `backward` is a single reverse sweep.

use std::borrow::Cow;

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    SliceStep(Var, usize),
    Lookup(Var, Vec<usize>),
    Dropout(Var, Vec<f64>),
    SoftmaxXent {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    Sum(Var),
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor>,
    grad: Option<Tensor>,
    requires_grad: bool,
    op: Op,
}

/// A computation graph. Leaves may borrow their tensors, so parameters are
/// never copied in to build a forward pass.
#[derive(Debug)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
    training: bool,
}

/// How the second operand of an elementwise op lines up with the first.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    /// Second operand is one row, repeated over every leading index.
    Row,
}

impl<'a> Graph<'a> {
    pub fn new(training: bool) -> Self {
        Graph {
            nodes: Vec::new(),
            training,
        }
    }

    pub fn training(&self) -> bool {
        self.training
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor>, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, value: Tensor, inputs: &[Var], op: Op) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Cow::Owned(value), requires_grad, op)
    }

    /// Trainable leaf borrowing `t`.
    pub fn param(&mut self, t: &'a Tensor) -> Var {
        self.push(Cow::Borrowed(t), true, Op::Leaf)
    }

    pub fn param_owned(&mut self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), true, Op::Leaf)
    }

    /// Non-trainable leaf borrowing `t`.
    pub fn constant(&mut self, t: &'a Tensor) -> Var {
        self.push(Cow::Borrowed(t), false, Op::Leaf)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Gradient of `v`, or zeros when nothing flowed into it.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        self.grad(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(self.value(v).shape()))
    }

    pub fn take_grad(&mut self, v: Var) -> Tensor {
        let shape = self.value(v).shape().to_vec();
        self.nodes[v.0]
            .grad
            .take()
            .unwrap_or_else(|| Tensor::zeros(&shape))
    }

    fn shape_of(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (sa, sb) = (self.shape_of(a), self.shape_of(b));
        if sa == sb {
            return Ok(Broadcast::Same);
        }
        let (ta, tb) = (self.value(a), self.value(b));
        if tb.len() == ta.last_dim() && tb.last_dim() == ta.last_dim() {
            return Ok(Broadcast::Row);
        }
        Err(Error::shape(op, format!("{sa:?} vs {sb:?}")))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape_of(a), self.shape_of(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            (k, 1),
            self.value(b).data(),
            (n, 1),
            &mut out,
        );
        Ok(self.push_op(Tensor::new(vec![m, n], out)?, &[a, b], Op::MatMul(a, b)))
    }

    fn zip(&self, a: Var, b: Var, mode: Broadcast, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let cols = ta.last_dim();
        let data = match mode {
            Broadcast::Same => ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect(),
            Broadcast::Row => ta
                .data()
                .chunks(cols)
                .flat_map(|row| row.iter().zip(tb.data()).map(|(&x, &y)| f(x, y)))
                .collect::<Vec<_>>(),
        };
        Tensor::new(ta.shape().to_vec(), data).expect("zip preserves shape")
    }

    /// `a + b`; `b` may be a single row broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let mode = self.broadcast("add", a, b)?;
        let out = self.zip(a, b, mode, |x, y| x + y);
        Ok(self.push_op(out, &[a, b], Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let mode = self.broadcast("sub", a, b)?;
        let out = self.zip(a, b, mode, |x, y| x - y);
        Ok(self.push_op(out, &[a, b], Op::Sub(a, b)))
    }

    /// Elementwise product; `b` may be a single row broadcast over `a`.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let mode = self.broadcast("elementwise_mul", a, b)?;
        let out = self.zip(a, b, mode, |x, y| x * y);
        Ok(self.push_op(out, &[a, b], Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x * c);
        self.push_op(out, &[a], Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push_op(out, &[a], Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push_op(out, &[a], Op::Tanh(a))
    }

    /// Concatenates 2-D tensors with equal row counts along the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat", "no inputs"))?;
        let rows = self.shape_of(*first)[0];
        for p in parts {
            let s = self.shape_of(*p);
            if s.len() != 2 || s[0] != rows {
                let shapes: Vec<_> = parts.iter().map(|p| self.shape_of(*p).to_vec()).collect();
                return Err(Error::shape("concat", format!("{shapes:?}")));
            }
        }
        let widths: Vec<usize> = parts.iter().map(|p| self.shape_of(*p)[1]).collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                out.extend_from_slice(self.value(*p).row(r));
            }
        }
        let t = Tensor::new(vec![rows, total], out)?;
        Ok(self.push_op(t, parts, Op::Concat(parts.to_vec())))
    }

    /// Stacks `T` tensors of shape `[B, H]` into `[B, T, H]`.
    pub fn stack(&mut self, steps: &[Var]) -> Result<Var> {
        let first = steps
            .first()
            .ok_or_else(|| Error::shape("stack", "no inputs"))?;
        let s0 = self.shape_of(*first).to_vec();
        if s0.len() != 2 || steps.iter().any(|v| self.shape_of(*v) != s0.as_slice()) {
            return Err(Error::shape("stack", format!("steps must all be {s0:?}")));
        }
        let (b, h, t) = (s0[0], s0[1], steps.len());
        let mut out = vec![0.0; b * t * h];
        for (i, v) in steps.iter().enumerate() {
            let val = self.value(*v);
            for r in 0..b {
                out[(r * t + i) * h..(r * t + i + 1) * h].copy_from_slice(val.row(r));
            }
        }
        let tensor = Tensor::new(vec![b, t, h], out)?;
        Ok(self.push_op(tensor, steps, Op::Stack(steps.to_vec())))
    }

    /// Selects step `i` of a `[B, T, H]` tensor.
    pub fn slice_step(&mut self, x: Var, i: usize) -> Result<Var> {
        let s = self.shape_of(x).to_vec();
        if s.len() != 3 || i >= s[1] {
            return Err(Error::shape("slice_step", format!("step {i} of {s:?}")));
        }
        let (b, t, h) = (s[0], s[1], s[2]);
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(b * h);
        for r in 0..b {
            out.extend_from_slice(&src[(r * t + i) * h..(r * t + i + 1) * h]);
        }
        let tensor = Tensor::new(vec![b, h], out)?;
        Ok(self.push_op(tensor, &[x], Op::SliceStep(x, i)))
    }

    pub fn slice_last_step(&mut self, x: Var) -> Result<Var> {
        let s = self.shape_of(x);
        if s.len() != 3 || s[1] == 0 {
            return Err(Error::shape("slice_last_step", format!("{s:?}")));
        }
        let last = s[1] - 1;
        self.slice_step(x, last)
    }

    /// Gathers rows of a `[V, D]` table.
    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let s = self.shape_of(table);
        if s.len() != 2 {
            return Err(Error::shape("embedding_lookup", format!("table {s:?}")));
        }
        let (v, d) = (s[0], s[1]);
        if let Some(bad) = ids.iter().find(|&&id| id >= v) {
            return Err(Error::shape(
                "embedding_lookup",
                format!("id {bad} out of range for table {s:?}"),
            ));
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            out.extend_from_slice(tv.row(id));
        }
        let tensor = Tensor::new(vec![ids.len(), d], out)?;
        Ok(self.push_op(tensor, &[table], Op::Lookup(table, ids.to_vec())))
    }

    /// Inverted dropout: keeps each entry with probability `keep` and scales
    /// survivors by `1/keep`. Returns `x` itself outside training mode.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, keep: f64, rng: &mut R) -> Result<Var> {
        if !(keep > 0.0 && keep <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "dropout keep probability {keep} not in (0, 1]"
            )));
        }
        if !self.training || keep == 1.0 {
            return Ok(x);
        }
        let n = self.value(x).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let xv = self.value(x);
        let data = xv.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let out = Tensor::new(xv.shape().to_vec(), data)?;
        Ok(self.push_op(out, &[x], Op::Dropout(x, mask)))
    }

    /// Mean softmax cross-entropy of `[B, C]` logits against class labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.shape_of(logits);
        if s.len() != 2 || s[0] != labels.len() || s[0] == 0 {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("logits {s:?} vs {} labels", labels.len()),
            ));
        }
        let c = s[1];
        if let Some(bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("label {bad} with {c} classes"),
            ));
        }
        let lv = self.value(logits);
        let mut probs = Vec::with_capacity(lv.len());
        let mut loss = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = lv.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = row.iter().map(|z| (z - max).exp()).sum();
            let log_denom = denom.ln();
            loss -= row[label] - max - log_denom;
            probs.extend(row.iter().map(|z| (z - max).exp() / denom));
        }
        let out = Tensor::scalar(loss / labels.len() as f64);
        Ok(self.push_op(
            out,
            &[logits],
            Op::SoftmaxXent {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().sum();
        self.push_op(Tensor::scalar(total), &[x], Op::Sum(x))
    }

    /// Populates gradients of every trainable node reachable from `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.shape_of(loss);
        if shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarLoss(shape.to_vec()));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let seed = Tensor::full(&self.shape_of(loss).to_vec(), 1.0);
        accumulate(&mut self.nodes[loss.0].grad, seed);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad || self.nodes[i].grad.is_none() {
                continue;
            }
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            self.backprop_node(i, &op);
            self.nodes[i].op = op;
        }
        Ok(())
    }

    fn send(&mut self, to: Var, contribution: Tensor) {
        if self.nodes[to.0].requires_grad {
            accumulate(&mut self.nodes[to.0].grad, contribution);
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn backprop_node(&mut self, i: usize, op: &Op) {
        // Temporarily move the upstream gradient out so inputs can be written.
        let g = self.nodes[i].grad.take().expect("checked by caller");
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape_of(a).to_vec(), self.shape_of(b).to_vec());
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                if self.wants(a) {
                    // dA = dC · Bᵀ
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), (n, 1), self.value(b).data(), (1, n), &mut da);
                    self.send(a, Tensor::new(sa, da).expect("shape"));
                }
                if self.wants(b) {
                    // dB = Aᵀ · dC
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, self.value(a).data(), (1, k), g.data(), (n, 1), &mut db);
                    self.send(b, Tensor::new(sb, db).expect("shape"));
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if self.wants(b) {
                    let gb = self.reduce_like(b, &g);
                    self.send(b, if sign < 0.0 { gb.map(|v| -v) } else { gb });
                }
                if self.wants(a) {
                    self.send(a, g.clone());
                }
            }
            Op::Mul(a, b) => {
                let mode = if self.shape_of(a) == self.shape_of(b) {
                    Broadcast::Same
                } else {
                    Broadcast::Row
                };
                if self.wants(a) {
                    let bv = self.value(b);
                    let cols = g.last_dim();
                    let data: Vec<f64> = match mode {
                        Broadcast::Same => g.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect(),
                        Broadcast::Row => g
                            .data()
                            .chunks(cols)
                            .flat_map(|row| row.iter().zip(bv.data()).map(|(x, y)| x * y))
                            .collect(),
                    };
                    self.send(a, Tensor::new(g.shape().to_vec(), data).expect("shape"));
                }
                if self.wants(b) {
                    let av = self.value(a);
                    let prod: Vec<f64> = g.data().iter().zip(av.data()).map(|(x, y)| x * y).collect();
                    let prod = Tensor::new(g.shape().to_vec(), prod).expect("shape");
                    let gb = self.reduce_like(b, &prod);
                    self.send(b, gb);
                }
            }
            Op::Scale(a, c) => self.send(a, g.map(|v| v * c)),
            Op::Sigmoid(a) => {
                let out = &self.nodes[i].value;
                let data = g
                    .data()
                    .iter()
                    .zip(out.data())
                    .map(|(gv, y)| gv * y * (1.0 - y))
                    .collect();
                let t = Tensor::new(g.shape().to_vec(), data).expect("shape");
                self.send(a, t);
            }
            Op::Tanh(a) => {
                let out = &self.nodes[i].value;
                let data = g
                    .data()
                    .iter()
                    .zip(out.data())
                    .map(|(gv, y)| gv * (1.0 - y * y))
                    .collect();
                let t = Tensor::new(g.shape().to_vec(), data).expect("shape");
                self.send(a, t);
            }
            Op::Concat(ref parts) => {
                let rows = g.shape()[0];
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape_of(p)[1];
                    if self.wants(p) {
                        let mut d = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            d.extend_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        self.send(p, Tensor::new(vec![rows, w], d).expect("shape"));
                    }
                    offset += w;
                }
            }
            Op::Stack(ref steps) => {
                let (b, t, h) = (g.shape()[0], g.shape()[1], g.shape()[2]);
                for (s, &v) in steps.iter().enumerate() {
                    if !self.wants(v) {
                        continue;
                    }
                    let mut d = Vec::with_capacity(b * h);
                    for r in 0..b {
                        d.extend_from_slice(&g.data()[(r * t + s) * h..(r * t + s + 1) * h]);
                    }
                    self.send(v, Tensor::new(vec![b, h], d).expect("shape"));
                }
            }
            Op::SliceStep(x, s) => {
                let shape = self.shape_of(x).to_vec();
                let (b, t, h) = (shape[0], shape[1], shape[2]);
                let mut d = vec![0.0; b * t * h];
                for r in 0..b {
                    d[(r * t + s) * h..(r * t + s + 1) * h].copy_from_slice(g.row(r));
                }
                self.send(x, Tensor::new(shape, d).expect("shape"));
            }
            Op::Lookup(table, ref ids) => {
                let shape = self.shape_of(table).to_vec();
                let mut d = Tensor::zeros(&shape);
                for (r, &id) in ids.iter().enumerate() {
                    for (acc, v) in d.row_mut(id).iter_mut().zip(g.row(r)) {
                        *acc += v;
                    }
                }
                self.send(table, d);
            }
            Op::Dropout(x, ref mask) => {
                let data = g.data().iter().zip(mask).map(|(a, m)| a * m).collect();
                self.send(x, Tensor::new(g.shape().to_vec(), data).expect("shape"));
            }
            Op::SoftmaxXent {
                logits,
                ref labels,
                ref probs,
            } => {
                let shape = self.shape_of(logits).to_vec();
                let c = shape[1];
                let scale = g.item() / labels.len() as f64;
                let mut d = probs.clone();
                for (r, &l) in labels.iter().enumerate() {
                    d[r * c + l] -= 1.0;
                }
                d.iter_mut().for_each(|v| *v *= scale);
                self.send(logits, Tensor::new(shape, d).expect("shape"));
            }
            Op::Sum(x) => {
                let shape = self.shape_of(x).to_vec();
                self.send(x, Tensor::full(&shape, g.item()));
            }
        }
        self.nodes[i].grad = Some(g);
    }

    /// Sums `g` down to the shape of `target` (undoing a row broadcast).
    fn reduce_like(&self, target: Var, g: &Tensor) -> Tensor {
        let shape = self.shape_of(target);
        if shape == g.shape() {
            return g.clone();
        }
        let cols = g.last_dim();
        let mut out = vec![0.0; cols];
        for row in g.data().chunks(cols) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        Tensor::new(shape.to_vec(), out).expect("row broadcast")
    }
}

fn accumulate(slot: &mut Option<Tensor>, contribution: Tensor) {
    match slot {
        Some(existing) => existing.add_assign(&contribution),
        None => *slot = Some(contribution),
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

/// `c = a · b` for an `m×k` by `k×n` product, with explicit (row, col) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k > 0 {
        assert!(a.len() >= (m - 1) * rsa + (k - 1) * csa + 1);
        assert!(b.len() >= (k - 1) * rsb + (n - 1) * csb + 1);
    }
    // SAFETY: the asserts above bound every index dgemm touches through the
    // given strides; `c` is exclusively borrowed and disjoint from `a`, `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_of_zero_is_half() {
        let z = Tensor::scalar(0.0);
        let mut g = Graph::new(false);
        let x = g.constant(&z);
        let y = g.sigmoid(x);
        assert_eq!(g.value(y).item(), 0.5);
    }

    #[test]
    fn multiplying_by_zeros_annihilates_value_and_gradient() {
        let x = Tensor::vector(vec![1.5, -2.0, 0.3]);
        let zeros = Tensor::zeros(&[3]);
        let mut g = Graph::new(true);
        let xv = g.param(&x);
        let zv = g.constant(&zeros);
        let y = g.mul(xv, zv).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
        let loss = g.sum(y);
        g.backward(loss).unwrap();
        assert!(g.grad_or_zeros(xv).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_logits_cost_ln2() {
        let logits = Tensor::new(vec![1, 2], vec![0.0, 0.0]).unwrap();
        let mut g = Graph::new(false);
        let l = g.constant(&logits);
        let loss = g.softmax_cross_entropy(l, &[0]).unwrap();
        assert_abs_diff_eq!(g.value(loss).item(), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let x = Tensor::vector(vec![3.0, -1.0, 2.0]);
        let mut g = Graph::new(true);
        let xv = g.param(&x);
        let loss = g.sum(xv);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(xv).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn sigmoid_slope_at_zero_is_quarter() {
        let w = Tensor::scalar(0.0);
        let c = 3.0;
        let mut g = Graph::new(true);
        let wv = g.param(&w);
        let s = g.sigmoid(wv);
        let loss = g.scale(s, c);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(wv).unwrap().item(), 0.25 * c);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let x = Tensor::vector(vec![1.0, 2.0]);
        let mut g = Graph::new(true);
        let xv = g.param(&x);
        let y = g.tanh(xv);
        assert!(matches!(g.backward(y), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn shape_errors_name_the_primitive() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let mut g = Graph::new(false);
        let (av, bv) = (g.constant(&a), g.constant(&b));
        let err = g.matmul(av, bv).unwrap_err().to_string();
        assert!(err.contains("matmul") && err.contains("[2, 3]"), "{err}");
        let c = Tensor::zeros(&[4]);
        let cv = g.constant(&c);
        let err = g.add(av, cv).unwrap_err().to_string();
        assert!(err.starts_with("add"), "{err}");
    }

    #[test]
    fn reused_input_accumulates_both_paths() {
        // y = x*x + 2x  =>  dy/dx = 2x + 2
        let x = Tensor::vector(vec![0.5, -1.5]);
        let mut g = Graph::new(true);
        let xv = g.param(&x);
        let sq = g.mul(xv, xv).unwrap();
        let two_x = g.scale(xv, 2.0);
        let y = g.add(sq, two_x).unwrap();
        let loss = g.sum(y);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(xv).unwrap().data(), &[3.0, -1.0]);
    }

    #[test]
    fn eval_dropout_returns_the_same_node() {
        let x = Tensor::vector(vec![1.0, 2.0, 3.0]);
        let mut g = Graph::new(false);
        let xv = g.constant(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = g.dropout(xv, 0.5, &mut rng).unwrap();
        assert_eq!(y, xv);
        assert!(g.value(y).bit_eq(&x));
    }

    #[test]
    fn train_dropout_zeroes_or_rescales() {
        let x = Tensor::full(&[1000], 1.0);
        let mut g = Graph::new(true);
        let xv = g.constant(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = g.dropout(xv, 0.5, &mut rng).unwrap();
        let vals = g.value(y).data();
        assert!(vals.iter().all(|&v| v == 0.0 || v == 2.0));
        let kept = vals.iter().filter(|&&v| v == 2.0).count();
        assert!((400..600).contains(&kept));
    }

    #[test]
    fn stack_and_slice_are_inverse() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::new(vec![2, 2], vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let mut g = Graph::new(false);
        let (av, bv) = (g.constant(&a), g.constant(&b));
        let s = g.stack(&[av, bv]).unwrap();
        assert_eq!(g.value(s).shape(), &[2, 2, 2]);
        let first = g.slice_step(s, 0).unwrap();
        let last = g.slice_last_step(s).unwrap();
        assert_eq!(g.value(first), &a);
        assert_eq!(g.value(last), &b);
    }

    #[test]
    fn row_broadcast_mul_over_steps() {
        let x = Tensor::new(vec![1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let m = Tensor::vector(vec![1.0, 0.0, 1.0]);
        let mut g = Graph::new(false);
        let (xv, mv) = (g.constant(&x), g.constant(&m));
        let y = g.mul(xv, mv).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 0.0, 3.0, 4.0, 0.0, 6.0]);
    }

    #[test]
    fn lookup_rejects_out_of_range() {
        let t = Tensor::zeros(&[3, 2]);
        let mut g = Graph::new(false);
        let tv = g.constant(&t);
        assert!(g.embedding_lookup(tv, &[3]).is_err());
    }
}
