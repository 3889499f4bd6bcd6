//! Wengert-list tape: eager forward evaluation, reverse replay for gradients.

use crate::error::{Error, Result};

/// Handle into a [`Tape`]. Only valid for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value(usize);

const BCE_EPS: f64 = 1e-12;

#[derive(Debug)]
enum Op {
    Leaf,
    /// `[r,k] x [k,c] -> [r,c]` or `[r,k] x [k] -> [r]`.
    MatMul(Value, Value),
    Add(Value, Value),
    Mul(Value, Value),
    Sigmoid(Value),
    Tanh(Value),
    Relu(Value),
    /// `ln(x + eps)` elementwise; `eps = 0` is the plain logarithm.
    LnEps { x: Value, eps: f64 },
    Concat(Vec<Value>),
    /// Elementwise max over the pool; `winners[i]` is the pool index that
    /// supplied element `i` (lowest index on ties).
    MaxPool { xs: Vec<Value>, winners: Vec<usize> },
    /// Identity forward; backward multiplies the incoming gradient by -lambda.
    GradReverse { x: Value, lambda: f64 },
    Softmax(Value),
    /// Row `row` of a matrix as a vector.
    SelectRow { m: Value, row: usize },
    Sum(Value),
    /// Mean binary cross-entropy of `pred` against constant-treated `target`.
    Bce { pred: Value, target: Value },
    /// `-log_probs[target]` for one observed symbol.
    Nll { log_probs: Value, target: usize },
}

#[derive(Debug)]
struct Node {
    op: Op,
    shape: Vec<usize>,
    data: Vec<f64>,
    needs_grad: bool,
}

/// Append-only computation graph. Node order is creation order, which makes
/// forward values and gradient accumulation order deterministic.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

pub(crate) fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
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

    fn push(&mut self, op: Op, shape: Vec<usize>, data: Vec<f64>, needs_grad: bool) -> Value {
        self.nodes.push(Node { op, shape, data, needs_grad });
        self.grads.push(None);
        Value(self.nodes.len() - 1)
    }

    fn node(&self, v: Value) -> &Node {
        &self.nodes[v.0]
    }

    pub fn data(&self, v: Value) -> &[f64] {
        &self.node(v).data
    }

    pub fn shape(&self, v: Value) -> &[usize] {
        &self.node(v).shape
    }

    pub fn needs_grad(&self, v: Value) -> bool {
        self.node(v).needs_grad
    }

    /// Gradient accumulated by [`Tape::backward`], if any reached this node.
    pub fn grad(&self, v: Value) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    // ---- graph entry points -------------------------------------------------

    pub fn leaf(&mut self, shape: &[usize], data: &[f64], requires_grad: bool) -> Result<Value> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Precondition {
                op: "leaf",
                msg: format!("shape {:?} implies {} elements, got {}", shape, numel, data.len()),
            });
        }
        Ok(self.push(Op::Leaf, shape.to_vec(), data.to_vec(), requires_grad))
    }

    pub fn tensor(&mut self, t: &super::Tensor) -> Result<Value> {
        self.leaf(&t.shape, &t.data, t.requires_grad)
    }

    pub fn constant(&mut self, shape: &[usize], data: &[f64]) -> Result<Value> {
        self.leaf(shape, data, false)
    }

    pub fn scalar(&mut self, x: f64) -> Value {
        self.push(Op::Leaf, vec![1], vec![x], false)
    }

    pub fn zeros(&mut self, n: usize) -> Value {
        self.push(Op::Leaf, vec![n], vec![0.0; n], false)
    }

    // ---- operations ---------------------------------------------------------

    /// Matrix product. Accepts `[r,k] x [k,c]` and the matrix-vector form
    /// `[r,k] x [k]`.
    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value> {
        let (ashape, bshape) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let needs = self.needs_grad(a) || self.needs_grad(b);
        match (ashape.as_slice(), bshape.as_slice()) {
            (&[r, k], &[k2, c]) if k == k2 => {
                let (ad, bd) = (self.data(a), self.data(b));
                let mut out = vec![0.0; r * c];
                for i in 0..r {
                    for kk in 0..k {
                        let av = ad[i * k + kk];
                        if av == 0.0 {
                            continue;
                        }
                        let brow = &bd[kk * c..(kk + 1) * c];
                        let orow = &mut out[i * c..(i + 1) * c];
                        for (o, bv) in orow.iter_mut().zip(brow) {
                            *o += av * bv;
                        }
                    }
                }
                Ok(self.push(Op::MatMul(a, b), vec![r, c], out, needs))
            }
            (&[r, k], &[k2]) if k == k2 => {
                let (ad, bd) = (self.data(a), self.data(b));
                let mut out = vec![0.0; r];
                for i in 0..r {
                    let arow = &ad[i * k..(i + 1) * k];
                    out[i] = arow.iter().zip(bd).map(|(x, y)| x * y).sum();
                }
                Ok(self.push(Op::MatMul(a, b), vec![r], out, needs))
            }
            _ => Err(Error::DimensionMismatch { op: "matmul", left: ashape, right: bshape }),
        }
    }

    fn binary_same_shape(&mut self, op: &'static str, a: Value, b: Value) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::DimensionMismatch {
                op,
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value> {
        self.binary_same_shape("add", a, b)?;
        let data: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        let needs = self.needs_grad(a) || self.needs_grad(b);
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::Add(a, b), shape, data, needs))
    }

    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value> {
        self.binary_same_shape("mul", a, b)?;
        let data: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        let needs = self.needs_grad(a) || self.needs_grad(b);
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::Mul(a, b), shape, data, needs))
    }

    pub fn sigmoid(&mut self, x: Value) -> Value {
        let data: Vec<f64> = self.data(x).iter().map(|&v| stable_sigmoid(v)).collect();
        let (shape, needs) = (self.shape(x).to_vec(), self.needs_grad(x));
        self.push(Op::Sigmoid(x), shape, data, needs)
    }

    pub fn tanh(&mut self, x: Value) -> Value {
        let data: Vec<f64> = self.data(x).iter().map(|v| v.tanh()).collect();
        let (shape, needs) = (self.shape(x).to_vec(), self.needs_grad(x));
        self.push(Op::Tanh(x), shape, data, needs)
    }

    /// Rectified linear unit; the derivative at exactly zero is zero.
    pub fn relu(&mut self, x: Value) -> Value {
        let data: Vec<f64> = self.data(x).iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let (shape, needs) = (self.shape(x).to_vec(), self.needs_grad(x));
        self.push(Op::Relu(x), shape, data, needs)
    }

    pub fn ln(&mut self, x: Value) -> Result<Value> {
        self.ln_eps(x, 0.0)
    }

    /// `ln(x + eps)` elementwise; errors if any shifted element is non-positive.
    pub fn ln_eps(&mut self, x: Value, eps: f64) -> Result<Value> {
        let mut data = Vec::with_capacity(self.data(x).len());
        for &v in self.data(x) {
            let shifted = v + eps;
            if shifted <= 0.0 {
                return Err(Error::LogDomain { value: shifted });
            }
            data.push(shifted.ln());
        }
        let (shape, needs) = (self.shape(x).to_vec(), self.needs_grad(x));
        Ok(self.push(Op::LnEps { x, eps }, shape, data, needs))
    }

    /// Concatenation of one-dimensional values.
    pub fn concat(&mut self, xs: &[Value]) -> Result<Value> {
        if xs.is_empty() {
            return Err(Error::Precondition { op: "concat", msg: "empty input list".into() });
        }
        let mut data = Vec::new();
        let mut needs = false;
        for &x in xs {
            if self.shape(x).len() != 1 {
                return Err(Error::Precondition {
                    op: "concat",
                    msg: format!("expected rank-1 inputs, got shape {:?}", self.shape(x)),
                });
            }
            data.extend_from_slice(self.data(x));
            needs |= self.needs_grad(x);
        }
        let n = data.len();
        Ok(self.push(Op::Concat(xs.to_vec()), vec![n], data, needs))
    }

    /// Elementwise max over a pool of equally sized vectors. A single input
    /// passes through unchanged; ties route gradient to the lowest pool index.
    pub fn maxpool(&mut self, xs: &[Value]) -> Result<Value> {
        if xs.is_empty() {
            return Err(Error::Precondition { op: "maxpool", msg: "empty pool".into() });
        }
        let n = self.data(xs[0]).len();
        for &x in xs {
            if self.shape(x).len() != 1 || self.data(x).len() != n {
                return Err(Error::DimensionMismatch {
                    op: "maxpool",
                    left: self.shape(xs[0]).to_vec(),
                    right: self.shape(x).to_vec(),
                });
            }
        }
        let mut data = self.data(xs[0]).to_vec();
        let mut winners = vec![0usize; n];
        for (j, &x) in xs.iter().enumerate().skip(1) {
            for (i, &v) in self.data(x).iter().enumerate() {
                if v > data[i] {
                    data[i] = v;
                    winners[i] = j;
                }
            }
        }
        let needs = xs.iter().any(|&x| self.needs_grad(x));
        Ok(self.push(Op::MaxPool { xs: xs.to_vec(), winners }, vec![n], data, needs))
    }

    /// Gradient reversal: identity forward, backward scales by exactly
    /// `-lambda`.
    pub fn grad_reverse(&mut self, x: Value, lambda: f64) -> Result<Value> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Precondition {
                op: "grad_reverse",
                msg: format!("lambda must be finite and positive, got {lambda}"),
            });
        }
        let (shape, data, needs) =
            (self.shape(x).to_vec(), self.data(x).to_vec(), self.needs_grad(x));
        Ok(self.push(Op::GradReverse { x, lambda }, shape, data, needs))
    }

    /// Numerically stable softmax over a rank-1 value.
    pub fn softmax(&mut self, x: Value) -> Result<Value> {
        if self.shape(x).len() != 1 || self.data(x).is_empty() {
            return Err(Error::Precondition {
                op: "softmax",
                msg: format!("expected non-empty rank-1 input, got shape {:?}", self.shape(x)),
            });
        }
        let xd = self.data(x);
        let max = xd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xd.iter().map(|v| (v - max).exp()).collect();
        let denom: f64 = exps.iter().sum();
        let data: Vec<f64> = exps.iter().map(|e| e / denom).collect();
        let (shape, needs) = (self.shape(x).to_vec(), self.needs_grad(x));
        Ok(self.push(Op::Softmax(x), shape, data, needs))
    }

    /// Row of a rank-2 value as a rank-1 value.
    pub fn select_row(&mut self, m: Value, row: usize) -> Result<Value> {
        let shape = self.shape(m).to_vec();
        if shape.len() != 2 {
            return Err(Error::Precondition {
                op: "select_row",
                msg: format!("expected rank-2 input, got shape {shape:?}"),
            });
        }
        let (r, c) = (shape[0], shape[1]);
        if row >= r {
            return Err(Error::Precondition {
                op: "select_row",
                msg: format!("row {row} out of range for {r} rows"),
            });
        }
        let data = self.data(m)[row * c..(row + 1) * c].to_vec();
        let needs = self.needs_grad(m);
        Ok(self.push(Op::SelectRow { m, row }, vec![c], data, needs))
    }

    /// Sum of all elements, as a scalar-shaped value.
    pub fn sum(&mut self, x: Value) -> Value {
        let total: f64 = self.data(x).iter().sum();
        let needs = self.needs_grad(x);
        self.push(Op::Sum(x), vec![1], vec![total], needs)
    }

    /// Mean binary cross-entropy. Predictions are clamped to
    /// `[1e-12, 1 - 1e-12]` in both forward and backward passes.
    pub fn bce_loss(&mut self, pred: Value, target: Value) -> Result<Value> {
        self.binary_same_shape("bce_loss", pred, target)?;
        if self.shape(pred).len() != 1 {
            return Err(Error::Precondition {
                op: "bce_loss",
                msg: format!("expected rank-1 inputs, got shape {:?}", self.shape(pred)),
            });
        }
        let n = self.data(pred).len() as f64;
        let mut total = 0.0;
        for (&p, &t) in self.data(pred).iter().zip(self.data(target)) {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        }
        let needs = self.needs_grad(pred) || self.needs_grad(target);
        Ok(self.push(Op::Bce { pred, target }, vec![1], vec![total / n], needs))
    }

    /// Negative log-likelihood of one target index under given log
    /// probabilities.
    pub fn nll_loss(&mut self, log_probs: Value, target: usize) -> Result<Value> {
        if self.shape(log_probs).len() != 1 {
            return Err(Error::Precondition {
                op: "nll_loss",
                msg: format!("expected rank-1 input, got shape {:?}", self.shape(log_probs)),
            });
        }
        let n = self.data(log_probs).len();
        if target >= n {
            return Err(Error::UnknownId { id: target, size: n });
        }
        let loss = -self.data(log_probs)[target];
        let needs = self.needs_grad(log_probs);
        Ok(self.push(Op::Nll { log_probs, target }, vec![1], vec![loss], needs))
    }

    // ---- reverse pass -------------------------------------------------------

    fn add_grad(&mut self, v: Value, contrib: &[f64]) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        let n = self.nodes[v.0].data.len();
        let slot = self.grads[v.0].get_or_insert_with(|| vec![0.0; n]);
        for (s, c) in slot.iter_mut().zip(contrib) {
            *s += c;
        }
    }

    /// Reverse replay from a scalar root. Gradients accumulate into every
    /// reachable node with `needs_grad`; repeated calls keep accumulating.
    pub fn backward(&mut self, root: Value) -> Result<()> {
        if self.nodes[root.0].data.len() != 1 {
            return Err(Error::Precondition {
                op: "backward",
                msg: format!("root must be scalar, got shape {:?}", self.shape(root)),
            });
        }
        if !self.nodes[root.0].needs_grad {
            return Ok(());
        }
        self.add_grad(root, &[1.0]);
        for idx in (0..=root.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = self.grads[idx].clone() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf => {}
                &Op::MatMul(a, b) => {
                    let ashape = self.shape(a).to_vec();
                    let (r, k) = (ashape[0], ashape[1]);
                    let c = if self.shape(b).len() == 2 { self.shape(b)[1] } else { 1 };
                    let (ad, bd) = (self.data(a).to_vec(), self.data(b).to_vec());
                    if self.needs_grad(a) {
                        let mut ga = vec![0.0; r * k];
                        for i in 0..r {
                            for j in 0..k {
                                let mut acc = 0.0;
                                for cc in 0..c {
                                    acc += g[i * c + cc] * bd[j * c + cc];
                                }
                                ga[i * k + j] = acc;
                            }
                        }
                        self.add_grad(a, &ga);
                    }
                    if self.needs_grad(b) {
                        let mut gb = vec![0.0; k * c];
                        for i in 0..r {
                            for j in 0..k {
                                let av = ad[i * k + j];
                                if av == 0.0 {
                                    continue;
                                }
                                for cc in 0..c {
                                    gb[j * c + cc] += av * g[i * c + cc];
                                }
                            }
                        }
                        self.add_grad(b, &gb);
                    }
                }
                &Op::Add(a, b) => {
                    self.add_grad(a, &g);
                    self.add_grad(b, &g);
                }
                &Op::Mul(a, b) => {
                    let ga: Vec<f64> = g.iter().zip(self.data(b)).map(|(gi, bi)| gi * bi).collect();
                    let gb: Vec<f64> = g.iter().zip(self.data(a)).map(|(gi, ai)| gi * ai).collect();
                    self.add_grad(a, &ga);
                    self.add_grad(b, &gb);
                }
                &Op::Sigmoid(x) => {
                    let y = &self.nodes[idx].data;
                    let gx: Vec<f64> =
                        g.iter().zip(y).map(|(gi, yi)| gi * yi * (1.0 - yi)).collect();
                    self.add_grad(x, &gx);
                }
                &Op::Tanh(x) => {
                    let y = &self.nodes[idx].data;
                    let gx: Vec<f64> = g.iter().zip(y).map(|(gi, yi)| gi * (1.0 - yi * yi)).collect();
                    self.add_grad(x, &gx);
                }
                &Op::Relu(x) => {
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(self.data(x))
                        .map(|(gi, &xi)| if xi > 0.0 { *gi } else { 0.0 })
                        .collect();
                    self.add_grad(x, &gx);
                }
                &Op::LnEps { x, eps } => {
                    let gx: Vec<f64> =
                        g.iter().zip(self.data(x)).map(|(gi, xi)| gi / (xi + eps)).collect();
                    self.add_grad(x, &gx);
                }
                Op::Concat(xs) => {
                    let xs = xs.clone();
                    let mut offset = 0;
                    for x in xs {
                        let n = self.data(x).len();
                        let seg = g[offset..offset + n].to_vec();
                        self.add_grad(x, &seg);
                        offset += n;
                    }
                }
                Op::MaxPool { xs, winners } => {
                    let (xs, winners) = (xs.clone(), winners.clone());
                    let n = g.len();
                    for (j, x) in xs.iter().enumerate() {
                        let gx: Vec<f64> =
                            (0..n).map(|i| if winners[i] == j { g[i] } else { 0.0 }).collect();
                        self.add_grad(*x, &gx);
                    }
                }
                &Op::GradReverse { x, lambda } => {
                    let gx: Vec<f64> = g.iter().map(|gi| -lambda * gi).collect();
                    self.add_grad(x, &gx);
                }
                &Op::Softmax(x) => {
                    let y = &self.nodes[idx].data;
                    let dot: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    let gx: Vec<f64> = g.iter().zip(y).map(|(gi, yi)| yi * (gi - dot)).collect();
                    self.add_grad(x, &gx);
                }
                &Op::SelectRow { m, row } => {
                    let c = g.len();
                    let total = self.data(m).len();
                    let mut gm = vec![0.0; total];
                    gm[row * c..(row + 1) * c].copy_from_slice(&g);
                    self.add_grad(m, &gm);
                }
                &Op::Sum(x) => {
                    let n = self.data(x).len();
                    let gx = vec![g[0]; n];
                    self.add_grad(x, &gx);
                }
                &Op::Bce { pred, target } => {
                    let n = self.data(pred).len() as f64;
                    let g0 = g[0];
                    let pd = self.data(pred).to_vec();
                    let td = self.data(target).to_vec();
                    if self.needs_grad(pred) {
                        let gp: Vec<f64> = pd
                            .iter()
                            .zip(&td)
                            .map(|(&p, &t)| {
                                let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                                g0 * ((1.0 - t) / (1.0 - p) - t / p) / n
                            })
                            .collect();
                        self.add_grad(pred, &gp);
                    }
                    if self.needs_grad(target) {
                        let gt: Vec<f64> = pd
                            .iter()
                            .map(|&p| {
                                let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                                g0 * ((1.0 - p).ln() - p.ln()) / n
                            })
                            .collect();
                        self.add_grad(target, &gt);
                    }
                }
                &Op::Nll { log_probs, target } => {
                    let n = self.data(log_probs).len();
                    let mut gx = vec![0.0; n];
                    gx[target] = -g[0];
                    self.add_grad(log_probs, &gx);
                }
            }
        }
        Ok(())
    }
}
