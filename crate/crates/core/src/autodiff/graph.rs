//! Tape of recorded tensor operations and the reverse pass over it.
//!
//! Every operation appends a node whose inputs were recorded before it, so
//! node order is already a topological order and the backward pass is a
//! single reverse sweep.

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Floor applied inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;
/// Minimum vector norm accepted by cosine distance.
pub const NORM_FLOOR: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Handle to a node recorded in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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
    AddRow(Var, Var),
    MulCol(Var, Var),
    Affine(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Softmax { input: Var, tau: f64 },
    ConcatCols(Var, Var),
    SliceCols { input: Var, start: usize },
    ConcatRows(Vec<Var>),
    SliceRows { input: Var, start: usize },
    Gather { table: Var, ids: Vec<usize> },
    Sum(Var),
    Mean(Var),
    GruGates { xw: Var, hw: Var, h: Var, cache: Box<GruCache> },
    CrossEntropyLogits { logits: Var, rows: Vec<(usize, usize)>, probs: Vec<f64> },
    NllProbs { probs: Var, rows: Vec<(usize, usize)> },
    CosineRows(Var, Var),
    GaussianNllRows { x: Var, mu: Var, logvar: Var },
    KlRows { mu1: Var, lv1: Var, mu2: Var, lv2: Var },
}

#[derive(Debug)]
struct GruCache {
    reset: Vec<f64>,
    update: Vec<f64>,
    candidate: Vec<f64>,
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations for one forward pass and differentiates them.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
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

/// Row-wise `softmax(row / tau)` with max subtraction, written into `out`.
pub(crate) fn softmax_row(row: &[f64], tau: f64, out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = ((x - max) / tau).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn check_mask_rows(
    value: &Tensor,
    targets: &[usize],
    mask: &[bool],
) -> Result<Vec<(usize, usize)>> {
    let t = value.rows();
    let v = value.cols();
    if targets.len() != t || mask.len() != t {
        return Err(Error::Shape {
            op: "cross_entropy",
            lhs: value.shape().to_vec(),
            rhs: vec![targets.len(), mask.len()],
        });
    }
    let mut rows = Vec::new();
    for (i, (&tgt, &m)) in targets.iter().zip(mask).enumerate() {
        if m {
            if tgt >= v {
                return Err(Error::Index {
                    index: tgt,
                    size: v,
                });
            }
            rows.push((i, tgt));
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(rows)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records an input tensor.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Copies the current value of `v` into a new constant, cutting the
    /// gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Gradient of the last backward pass with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.grads.get(v.0).and_then(|g| {
            g.as_ref().map(|data| {
                Tensor::from_parts(self.nodes[v.0].value.shape().to_vec(), data.clone())
            })
        })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if tb.rank() != 2 || ta.cols() != tb.rows() {
            return Err(shape_err("matmul", ta, tb));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), false, &mut out, 0.0);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), rg))
    }

    fn zip_same(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let shape = ta.shape().to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(shape, data), op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a bias row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.len() != ta.cols() {
            return Err(shape_err("add_row", ta, tb));
        }
        let c = ta.cols();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + tb.data()[i % c])
            .collect();
        let shape = ta.shape().to_vec();
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(Tensor::from_parts(shape, data), Op::AddRow(a, bias), rg))
    }

    /// Scales row `i` of `a` by `w[i]`.
    pub fn mul_col(&mut self, a: Var, w: Var) -> Result<Var> {
        let (ta, tw) = (self.value(a), self.value(w));
        if tw.len() != ta.rows() {
            return Err(shape_err("mul_col", ta, tw));
        }
        let c = ta.cols();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x * tw.data()[i / c])
            .collect();
        let shape = ta.shape().to_vec();
        let rg = self.rg(a) || self.rg(w);
        Ok(self.push(Tensor::from_parts(shape, data), Op::MulCol(a, w), rg))
    }

    /// `scale * a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| scale * x + shift).collect();
        let shape = ta.shape().to_vec();
        let rg = self.rg(a);
        self.push(Tensor::from_parts(shape, data), Op::Affine(a, scale), rg)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let shape = ta.shape().to_vec();
        let rg = self.rg(a);
        self.push(Tensor::from_parts(shape, data), op, rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    /// Natural log with the argument clamped at [`LOG_FLOOR`].
    pub fn log(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(LOG_FLOOR).ln(), Op::Log(a))
    }

    /// Row-wise `softmax(logits / tau)`.
    pub fn softmax(&mut self, logits: Var, tau: f64) -> Result<Var> {
        if !(tau > 0.0) {
            return Err(Error::Domain(format!("temperature must be positive, got {tau}")));
        }
        let t = self.value(logits);
        let c = t.cols();
        let mut out = vec![0.0; t.len()];
        for (row, o) in t.data().chunks(c).zip(out.chunks_mut(c)) {
            softmax_row(row, tau, o);
        }
        let shape = t.shape().to_vec();
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::Softmax { input: logits, tau },
            rg,
        ))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(shape_err("concat_cols", ta, tb));
        }
        let (m, p, q) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            out.extend_from_slice(ta.row(i));
            out.extend_from_slice(tb.row(i));
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(vec![m, p + q], out), Op::ConcatCols(a, b), rg))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ta = self.value(a);
        if len == 0 || start + len > ta.cols() {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: ta.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let m = ta.rows();
        let mut out = Vec::with_capacity(m * len);
        for i in 0..m {
            out.extend_from_slice(&ta.row(i)[start..start + len]);
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::from_parts(vec![m, len], out),
            Op::SliceCols { input: a, start },
            rg,
        ))
    }

    /// Stacks matrices with equal column counts vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Invalid("concat_rows of nothing".into()))?;
        let c = self.value(*first).cols();
        let mut out = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != c {
                return Err(shape_err("concat_rows", self.value(*first), t));
            }
            rows += t.rows();
            out.extend_from_slice(t.data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Tensor::from_parts(vec![rows, c], out),
            Op::ConcatRows(parts.to_vec()),
            rg,
        ))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ta = self.value(a);
        if len == 0 || start + len > ta.rows() {
            return Err(Error::Shape {
                op: "slice_rows",
                lhs: ta.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let c = ta.cols();
        let out = ta.data()[start * c..(start + len) * c].to_vec();
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::from_parts(vec![len, c], out),
            Op::SliceRows { input: a, start },
            rg,
        ))
    }

    /// Row lookup: output row `i` is `table[ids[i]]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let (v, e) = (t.rows(), t.cols());
        let mut out = Vec::with_capacity(ids.len() * e);
        for &id in ids {
            if id >= v {
                return Err(Error::Index { index: id, size: v });
            }
            out.extend_from_slice(t.row(id));
        }
        if ids.is_empty() {
            return Err(Error::Invalid("gather with no ids".into()));
        }
        let rg = self.rg(table);
        Ok(self.push(
            Tensor::from_parts(vec![ids.len(), e], out),
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    /// GRU update from pre-activations `xw = x Wx + bx` and `hw = h Wh + bh`,
    /// each laid out as `[reset | update | candidate]` blocks of width `h`.
    pub fn gru_gates(&mut self, xw: Var, hw: Var, h: Var) -> Result<Var> {
        let (txw, thw, th) = (self.value(xw), self.value(hw), self.value(h));
        if txw.shape() != thw.shape() {
            return Err(shape_err("gru_gates", txw, thw));
        }
        let (b, hd) = (th.rows(), th.cols());
        if txw.rows() != b || txw.cols() != 3 * hd {
            return Err(shape_err("gru_gates", txw, th));
        }
        let n = b * hd;
        let mut reset = vec![0.0; n];
        let mut update = vec![0.0; n];
        let mut cand = vec![0.0; n];
        let mut out = vec![0.0; n];
        for i in 0..b {
            let xr = txw.row(i);
            let hr = thw.row(i);
            let hprev = th.row(i);
            for j in 0..hd {
                let r = sigmoid(xr[j] + hr[j]);
                let u = sigmoid(xr[hd + j] + hr[hd + j]);
                let c = (xr[2 * hd + j] + r * hr[2 * hd + j]).tanh();
                let k = i * hd + j;
                reset[k] = r;
                update[k] = u;
                cand[k] = c;
                out[k] = (1.0 - u) * c + u * hprev[j];
            }
        }
        let rg = self.rg(xw) || self.rg(hw) || self.rg(h);
        Ok(self.push(
            Tensor::from_parts(vec![b, hd], out),
            Op::GruGates {
                xw,
                hw,
                h,
                cache: Box::new(GruCache {
                    reset,
                    update,
                    candidate: cand,
                }),
            },
            rg,
        ))
    }

    /// Mean over unmasked rows of `-log softmax(logits)[target]`.
    pub fn cross_entropy_logits(
        &mut self,
        logits: Var,
        targets: &[usize],
        mask: &[bool],
    ) -> Result<Var> {
        let t = self.value(logits);
        let rows = check_mask_rows(t, targets, mask)?;
        let c = t.cols();
        let mut probs = vec![0.0; rows.len() * c];
        let mut total = 0.0;
        for (k, &(i, tgt)) in rows.iter().enumerate() {
            let row = t.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
            total += lse - row[tgt];
            softmax_row(row, 1.0, &mut probs[k * c..(k + 1) * c]);
        }
        let loss = total / rows.len() as f64;
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropyLogits {
                logits,
                rows,
                probs,
            },
            rg,
        ))
    }

    /// Mean over unmasked rows of `-log p[target]` for rows that already hold
    /// probabilities.
    pub fn nll_probs(&mut self, probs: Var, targets: &[usize], mask: &[bool]) -> Result<Var> {
        let t = self.value(probs);
        let rows = check_mask_rows(t, targets, mask)?;
        let total: f64 = rows
            .iter()
            .map(|&(i, tgt)| -t.get(i, tgt).max(LOG_FLOOR).ln())
            .sum();
        let loss = total / rows.len() as f64;
        let rg = self.rg(probs);
        Ok(self.push(Tensor::scalar(loss), Op::NllProbs { probs, rows }, rg))
    }

    /// Per-row cosine distance `1 - a·b / (|a||b|)`, shape `[m, 1]`.
    pub fn cosine_distance_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("cosine_distance", ta, tb));
        }
        let m = ta.rows();
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            out.push(super::numeric::cosine_distance_slices(ta.row(i), tb.row(i))?);
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(vec![m, 1], out), Op::CosineRows(a, b), rg))
    }

    /// Per-row negative log-density of `x` under `N(mu, exp(logvar))`.
    pub fn gaussian_nll_rows(&mut self, x: Var, mu: Var, logvar: Var) -> Result<Var> {
        let (tx, tm, tl) = (self.value(x), self.value(mu), self.value(logvar));
        if tx.shape() != tm.shape() {
            return Err(shape_err("gaussian_nll", tx, tm));
        }
        if tx.shape() != tl.shape() {
            return Err(shape_err("gaussian_nll", tx, tl));
        }
        let m = tx.rows();
        let out = (0..m)
            .map(|i| {
                tx.row(i)
                    .iter()
                    .zip(tm.row(i))
                    .zip(tl.row(i))
                    .map(|((&x, &mu), &lv)| 0.5 * (LN_2PI + lv + (x - mu).powi(2) * (-lv).exp()))
                    .sum()
            })
            .collect();
        let rg = self.rg(x) || self.rg(mu) || self.rg(logvar);
        Ok(self.push(
            Tensor::from_parts(vec![m, 1], out),
            Op::GaussianNllRows { x, mu, logvar },
            rg,
        ))
    }

    /// Per-row `KL(N(mu1, e^lv1) || N(mu2, e^lv2))` for diagonal Gaussians.
    pub fn kl_diag_gaussian_rows(&mut self, mu1: Var, lv1: Var, mu2: Var, lv2: Var) -> Result<Var> {
        let t = [mu1, lv1, mu2, lv2].map(|v| self.value(v));
        for other in &t[1..] {
            if other.shape() != t[0].shape() {
                return Err(shape_err("kl_diag_gaussian", t[0], other));
            }
        }
        let m = t[0].rows();
        let out = (0..m)
            .map(|i| super::numeric::kl_diag_slices(t[0].row(i), t[1].row(i), t[2].row(i), t[3].row(i)))
            .collect();
        let rg = [mu1, lv1, mu2, lv2].iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::from_parts(vec![m, 1], out),
            Op::KlRows { mu1, lv1, mu2, lv2 },
            rg,
        ))
    }

    /// Populates gradients of the scalar `loss` with respect to every
    /// recorded node that requires them. Replaces gradients of any previous
    /// backward pass.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lt = &self.nodes[loss.0].value;
        if lt.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        self.grads = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, g: &[f64]) {
        let (before, rest) = self.nodes.split_at(i);
        let node = &rest[0];
        let grads = &mut self.grads;
        let val = |v: Var| &before[v.0].value;
        // Accumulator for input `v`, or None when `v` needs no gradient.
        macro_rules! acc {
            ($v:expr) => {{
                let v: Var = $v;
                if before[v.0].requires_grad {
                    let n = before[v.0].value.len();
                    Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
                } else {
                    None
                }
            }};
        }
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if let Some(ga) = acc!(*a) {
                    gemm(m, n, k, g, false, tb.data(), true, ga, 1.0);
                }
                if let Some(gb) = acc!(*b) {
                    gemm(k, m, n, ta.data(), true, g, false, gb, 1.0);
                }
            }
            Op::Add(a, b) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, &d)| *x += d);
                }
                if let Some(gb) = acc!(*b) {
                    gb.iter_mut().zip(g).for_each(|(x, &d)| *x += d);
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, &d)| *x += d);
                }
                if let Some(gb) = acc!(*b) {
                    gb.iter_mut().zip(g).for_each(|(x, &d)| *x -= d);
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                if let Some(ga) = acc!(*a) {
                    for ((x, &d), &y) in ga.iter_mut().zip(g).zip(tb.data()) {
                        *x += d * y;
                    }
                }
                if let Some(gb) = acc!(*b) {
                    for ((x, &d), &y) in gb.iter_mut().zip(g).zip(ta.data()) {
                        *x += d * y;
                    }
                }
            }
            Op::AddRow(a, bias) => {
                let c = val(*a).cols();
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, &d)| *x += d);
                }
                if let Some(gb) = acc!(*bias) {
                    for row in g.chunks(c) {
                        gb.iter_mut().zip(row).for_each(|(x, &d)| *x += d);
                    }
                }
            }
            Op::MulCol(a, w) => {
                let (ta, tw) = (val(*a), val(*w));
                let c = ta.cols();
                if let Some(ga) = acc!(*a) {
                    for (k, x) in ga.iter_mut().enumerate() {
                        *x += g[k] * tw.data()[k / c];
                    }
                }
                if let Some(gw) = acc!(*w) {
                    for (r, x) in gw.iter_mut().enumerate() {
                        *x += (0..c).map(|j| g[r * c + j] * ta.data()[r * c + j]).sum::<f64>();
                    }
                }
            }
            Op::Affine(a, scale) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, &d)| *x += scale * d);
                }
            }
            Op::Sigmoid(a) => {
                if let Some(ga) = acc!(*a) {
                    for ((x, &d), &y) in ga.iter_mut().zip(g).zip(node.value.data()) {
                        *x += d * y * (1.0 - y);
                    }
                }
            }
            Op::Tanh(a) => {
                if let Some(ga) = acc!(*a) {
                    for ((x, &d), &y) in ga.iter_mut().zip(g).zip(node.value.data()) {
                        *x += d * (1.0 - y * y);
                    }
                }
            }
            Op::Exp(a) => {
                if let Some(ga) = acc!(*a) {
                    for ((x, &d), &y) in ga.iter_mut().zip(g).zip(node.value.data()) {
                        *x += d * y;
                    }
                }
            }
            Op::Log(a) => {
                let ta = val(*a);
                if let Some(ga) = acc!(*a) {
                    for ((x, &d), &inp) in ga.iter_mut().zip(g).zip(ta.data()) {
                        if inp > LOG_FLOOR {
                            *x += d / inp;
                        }
                    }
                }
            }
            Op::Softmax { input, tau } => {
                let c = node.value.cols();
                if let Some(ga) = acc!(*input) {
                    for ((gx, gy), y) in ga
                        .chunks_mut(c)
                        .zip(g.chunks(c))
                        .zip(node.value.data().chunks(c))
                    {
                        let dot: f64 = gy.iter().zip(y).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            gx[j] += y[j] * (gy[j] - dot) / tau;
                        }
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let (p, q) = (val(*a).cols(), val(*b).cols());
                let w = p + q;
                if let Some(ga) = acc!(*a) {
                    for (r, row) in g.chunks(w).enumerate() {
                        ga[r * p..(r + 1) * p]
                            .iter_mut()
                            .zip(&row[..p])
                            .for_each(|(x, &d)| *x += d);
                    }
                }
                if let Some(gb) = acc!(*b) {
                    for (r, row) in g.chunks(w).enumerate() {
                        gb[r * q..(r + 1) * q]
                            .iter_mut()
                            .zip(&row[p..])
                            .for_each(|(x, &d)| *x += d);
                    }
                }
            }
            Op::SliceCols { input, start } => {
                let full = val(*input).cols();
                let len = node.value.cols();
                if let Some(ga) = acc!(*input) {
                    for (r, row) in g.chunks(len).enumerate() {
                        let base = r * full + start;
                        ga[base..base + len]
                            .iter_mut()
                            .zip(row)
                            .for_each(|(x, &d)| *x += d);
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = val(p).len();
                    if let Some(gp) = acc!(p) {
                        gp.iter_mut()
                            .zip(&g[offset..offset + n])
                            .for_each(|(x, &d)| *x += d);
                    }
                    offset += n;
                }
            }
            Op::SliceRows { input, start } => {
                let c = node.value.cols();
                if let Some(ga) = acc!(*input) {
                    ga[start * c..start * c + g.len()]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(x, &d)| *x += d);
                }
            }
            Op::Gather { table, ids } => {
                let e = val(*table).cols();
                if let Some(gt) = acc!(*table) {
                    for (row, &id) in g.chunks(e).zip(ids) {
                        gt[id * e..(id + 1) * e]
                            .iter_mut()
                            .zip(row)
                            .for_each(|(x, &d)| *x += d);
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().for_each(|x| *x += g[0]);
                }
            }
            Op::Mean(a) => {
                let n = val(*a).len() as f64;
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().for_each(|x| *x += g[0] / n);
                }
            }
            Op::GruGates { xw, hw, h, cache } => {
                let (thw, th) = (val(*hw), val(*h));
                let hd = th.cols();
                let b = th.rows();
                let mut dxw = vec![0.0; b * 3 * hd];
                let mut dhw = vec![0.0; b * 3 * hd];
                let mut dh = vec![0.0; b * hd];
                for i in 0..b {
                    for j in 0..hd {
                        let k = i * hd + j;
                        let (r, u, c) = (cache.reset[k], cache.update[k], cache.candidate[k]);
                        let hn = thw.data()[i * 3 * hd + 2 * hd + j];
                        let d = g[k];
                        let dc = d * (1.0 - u) * (1.0 - c * c);
                        let du = d * (th.data()[k] - c) * u * (1.0 - u);
                        let dr = dc * hn * r * (1.0 - r);
                        dh[k] = d * u;
                        let base = i * 3 * hd;
                        dxw[base + j] = dr;
                        dxw[base + hd + j] = du;
                        dxw[base + 2 * hd + j] = dc;
                        dhw[base + j] = dr;
                        dhw[base + hd + j] = du;
                        dhw[base + 2 * hd + j] = dc * r;
                    }
                }
                for (v, d) in [(*xw, dxw), (*hw, dhw), (*h, dh)] {
                    if let Some(gv) = acc!(v) {
                        gv.iter_mut().zip(&d).for_each(|(x, &y)| *x += y);
                    }
                }
            }
            Op::CrossEntropyLogits {
                logits,
                rows,
                probs,
            } => {
                let c = val(*logits).cols();
                let scale = g[0] / rows.len() as f64;
                if let Some(gl) = acc!(*logits) {
                    for (k, &(i, tgt)) in rows.iter().enumerate() {
                        let p = &probs[k * c..(k + 1) * c];
                        let out = &mut gl[i * c..(i + 1) * c];
                        for j in 0..c {
                            out[j] += scale * p[j];
                        }
                        out[tgt] -= scale;
                    }
                }
            }
            Op::NllProbs { probs, rows } => {
                let tp = val(*probs);
                let c = tp.cols();
                let scale = g[0] / rows.len() as f64;
                if let Some(gp) = acc!(*probs) {
                    for &(i, tgt) in rows {
                        let p = tp.data()[i * c + tgt];
                        if p > LOG_FLOOR {
                            gp[i * c + tgt] -= scale / p;
                        }
                    }
                }
            }
            Op::CosineRows(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let d = ta.cols();
                let mut da = vec![0.0; ta.len()];
                let mut db = vec![0.0; tb.len()];
                for i in 0..ta.rows() {
                    let (x, y) = (ta.row(i), tb.row(i));
                    let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
                    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let cos = dot / (nx * ny);
                    for j in 0..d {
                        // d(1 - cos)/dx = -(y/(|x||y|) - cos * x/|x|²)
                        da[i * d + j] = -g[i] * (y[j] / (nx * ny) - cos * x[j] / (nx * nx));
                        db[i * d + j] = -g[i] * (x[j] / (nx * ny) - cos * y[j] / (ny * ny));
                    }
                }
                for (v, dv) in [(*a, da), (*b, db)] {
                    if let Some(gv) = acc!(v) {
                        gv.iter_mut().zip(&dv).for_each(|(x, &y)| *x += y);
                    }
                }
            }
            Op::GaussianNllRows { x, mu, logvar } => {
                let (tx, tm, tl) = (val(*x), val(*mu), val(*logvar));
                let d = tx.cols();
                let n = tx.len();
                let mut dx = vec![0.0; n];
                let mut dl = vec![0.0; n];
                for k in 0..n {
                    let inv = (-tl.data()[k]).exp();
                    let diff = tx.data()[k] - tm.data()[k];
                    let gi = g[k / d];
                    dx[k] = gi * diff * inv;
                    dl[k] = gi * 0.5 * (1.0 - diff * diff * inv);
                }
                if let Some(gx) = acc!(*x) {
                    gx.iter_mut().zip(&dx).for_each(|(a, &b)| *a += b);
                }
                if let Some(gm) = acc!(*mu) {
                    gm.iter_mut().zip(&dx).for_each(|(a, &b)| *a -= b);
                }
                if let Some(gl) = acc!(*logvar) {
                    gl.iter_mut().zip(&dl).for_each(|(a, &b)| *a += b);
                }
            }
            Op::KlRows { mu1, lv1, mu2, lv2 } => {
                let t = [*mu1, *lv1, *mu2, *lv2].map(|v| val(v));
                let d = t[0].cols();
                let n = t[0].len();
                let mut dm = vec![0.0; n];
                let mut dl1 = vec![0.0; n];
                let mut dl2 = vec![0.0; n];
                for k in 0..n {
                    let gi = g[k / d];
                    let inv2 = (-t[3].data()[k]).exp();
                    let v1 = t[1].data()[k].exp();
                    let diff = t[0].data()[k] - t[2].data()[k];
                    dm[k] = gi * diff * inv2;
                    dl1[k] = gi * 0.5 * (v1 * inv2 - 1.0);
                    dl2[k] = gi * 0.5 * (1.0 - (v1 + diff * diff) * inv2);
                }
                if let Some(gv) = acc!(*mu1) {
                    gv.iter_mut().zip(&dm).for_each(|(a, &b)| *a += b);
                }
                if let Some(gv) = acc!(*mu2) {
                    gv.iter_mut().zip(&dm).for_each(|(a, &b)| *a -= b);
                }
                if let Some(gv) = acc!(*lv1) {
                    gv.iter_mut().zip(&dl1).for_each(|(a, &b)| *a += b);
                }
                if let Some(gv) = acc!(*lv2) {
                    gv.iter_mut().zip(&dl2).for_each(|(a, &b)| *a += b);
                }
            }
        }
    }
}
