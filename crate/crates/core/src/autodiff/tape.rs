//! Reverse-mode tape over matrices. Every operation appends a node whose
//! parents precede it, so a single reverse sweep computes all gradients.

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// a · bᵀ
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// matrix + broadcast 1×n row
    AddRow(Var, Var),
    MulRow(Var, Var),
    /// matrix + broadcast m×1 column
    AddCol(Var, Var),
    AddConst(Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Softplus(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Minimum(Var, Var),
    SoftmaxRows(Var),
    /// saved 1/√(var+ε) per row
    LayerNorm(Var, Vec<f64>),
    /// saved mask already divided by the keep probability
    Dropout(Var, Vec<f64>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    SumAll(Var),
    SumCols(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    param: Option<usize>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape { op, left: a.shape().to_vec(), right: b.shape().to_vec() }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op, param: None });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn dims(&self, v: Var) -> Result<(usize, usize)> {
        self.value(v).dims()
    }

    /// A leaf that is not tied to any parameter (inputs, constants).
    pub fn leaf(&mut self, t: Tensor) -> Result<Var> {
        t.dims()?;
        Ok(self.push(t, Op::Leaf))
    }

    /// A leaf whose gradient is reported under parameter index `id`.
    pub fn param(&mut self, t: &Tensor, id: usize) -> Result<Var> {
        let v = self.leaf(t.clone())?;
        self.nodes[v.0].param = Some(id);
        Ok(v)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let src = self.value(a);
        let data = src.data().iter().map(|x| f(*x)).collect();
        let t = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        self.push(t, op)
    }

    fn zip(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(t, op))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a)?;
        let (k2, n) = self.dims(b)?;
        if k != k2 {
            return Err(shape_err("matmul", self.value(a), self.value(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, 1.0, self.value(a).data(), false, self.value(b).data(), false, 0.0, &mut out);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b)))
    }

    /// a · bᵀ
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a)?;
        let (n, k2) = self.dims(b)?;
        if k != k2 {
            return Err(shape_err("matmul_t", self.value(a), self.value(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, 1.0, self.value(a).data(), false, self.value(b).data(), true, 0.0, &mut out);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMulT(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let src = self.value(a).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = src[i * n + j];
            }
        }
        Ok(self.push(Tensor::new(vec![n, m], out)?, Op::Transpose(a)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "minimum", f64::min, Op::Minimum(a, b))
    }

    fn broadcast_row(&mut self, a: Var, row: Var, name: &'static str, mul: bool) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let (r, c) = self.dims(row)?;
        if r != 1 || c != n {
            return Err(shape_err(name, self.value(a), self.value(row)));
        }
        let rv = self.value(row).data();
        let mut out = self.value(a).data().to_vec();
        for i in 0..m {
            for (o, x) in out[i * n..(i + 1) * n].iter_mut().zip(rv) {
                if mul {
                    *o *= x;
                } else {
                    *o += x;
                }
            }
        }
        let op = if mul { Op::MulRow(a, row) } else { Op::AddRow(a, row) };
        Ok(self.push(Tensor::new(vec![m, n], out)?, op))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.broadcast_row(a, row, "add_row", false)
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.broadcast_row(a, row, "mul_row", true)
    }

    pub fn add_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let (r, c) = self.dims(col)?;
        if r != m || c != 1 {
            return Err(shape_err("add_col", self.value(a), self.value(col)));
        }
        let cv = self.value(col).data().to_vec();
        let mut out = self.value(a).data().to_vec();
        for i in 0..m {
            for o in &mut out[i * n..(i + 1) * n] {
                *o += cv[i];
            }
        }
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::AddCol(a, col)))
    }

    /// Adds a constant tensor that takes no gradient (masks, encodings).
    pub fn add_const(&mut self, a: Var, c: &Tensor) -> Result<Var> {
        let ta = self.value(a);
        if ta.shape() != c.shape() {
            return Err(shape_err("add_const", ta, c));
        }
        let data = ta.data().iter().zip(c.data()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(t, Op::AddConst(a)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.map(a, |x| x * s, Op::Scale(a, s))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.map(a, f64::ln, Op::Log(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.map(a, softplus, Op::Softplus(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, |x| x * x, Op::Square(a))
    }

    /// Elementwise clamp; the gradient is zero where the bound is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.map(a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(n.max(1)).take(m) {
            softmax_in_place(row);
        }
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::SoftmaxRows(a)))
    }

    /// Normalizes each row to zero mean and unit variance (biased variance,
    /// ε = 1e-5); gain and bias are applied separately.
    pub fn layer_norm(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let mut out = self.value(a).data().to_vec();
        let mut inv = Vec::with_capacity(m);
        for row in out.chunks_mut(n.max(1)).take(m) {
            inv.push(layer_norm_in_place(row));
        }
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::LayerNorm(a, inv)))
    }

    /// Inverted dropout with a caller-supplied keep mask (1 keep, 0 drop).
    pub fn dropout(&mut self, a: Var, keep: &[bool], rate: f64) -> Result<Var> {
        let t = self.value(a);
        if keep.len() != t.len() {
            return Err(Error::contract(format!("dropout mask has {} entries for shape {:?}", keep.len(), t.shape())));
        }
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::contract(format!("dropout rate {rate} outside [0, 1)")));
        }
        let s = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = keep.iter().map(|k| if *k { s } else { 0.0 }).collect();
        let data = t.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Dropout(a, mask)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::contract("concat of nothing"))?;
        let (m, _) = self.dims(first)?;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let (r, c) = self.dims(*p)?;
            if r != m {
                return Err(shape_err("concat_cols", self.value(first), self.value(*p)));
            }
            widths.push(c);
        }
        let n: usize = widths.iter().sum();
        let mut out = vec![0.0; m * n];
        let mut off = 0;
        for (p, w) in parts.iter().zip(&widths) {
            let src = self.value(*p).data();
            for i in 0..m {
                out[i * n + off..i * n + off + w].copy_from_slice(&src[i * w..(i + 1) * w]);
            }
            off += w;
        }
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::contract("concat of nothing"))?;
        let (_, n) = self.dims(first)?;
        let mut out = Vec::new();
        let mut m = 0;
        for p in parts {
            let (r, c) = self.dims(*p)?;
            if c != n {
                return Err(shape_err("concat_rows", self.value(first), self.value(*p)));
            }
            out.extend_from_slice(self.value(*p).data());
            m += r;
        }
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        if start + width > n {
            return Err(Error::contract(format!("column slice {start}..{} of width-{n} matrix", start + width)));
        }
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(m * width);
        for i in 0..m {
            out.extend_from_slice(&src[i * n + start..i * n + start + width]);
        }
        Ok(self.push(Tensor::new(vec![m, width], out)?, Op::SliceCols(a, start)))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, count: usize) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        if start + count > m {
            return Err(Error::contract(format!("row slice {start}..{} of {m}-row matrix", start + count)));
        }
        let out = self.value(a).data()[start * n..(start + count) * n].to_vec();
        Ok(self.push(Tensor::new(vec![count, n], out)?, Op::SliceRows(a, start)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Row sums as an m×1 column.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let src = self.value(a).data();
        let out = (0..m).map(|i| src[i * n..(i + 1) * n].iter().sum()).collect();
        Ok(self.push(Tensor::new(vec![m, 1], out)?, Op::SumCols(a)))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads, params: self.nodes.iter().map(|n| n.param).collect() })
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let out = &node.value;
        let acc = |grads: &mut [Option<Vec<f64>>], v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let len = self.nodes[v.0].value.len();
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims().unwrap();
                let n = out.shape()[1];
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                // dA = G·Bᵀ, dB = Aᵀ·G
                acc(grads, *a, &mut |s| gemm(m, n, k, 1.0, g, false, bv, true, 1.0, s));
                acc(grads, *b, &mut |s| gemm(k, m, n, 1.0, av, true, g, false, 1.0, s));
            }
            Op::MatMulT(a, b) => {
                let (m, k) = self.value(*a).dims().unwrap();
                let n = out.shape()[1];
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                // C = A·Bᵀ: dA = G·B, dB = Gᵀ·A
                acc(grads, *a, &mut |s| gemm(m, n, k, 1.0, g, false, bv, false, 1.0, s));
                acc(grads, *b, &mut |s| gemm(n, m, k, 1.0, g, true, av, false, 1.0, s));
            }
            Op::Transpose(a) => {
                let (m, n) = self.value(*a).dims().unwrap();
                acc(grads, *a, &mut |s| {
                    for i in 0..m {
                        for j in 0..n {
                            s[i * n + j] += g[j * m + i];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                acc(grads, *a, &mut |s| add_into(s, g));
                acc(grads, *b, &mut |s| add_into(s, g));
            }
            Op::Sub(a, b) => {
                acc(grads, *a, &mut |s| add_into(s, g));
                acc(grads, *b, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(grads, *a, &mut |s| s.iter_mut().zip(g).zip(bv).for_each(|((x, gi), bi)| *x += gi * bi));
                acc(grads, *b, &mut |s| s.iter_mut().zip(g).zip(av).for_each(|((x, gi), ai)| *x += gi * ai));
            }
            Op::Minimum(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                // ties route the gradient to the first operand
                acc(grads, *a, &mut |s| {
                    for i in 0..s.len() {
                        if av[i] <= bv[i] {
                            s[i] += g[i];
                        }
                    }
                });
                acc(grads, *b, &mut |s| {
                    for i in 0..s.len() {
                        if av[i] > bv[i] {
                            s[i] += g[i];
                        }
                    }
                });
            }
            Op::AddRow(a, row) => {
                let n = out.shape()[1];
                acc(grads, *a, &mut |s| add_into(s, g));
                acc(grads, *row, &mut |s| {
                    for gr in g.chunks(n) {
                        add_into(s, gr);
                    }
                });
            }
            Op::MulRow(a, row) => {
                let n = out.shape()[1];
                let (av, rv) = (self.value(*a).data(), self.value(*row).data());
                acc(grads, *a, &mut |s| {
                    for (i, x) in s.iter_mut().enumerate() {
                        *x += g[i] * rv[i % n];
                    }
                });
                acc(grads, *row, &mut |s| {
                    for (i, gi) in g.iter().enumerate() {
                        s[i % n] += gi * av[i];
                    }
                });
            }
            Op::AddCol(a, col) => {
                let n = out.shape()[1];
                acc(grads, *a, &mut |s| add_into(s, g));
                acc(grads, *col, &mut |s| {
                    for (i, gr) in g.chunks(n).enumerate() {
                        s[i] += gr.iter().sum::<f64>();
                    }
                });
            }
            Op::AddConst(a) => acc(grads, *a, &mut |s| add_into(s, g)),
            Op::Scale(a, c) => acc(grads, *a, &mut |s| s.iter_mut().zip(g).for_each(|(x, gi)| *x += c * gi)),
            Op::Relu(a) => {
                let av = self.value(*a).data();
                acc(grads, *a, &mut |s| {
                    for i in 0..s.len() {
                        if av[i] > 0.0 {
                            s[i] += g[i];
                        }
                    }
                });
            }
            Op::Tanh(a) => {
                let y = out.data();
                acc(grads, *a, &mut |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                });
            }
            Op::Exp(a) => {
                let y = out.data();
                acc(grads, *a, &mut |s| s.iter_mut().zip(g).zip(y).for_each(|((x, gi), yi)| *x += gi * yi));
            }
            Op::Log(a) => {
                let av = self.value(*a).data();
                acc(grads, *a, &mut |s| s.iter_mut().zip(g).zip(av).for_each(|((x, gi), ai)| *x += gi / ai));
            }
            Op::Softplus(a) => {
                let av = self.value(*a).data();
                acc(grads, *a, &mut |s| s.iter_mut().zip(g).zip(av).for_each(|((x, gi), ai)| *x += gi * sigmoid(*ai)));
            }
            Op::Square(a) => {
                let av = self.value(*a).data();
                acc(grads, *a, &mut |s| s.iter_mut().zip(g).zip(av).for_each(|((x, gi), ai)| *x += 2.0 * gi * ai));
            }
            Op::Clamp(a, lo, hi) => {
                let av = self.value(*a).data();
                acc(grads, *a, &mut |s| {
                    for i in 0..s.len() {
                        if av[i] >= *lo && av[i] <= *hi {
                            s[i] += g[i];
                        }
                    }
                });
            }
            Op::SoftmaxRows(a) => {
                let n = out.shape()[1];
                let y = out.data();
                acc(grads, *a, &mut |s| {
                    for ((sr, yr), gr) in s.chunks_mut(n).zip(y.chunks(n)).zip(g.chunks(n)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            sr[j] += yr[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::LayerNorm(a, inv) => {
                let n = out.shape()[1];
                let y = out.data();
                let nf = n as f64;
                acc(grads, *a, &mut |s| {
                    for (i, ((sr, yr), gr)) in s.chunks_mut(n).zip(y.chunks(n)).zip(g.chunks(n)).enumerate() {
                        let mean_g: f64 = gr.iter().sum::<f64>() / nf;
                        let mean_gy: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / nf;
                        for j in 0..n {
                            sr[j] += inv[i] * (gr[j] - mean_g - yr[j] * mean_gy);
                        }
                    }
                });
            }
            Op::Dropout(a, mask) => {
                acc(grads, *a, &mut |s| s.iter_mut().zip(g).zip(mask).for_each(|((x, gi), mi)| *x += gi * mi));
            }
            Op::ConcatCols(parts) => {
                let n = out.shape()[1];
                let mut off = 0;
                for p in parts {
                    let w = self.value(*p).shape()[1];
                    acc(grads, *p, &mut |s| {
                        for (i, sr) in s.chunks_mut(w).enumerate() {
                            add_into(sr, &g[i * n + off..i * n + off + w]);
                        }
                    });
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = self.value(*p).len();
                    acc(grads, *p, &mut |s| add_into(s, &g[off..off + len]));
                    off += len;
                }
            }
            Op::SliceCols(a, start) => {
                let n = self.value(*a).shape()[1];
                let w = out.shape()[1];
                acc(grads, *a, &mut |s| {
                    for (i, gr) in g.chunks(w).enumerate() {
                        add_into(&mut s[i * n + start..i * n + start + w], gr);
                    }
                });
            }
            Op::SliceRows(a, start) => {
                let n = out.shape()[1];
                acc(grads, *a, &mut |s| add_into(&mut s[start * n..start * n + g.len()], g));
            }
            Op::SumAll(a) => acc(grads, *a, &mut |s| s.iter_mut().for_each(|x| *x += g[0])),
            Op::SumCols(a) => {
                let n = self.value(*a).shape()[1];
                acc(grads, *a, &mut |s| {
                    for (i, sr) in s.chunks_mut(n).enumerate() {
                        sr.iter_mut().for_each(|x| *x += g[i]);
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable softmax of one row; −∞ entries become exactly 0.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

/// Normalizes a row in place and returns 1/√(var + ε).
pub fn layer_norm_in_place(row: &mut [f64]) -> f64 {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    for x in row.iter_mut() {
        *x = (*x - mean) * inv;
    }
    inv
}

/// Gradients of one backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<Option<usize>>,
}

impl Gradients {
    /// Gradient of a node, zero-length if it did not influence the loss.
    pub fn of(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    /// Adds each parameter leaf's gradient into `out[param id]`.
    pub fn accumulate_params(&self, out: &mut [Tensor]) {
        for (g, p) in self.grads.iter().zip(&self.params) {
            if let (Some(g), Some(id)) = (g, p) {
                add_into(out[*id].data_mut(), g);
            }
        }
    }
}
