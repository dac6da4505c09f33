//! Tape-based reverse-mode automatic differentiation.

use super::{attention, conv, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub(crate) enum Op<T> {
    Leaf,
    Add(Var, Var),
    AddRows(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Gelu(Var),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Conv2d {
        x: Var,
        k: Var,
        b: Option<Var>,
        stride: usize,
        cols: Vec<T>,
    },
    PixelShuffle {
        x: Var,
        r: usize,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    Softmax(Var),
    Concat(Vec<Var>),
    FreqTransform {
        x: Var,
        w: Var,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        batch: usize,
        heads: usize,
        probs: Vec<T>,
    },
    ToTokens(Var),
    FromTokens(Var),
    L1Loss(Var, Var),
    Sum(Var),
    Mean(Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    grad: Option<Vec<T>>,
}

/// A computation graph confined to one thread. Leaves marked as requiring
/// gradients accumulate into their gradient buffers on every
/// [`Graph::backward`] call until [`Graph::zero_grads`].
pub struct Graph<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite("leaf"));
        }
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Result<Var> {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var> {
        self.leaf(value, false)
    }

    pub(crate) fn op(&self, v: Var) -> &Op<T> {
        &self.nodes[v.0].op
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of a leaf, absent when no backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub(crate) fn push(&mut self, name: &'static str, value: Tensor<T>, op: Op<T>) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite(name));
        }
        let requires_grad = inputs(&op).iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    fn map(&mut self, name: &'static str, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Result<Var> {
        let xv = self.value(x);
        let data = xv.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(xv.shape(), data)?;
        self.push(name, value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let data = zip_with(self.value(a).data(), self.value(b).data(), |x, y| x + y);
        let value = Tensor::new(self.shape(a), data)?;
        self.push("add", value, Op::Add(a, b))
    }

    /// `a[i, :] + b[i mod r, :]` for `a` of shape [R, C] and `b` of [r, C].
    pub fn add_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] || sa[0] % sb[0] != 0 {
            return Err(Error::Shape(format!("add_rows: {sa:?} + {sb:?}")));
        }
        let bl = self.value(b).len();
        let bd = self.value(b).data();
        let data = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bd[i % bl])
            .collect();
        let value = Tensor::new(self.shape(a), data)?;
        self.push("add_rows", value, Op::AddRows(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let data = zip_with(self.value(a).data(), self.value(b).data(), |x, y| x * y);
        let value = Tensor::new(self.shape(a), data)?;
        self.push("mul", value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Result<Var> {
        self.map("scale", x, Op::Scale(x, s), |v| v * s)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.map("relu", x, Op::Relu(x), |v| v.max(T::zero()))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        self.map("gelu", x, Op::Gelu(x), |v| gelu(v).0)
    }

    /// `x · w + b` over the last axis; `w` is [in, out].
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        let d_in = *xs.last().unwrap();
        if ws.len() != 2 || ws[0] != d_in {
            return Err(Error::Shape(format!("linear: input {xs:?}, weight {ws:?}")));
        }
        let d_out = ws[1];
        if let Some(b) = b {
            if self.shape(b) != [d_out] {
                return Err(Error::Shape(format!("linear bias {:?}", self.shape(b))));
            }
        }
        let rows = self.value(x).len() / d_in;
        let mut out = match b {
            Some(b) => {
                let bd = self.value(b).data();
                (0..rows).flat_map(|_| bd.iter().copied()).collect()
            }
            None => vec![T::zero(); rows * d_out],
        };
        super::real::gemm(
            T::one(),
            self.value(x).data(),
            super::real::MatRef::dense(rows, d_in),
            self.value(w).data(),
            super::real::MatRef::dense(d_in, d_out),
            T::one(),
            &mut out,
            super::real::MatRef::dense(rows, d_out),
        );
        let mut shape = xs;
        *shape.last_mut().unwrap() = d_out;
        let value = Tensor::new(&shape, out)?;
        self.push("linear", value, Op::Linear { x, w, b })
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let d = *xv.shape().last().unwrap();
        let mut out = xv.data().to_vec();
        for row in out.chunks_mut(d) {
            attention::softmax_in_place(row);
        }
        let value = Tensor::new(xv.shape(), out)?;
        self.push("softmax", value, Op::Softmax(x))
    }

    /// Concatenate 4-D tensors along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.shape(parts[0]).to_vec();
        if first.len() != 4 {
            return Err(Error::Shape(format!("concat needs 4-D inputs, got {first:?}")));
        }
        let mut channels = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 4 || s[0] != first[0] || s[2] != first[2] || s[3] != first[3] {
                return Err(Error::Shape(format!("concat: {first:?} vs {s:?}")));
            }
            channels += s[1];
        }
        let (n, plane) = (first[0], first[2] * first[3]);
        let mut out = Vec::with_capacity(n * channels * plane);
        for b in 0..n {
            for &p in parts {
                let v = self.value(p);
                let per = v.shape()[1] * plane;
                out.extend_from_slice(&v.data()[b * per..(b + 1) * per]);
            }
        }
        let value = Tensor::new(&[n, channels, first[2], first[3]], out)?;
        self.push("concat", value, Op::Concat(parts.to_vec()))
    }

    /// `[N, C, H, W]` → `[N·H·W, C]`, one token per spatial position in raster
    /// order.
    pub fn to_tokens(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(Error::Shape(format!("to_tokens needs 4-D input, got {s:?}")));
        }
        let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
        let xd = self.value(x).data();
        let mut out = vec![T::zero(); n * c * hw];
        for b in 0..n {
            for ch in 0..c {
                for p in 0..hw {
                    out[(b * hw + p) * c + ch] = xd[(b * c + ch) * hw + p];
                }
            }
        }
        let value = Tensor::new(&[n * hw, c], out)?;
        self.push("to_tokens", value, Op::ToTokens(x))
    }

    /// Inverse of [`Graph::to_tokens`] for the given `[N, C, H, W]`.
    pub fn from_tokens(&mut self, x: Var, shape: [usize; 4]) -> Result<Var> {
        let [n, c, h, w] = shape;
        let hw = h * w;
        if self.shape(x) != [n * hw, c] {
            return Err(Error::Shape(format!(
                "from_tokens: {:?} cannot form {shape:?}",
                self.shape(x)
            )));
        }
        let xd = self.value(x).data();
        let mut out = vec![T::zero(); n * c * hw];
        for b in 0..n {
            for ch in 0..c {
                for p in 0..hw {
                    out[(b * c + ch) * hw + p] = xd[(b * hw + p) * c + ch];
                }
            }
        }
        let value = Tensor::new(&shape, out)?;
        self.push("from_tokens", value, Op::FromTokens(x))
    }

    /// Mean absolute difference.
    pub fn l1_loss(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "l1_loss")?;
        let ad = self.value(a).data();
        let n = T::from_usize(ad.len()).unwrap();
        let total: T = ad
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| (x - y).abs())
            .sum();
        self.push("l1_loss", Tensor::scalar(total / n), Op::L1Loss(a, b))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s: T = self.value(x).data().iter().copied().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let s: T = v.data().iter().copied().sum();
        let n = T::from_usize(v.len()).unwrap();
        self.push("mean", Tensor::scalar(s / n), Op::Mean(x))
    }

    /// Reverse-mode accumulation from a scalar `loss` into every reachable
    /// leaf that requires gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        let mut leaf_grads = Vec::new();
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[i].op {
                leaf_grads.push((i, g));
                continue;
            }
            for (v, contrib) in self.local_grads(i, &g) {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut grads[v.0] {
                    Some(acc) => {
                        for (a, c) in acc.iter_mut().zip(&contrib) {
                            *a += *c;
                        }
                    }
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        for (i, g) in leaf_grads {
            match &mut self.nodes[i].grad {
                Some(acc) => {
                    for (a, c) in acc.iter_mut().zip(&g) {
                        *a += *c;
                    }
                }
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Vector-Jacobian products of node `i` for output gradient `g`.
    fn local_grads(&self, i: usize, g: &[T]) -> Vec<(Var, Vec<T>)> {
        let node = &self.nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::Add(a, b) => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::AddRows(a, b) => {
                let bl = self.value(*b).len();
                let mut gb = vec![T::zero(); bl];
                for (j, &v) in g.iter().enumerate() {
                    gb[j % bl] += v;
                }
                vec![(*a, g.to_vec()), (*b, gb)]
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                vec![
                    (*a, zip_with(g, bd, |x, y| x * y)),
                    (*b, zip_with(g, ad, |x, y| x * y)),
                ]
            }
            Op::Scale(x, s) => vec![(*x, g.iter().map(|&v| v * *s).collect())],
            Op::Relu(x) => vec![(
                *x,
                zip_with(g, out, |gv, o| if o > T::zero() { gv } else { T::zero() }),
            )],
            Op::Gelu(x) => vec![(*x, zip_with(g, self.value(*x).data(), |gv, xv| gv * gelu(xv).1))],
            Op::Linear { x, w, b } => self.linear_grads(*x, *w, *b, g),
            Op::Conv2d {
                x,
                k,
                b,
                stride,
                cols,
            } => {
                let (dx, dk, db) = conv::conv2d_backward(
                    g,
                    self.shape(*x),
                    self.value(*k),
                    cols,
                    *stride,
                    self.needs(*x),
                );
                let mut res = vec![(*k, dk)];
                if let Some(dx) = dx {
                    res.push((*x, dx));
                }
                if let Some(b) = b {
                    res.push((*b, db));
                }
                res
            }
            Op::PixelShuffle { x, r } => {
                vec![(*x, conv::pixel_unshuffle_data(g, node.value.shape(), *r))]
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => attention::layer_norm_backward(g, self.value(*gamma), xhat, rstd)
                .into_iter()
                .zip([*x, *gamma, *beta])
                .map(|(d, v)| (v, d))
                .collect(),
            Op::Softmax(x) => {
                let d = *node.value.shape().last().unwrap();
                let mut dx = vec![T::zero(); g.len()];
                for ((dxr, gr), yr) in dx.chunks_mut(d).zip(g.chunks(d)).zip(out.chunks(d)) {
                    attention::softmax_backward_row(gr, yr, dxr);
                }
                vec![(*x, dx)]
            }
            Op::Concat(parts) => {
                let s = node.value.shape();
                let (n, c_total, plane) = (s[0], s[1], s[2] * s[3]);
                let mut res: Vec<(Var, Vec<T>)> = parts
                    .iter()
                    .map(|&p| (p, Vec::with_capacity(self.value(p).len())))
                    .collect();
                for b in 0..n {
                    let mut off = b * c_total * plane;
                    for (p, buf) in res.iter_mut() {
                        let per = self.shape(*p)[1] * plane;
                        buf.extend_from_slice(&g[off..off + per]);
                        off += per;
                    }
                }
                res
            }
            Op::FreqTransform { x, w } => {
                let (dx, dw) = conv::freq_transform_backward(g, self.value(*x), self.value(*w));
                vec![(*x, dx), (*w, dw)]
            }
            Op::Attention {
                q,
                k,
                v,
                batch,
                heads,
                probs,
            } => {
                let (dq, dk, dv) = attention::attention_backward(
                    g,
                    self.value(*q),
                    self.value(*k),
                    self.value(*v),
                    probs,
                    *batch,
                    *heads,
                );
                vec![(*q, dq), (*k, dk), (*v, dv)]
            }
            Op::ToTokens(x) => {
                let s = self.shape(*x);
                let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
                let mut dx = vec![T::zero(); g.len()];
                for b in 0..n {
                    for ch in 0..c {
                        for p in 0..hw {
                            dx[(b * c + ch) * hw + p] = g[(b * hw + p) * c + ch];
                        }
                    }
                }
                vec![(*x, dx)]
            }
            Op::FromTokens(x) => {
                let s = node.value.shape();
                let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
                let mut dx = vec![T::zero(); g.len()];
                for b in 0..n {
                    for ch in 0..c {
                        for p in 0..hw {
                            dx[(b * hw + p) * c + ch] = g[(b * c + ch) * hw + p];
                        }
                    }
                }
                vec![(*x, dx)]
            }
            Op::L1Loss(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                let scale = g[0] / T::from_usize(ad.len()).unwrap();
                let da: Vec<T> = zip_with(ad, bd, |x, y| sign(x - y) * scale);
                let db = da.iter().map(|&v| -v).collect();
                vec![(*a, da), (*b, db)]
            }
            Op::Sum(x) => vec![(*x, vec![g[0]; self.value(*x).len()])],
            Op::Mean(x) => {
                let n = self.value(*x).len();
                vec![(*x, vec![g[0] / T::from_usize(n).unwrap(); n])]
            }
        }
    }

    fn linear_grads(&self, x: Var, w: Var, b: Option<Var>, g: &[T]) -> Vec<(Var, Vec<T>)> {
        use super::real::{gemm, MatRef};
        let ws = self.shape(w);
        let (d_in, d_out) = (ws[0], ws[1]);
        let rows = g.len() / d_out;
        let xd = self.value(x).data();
        let mut res = Vec::with_capacity(3);
        if self.needs(w) {
            let mut dw = vec![T::zero(); d_in * d_out];
            gemm(
                T::one(),
                xd,
                MatRef::dense(rows, d_in).t(),
                g,
                MatRef::dense(rows, d_out),
                T::zero(),
                &mut dw,
                MatRef::dense(d_in, d_out),
            );
            res.push((w, dw));
        }
        if self.needs(x) {
            let mut dx = vec![T::zero(); rows * d_in];
            gemm(
                T::one(),
                g,
                MatRef::dense(rows, d_out),
                self.value(w).data(),
                MatRef::dense(d_in, d_out).t(),
                T::zero(),
                &mut dx,
                MatRef::dense(rows, d_in),
            );
            res.push((x, dx));
        }
        if let Some(b) = b {
            let mut db = vec![T::zero(); d_out];
            for row in g.chunks(d_out) {
                for (a, &v) in db.iter_mut().zip(row) {
                    *a += v;
                }
            }
            res.push((b, db));
        }
        res
    }
}

fn inputs<T>(op: &Op<T>) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::Add(a, b) | Op::AddRows(a, b) | Op::Mul(a, b) | Op::L1Loss(a, b) => vec![*a, *b],
        Op::Scale(x, _)
        | Op::Relu(x)
        | Op::Gelu(x)
        | Op::Softmax(x)
        | Op::ToTokens(x)
        | Op::FromTokens(x)
        | Op::Sum(x)
        | Op::Mean(x)
        | Op::PixelShuffle { x, .. } => vec![*x],
        Op::Linear { x, w, b } => [Some(*x), Some(*w), *b].into_iter().flatten().collect(),
        Op::Conv2d { x, k, b, .. } => [Some(*x), Some(*k), *b].into_iter().flatten().collect(),
        Op::LayerNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
        Op::Concat(parts) => parts.clone(),
        Op::FreqTransform { x, w } => vec![*x, *w],
        Op::Attention { q, k, v, .. } => vec![*q, *k, *v],
    }
}

fn zip_with<T: Real>(a: &[T], b: &[T], f: impl Fn(T, T) -> T) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn sign<T: Real>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// GELU value and derivative (tanh approximation).
fn gelu<T: Real>(x: T) -> (T, T) {
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let a = T::lit(0.044715);
    let half = T::lit(0.5);
    let inner = c * (x + a * x * x * x);
    let t = inner.tanh();
    let value = half * x * (T::one() + t);
    let d_inner = c * (T::one() + T::lit(3.0) * a * x * x);
    let deriv = half * (T::one() + t) + half * x * (T::one() - t * t) * d_inner;
    (value, deriv)
}
