//! Softmax, layer normalization and scaled dot-product attention.

use super::graph::{Graph, Op, Var};
use super::real::{gemm, MatRef};
use super::{Real, Tensor};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

pub(crate) fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v = *v / total;
    }
}

/// `dx = y ⊙ (g − ⟨g, y⟩)` for one softmax row.
pub(crate) fn softmax_backward_row<T: Real>(g: &[T], y: &[T], dx: &mut [T]) {
    let dot: T = g.iter().zip(y).map(|(&a, &b)| a * b).sum();
    for ((d, &gv), &yv) in dx.iter_mut().zip(g).zip(y) {
        *d = yv * (gv - dot);
    }
}

pub(crate) fn layer_norm_backward<T: Real>(
    g: &[T],
    gamma: &Tensor<T>,
    xhat: &[T],
    rstd: &[T],
) -> [Vec<T>; 3] {
    let d = gamma.len();
    let gd = gamma.data();
    let dn = T::from_usize(d).unwrap();
    let mut dx = vec![T::zero(); g.len()];
    let mut dgamma = vec![T::zero(); d];
    let mut dbeta = vec![T::zero(); d];
    for (r, ((gr, xr), dxr)) in g
        .chunks(d)
        .zip(xhat.chunks(d))
        .zip(dx.chunks_mut(d))
        .enumerate()
    {
        let mut mean_dxhat = T::zero();
        let mut mean_dxhat_xhat = T::zero();
        for j in 0..d {
            let dxh = gr[j] * gd[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xr[j];
            dgamma[j] += gr[j] * xr[j];
            dbeta[j] += gr[j];
        }
        mean_dxhat = mean_dxhat / dn;
        mean_dxhat_xhat = mean_dxhat_xhat / dn;
        for j in 0..d {
            let dxh = gr[j] * gd[j];
            dxr[j] = rstd[r] * (dxh - mean_dxhat - xr[j] * mean_dxhat_xhat);
        }
    }
    [dx, dgamma, dbeta]
}

#[derive(Clone, Copy)]
struct HeadViews {
    seq: usize,
    d_head: usize,
    row_stride: usize,
}

impl HeadViews {
    fn view(&self, batch: usize, head: usize) -> MatRef {
        MatRef {
            rows: self.seq,
            cols: self.d_head,
            offset: batch * self.seq * self.row_stride + head * self.d_head,
            rs: self.row_stride,
            cs: 1,
        }
    }
}

pub(crate) fn attention_backward<T: Real>(
    g: &[T],
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    probs: &[T],
    batch: usize,
    heads: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let s = q.shape();
    let (rows, d) = (s[0], s[1]);
    let seq = rows / batch;
    let views = HeadViews {
        seq,
        d_head: d / heads,
        row_stride: d,
    };
    let scale = T::one() / T::from_usize(views.d_head).unwrap().sqrt();
    let mut dq = vec![T::zero(); q.len()];
    let mut dk = vec![T::zero(); k.len()];
    let mut dv = vec![T::zero(); v.len()];
    let mut dp = vec![T::zero(); seq * seq];
    let mut ds = vec![T::zero(); seq * seq];
    let sq = MatRef::dense(seq, seq);
    for b in 0..batch {
        for h in 0..heads {
            let hv = views.view(b, h);
            let p = &probs[(b * heads + h) * seq * seq..(b * heads + h + 1) * seq * seq];
            gemm(T::one(), g, hv, v.data(), hv.t(), T::zero(), &mut dp, sq);
            gemm(T::one(), p, sq.t(), g, hv, T::zero(), &mut dv, hv);
            for ((dsr, dpr), pr) in ds.chunks_mut(seq).zip(dp.chunks(seq)).zip(p.chunks(seq)) {
                softmax_backward_row(dpr, pr, dsr);
            }
            gemm(scale, &ds, sq, k.data(), hv, T::zero(), &mut dq, hv);
            gemm(scale, &ds, sq.t(), q.data(), hv, T::zero(), &mut dk, hv);
        }
    }
    (dq, dk, dv)
}

impl<T: Real> Graph<T> {
    /// Normalize over the last axis, then scale by `gamma` and shift by
    /// `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let d = *s.last().unwrap();
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(Error::Shape(format!(
                "layer_norm over {d} with gamma {:?}, beta {:?}",
                self.shape(gamma),
                self.shape(beta)
            )));
        }
        let xd = self.value(x).data();
        let (gd, bd) = (self.value(gamma).data(), self.value(beta).data());
        let dn = T::from_usize(d).unwrap();
        let eps = T::lit(LN_EPS);
        let mut xhat = vec![T::zero(); xd.len()];
        let mut rstd = Vec::with_capacity(xd.len() / d);
        let mut out = vec![T::zero(); xd.len()];
        for ((xr, hr), or) in xd.chunks(d).zip(xhat.chunks_mut(d)).zip(out.chunks_mut(d)) {
            let mean = xr.iter().copied().sum::<T>() / dn;
            let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
            let r = T::one() / (var + eps).sqrt();
            for j in 0..d {
                hr[j] = (xr[j] - mean) * r;
                or[j] = hr[j] * gd[j] + bd[j];
            }
            rstd.push(r);
        }
        let value = Tensor::new(&s, out)?;
        self.push(
            "layer_norm",
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
        )
    }

    /// Per-head `softmax(Q Kᵀ / √d_head) V` on `[batch · seq, D]` inputs,
    /// heads concatenated along the feature axis.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, batch: usize, heads: usize) -> Result<Var> {
        let s = self.shape(q).to_vec();
        if s.len() != 2 || self.shape(k) != s || self.shape(v) != s {
            return Err(Error::Shape(format!(
                "attention: q {s:?}, k {:?}, v {:?}",
                self.shape(k),
                self.shape(v)
            )));
        }
        let (rows, d) = (s[0], s[1]);
        if heads == 0 || d % heads != 0 {
            return Err(Error::Shape(format!("attention: dim {d} not divisible by {heads} heads")));
        }
        if batch == 0 || rows % batch != 0 {
            return Err(Error::Shape(format!("attention: {rows} rows not divisible by batch {batch}")));
        }
        let seq = rows / batch;
        let views = HeadViews {
            seq,
            d_head: d / heads,
            row_stride: d,
        };
        let scale = T::one() / T::from_usize(views.d_head).unwrap().sqrt();
        let mut probs = vec![T::zero(); batch * heads * seq * seq];
        let mut out = vec![T::zero(); rows * d];
        {
            let (qd, kd, vd) = (self.value(q).data(), self.value(k).data(), self.value(v).data());
            let sq = MatRef::dense(seq, seq);
            for b in 0..batch {
                for h in 0..heads {
                    let hv = views.view(b, h);
                    let p = &mut probs[(b * heads + h) * seq * seq..(b * heads + h + 1) * seq * seq];
                    gemm(scale, qd, hv, kd, hv.t(), T::zero(), p, sq);
                    for row in p.chunks_mut(seq) {
                        softmax_in_place(row);
                    }
                    gemm(T::one(), p, sq, vd, hv, T::zero(), &mut out, hv);
                }
            }
        }
        let value = Tensor::new(&s, out)?;
        self.push(
            "attention",
            value,
            Op::Attention {
                q,
                k,
                v,
                batch,
                heads,
                probs,
            },
        )
    }
}

impl<T: Real> Graph<T> {
    /// Softmax probabilities cached by an attention node,
    /// `[batch, heads, seq, seq]` row-major.
    pub fn attention_probs(&self, node: Var) -> Option<&[T]> {
        match self.op(node) {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }
}
