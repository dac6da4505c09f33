use super::graph::{Graph, Var};
use super::params::{Bindings, Init, ParamSpec};
use super::Real;
use crate::error::Result;

/// Projection weights of one multi-head attention block, all `[D, D]`
/// with `[D]` biases.
#[derive(Clone, Copy, Debug)]
pub struct AttentionWeights {
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Var,
    pub wv: Var,
    pub bv: Var,
    pub wo: Var,
    pub bo: Var,
}

impl AttentionWeights {
    pub fn specs(prefix: &str, dim: usize) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        for p in ["q", "k", "v", "o"] {
            out.push(ParamSpec {
                path: format!("{prefix}.w{p}"),
                shape: vec![dim, dim],
                init: Init::XavierUniform {
                    fan_in: dim,
                    fan_out: dim,
                },
            });
            out.push(ParamSpec {
                path: format!("{prefix}.b{p}"),
                shape: vec![dim],
                init: Init::Zeros,
            });
        }
        out
    }

    pub fn bind(b: &Bindings, prefix: &str) -> Result<Self> {
        let get = |n: &str| b.get(&format!("{prefix}.{n}"));
        Ok(AttentionWeights {
            wq: get("wq")?,
            bq: get("bq")?,
            wk: get("wk")?,
            bk: get("bk")?,
            wv: get("wv")?,
            bv: get("bv")?,
            wo: get("wo")?,
            bo: get("bo")?,
        })
    }
}

impl<T: Real> Graph<T> {
    /// Project `x` ([batch · seq, D]) to queries, keys and values, attend
    /// per head, and project the concatenated heads back to D.
    pub fn multihead_attention(
        &mut self,
        x: Var,
        w: &AttentionWeights,
        batch: usize,
        heads: usize,
    ) -> Result<Var> {
        let q = self.linear(x, w.wq, Some(w.bq))?;
        let k = self.linear(x, w.wk, Some(w.bk))?;
        let v = self.linear(x, w.wv, Some(w.bv))?;
        let a = self.attention(q, k, v, batch, heads)?;
        self.linear(a, w.wo, Some(w.bo))
    }
}
