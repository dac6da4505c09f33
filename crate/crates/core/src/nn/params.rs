use std::collections::BTreeMap;
use std::path::Path;

use rand_distr::{Distribution, Normal, Uniform};

use super::graph::{Graph, Var};
use super::{Real, Tensor};
use crate::error::{Error, Result};
use crate::sim::clip_rng;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"R2SCKPT1";

/// Initialization rule for one parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// U(±√(6 / fan_in)), the ReLU gain variant.
    KaimingUniform { fan_in: usize },
    /// U(±√(6 / (fan_in + fan_out))).
    XavierUniform { fan_in: usize, fan_out: usize },
    Normal { std: f64 },
    Zeros,
    Ones,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub path: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub grad: Option<Vec<T>>,
}

/// Named trainable tensors, iterated in path order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    params: BTreeMap<String, Param<T>>,
}

/// Graph handles of a parameter set bound into one [`Graph`].
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    vars: BTreeMap<String, Var>,
}

impl Bindings {
    pub fn get(&self, path: &str) -> Result<Var> {
        self.vars
            .get(path)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {path}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<T: Real> Default for ModelParams<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ModelParams<T> {
    pub fn new() -> Self {
        ModelParams {
            params: BTreeMap::new(),
        }
    }

    /// Draw every parameter from its own seeded stream, so values depend on
    /// the seed and path only.
    pub fn initialize(specs: &[ParamSpec], seed: u64) -> Result<Self> {
        let mut out = Self::new();
        for spec in specs {
            let n: usize = spec.shape.iter().product();
            let mut rng = clip_rng(seed, &spec.path);
            let data: Vec<f64> = match spec.init {
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
                Init::Normal { std } => {
                    let d = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    (0..n).map(|_| d.sample(&mut rng)).collect()
                }
                Init::KaimingUniform { fan_in } => {
                    let bound = (6.0 / fan_in as f64).sqrt();
                    let d = Uniform::new(-bound, bound)
                        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    (0..n).map(|_| d.sample(&mut rng)).collect()
                }
                Init::XavierUniform { fan_in, fan_out } => {
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let d = Uniform::new(-bound, bound)
                        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    (0..n).map(|_| d.sample(&mut rng)).collect()
                }
            };
            out.insert(&spec.path, Tensor::from_f64(&spec.shape, &data)?)?;
        }
        Ok(out)
    }

    pub fn insert(&mut self, path: &str, value: Tensor<T>) -> Result<()> {
        if self.params.contains_key(path) {
            return Err(Error::InvalidArgument(format!("parameter {path} registered twice")));
        }
        self.params
            .insert(path.to_string(), Param { value, grad: None });
        Ok(())
    }

    pub fn get(&self, path: &str) -> Option<&Param<T>> {
        self.params.get(path)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Param<T>> {
        self.params.get_mut(path)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            params: self
                .params
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        Param {
                            value: p.value.cast(),
                            grad: None,
                        },
                    )
                })
                .collect(),
        }
    }

    /// Add every parameter to `g` as a trainable leaf.
    pub fn bind(&self, g: &mut Graph<T>) -> Result<Bindings> {
        let mut vars = BTreeMap::new();
        for (path, p) in &self.params {
            vars.insert(path.clone(), g.param(p.value.clone())?);
        }
        Ok(Bindings { vars })
    }

    /// Add gradients accumulated in `g` to the parameter gradient buffers.
    pub fn absorb_grads(&mut self, g: &Graph<T>, bindings: &Bindings) {
        for (path, var) in bindings.iter() {
            let (Some(p), Some(gr)) = (self.params.get_mut(path), g.grad(var)) else {
                continue;
            };
            match &mut p.grad {
                Some(acc) => {
                    for (a, v) in acc.iter_mut().zip(gr) {
                        *a += *v;
                    }
                }
                slot @ None => *slot = Some(gr.to_vec()),
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad = None;
        }
    }

    /// Plain SGD: `p ← p − lr · ∂L/∂p`, then clear the gradients.
    pub fn sgd_step(&mut self, lr: T) -> Result<()> {
        if let Some((path, _)) = self.params.iter().find(|(_, p)| p.grad.is_none()) {
            return Err(Error::MissingGrad(path.clone()));
        }
        for p in self.params.values_mut() {
            let grad = p.grad.take().expect("checked above");
            for (v, g) in p.value.data_mut().iter_mut().zip(&grad) {
                *v -= lr * *g;
            }
            if !p.value.all_finite() {
                return Err(Error::NonFinite("sgd_step"));
            }
        }
        Ok(())
    }

    /// Binary checkpoint: magic, u32 count, then per parameter the path
    /// (u32 length + UTF-8), u32 rank, u32 extents and f32 data; all
    /// little-endian.
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (path, p) in &self.params {
            out.extend_from_slice(&(path.len() as u32).to_le_bytes());
            out.extend_from_slice(path.as_bytes());
            out.extend_from_slice(&(p.value.shape().len() as u32).to_le_bytes());
            for &d in p.value.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in p.value.data() {
                out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(r.err_at(0, "bad magic"));
        }
        let count = r.u32()?;
        let mut out = Self::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let at = r.pos;
            let path = std::str::from_utf8(r.take(len)?)
                .map_err(|_| r.err_at(at, "path is not UTF-8"))?
                .to_string();
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let at = r.pos;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| r.err_at(at, "size overflow"))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                .collect();
            let tensor = Tensor::new(&shape, data).map_err(|e| r.err_at(at, &e.to_string()))?;
            out.insert(&path, tensor).map_err(|e| r.err_at(at, &e.to_string()))?;
        }
        if r.pos != bytes.len() {
            return Err(r.err_at(r.pos, "trailing bytes"));
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err_at(&self, offset: usize, reason: &str) -> Error {
        Error::Malformed {
            what: "checkpoint",
            offset: offset as u64,
            reason: reason.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.err_at(self.pos, "truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
