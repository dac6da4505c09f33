use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RadioUNetConfig;
use super::features::NormStats;
use super::net::RadioUNet;
use crate::error::{Error, Result};
use crate::nn::ModelParams;

/// Everything needed to resume training or run inference.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingState {
    pub model: RadioUNetConfig,
    pub params: ModelParams<f32>,
    /// Completed SGD steps.
    pub step: u64,
    pub lr: f32,
    pub stats: NormStats,
    pub seed: u64,
}

/// JSON sidecar written next to each checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSidecar {
    pub model: RadioUNetConfig,
    pub step: u64,
    pub lr: f32,
    pub stats: NormStats,
    pub seed: u64,
    pub param_count: usize,
}

impl TrainingState {
    pub fn new(model: RadioUNetConfig, stats: NormStats, lr: f32, seed: u64) -> Result<Self> {
        let params = RadioUNet::new(model.clone())?.init_params(seed)?;
        Ok(TrainingState {
            model,
            params,
            step: 0,
            lr,
            stats,
            seed,
        })
    }

    pub fn network(&self) -> Result<RadioUNet> {
        RadioUNet::new(self.model.clone())
    }

    fn sidecar(&self) -> StateSidecar {
        StateSidecar {
            model: self.model.clone(),
            step: self.step,
            lr: self.lr,
            stats: self.stats,
            seed: self.seed,
            param_count: self.params.scalar_count(),
        }
    }

    /// Sidecar path for a checkpoint path (`x.ckpt` → `x.json`).
    pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
        checkpoint.with_extension("json")
    }

    pub fn save(&self, checkpoint: &Path) -> Result<()> {
        self.params.save(checkpoint)?;
        let side = Self::sidecar_path(checkpoint);
        let json = serde_json::to_string_pretty(&self.sidecar()).map_err(|e| Error::json(&side, e))?;
        std::fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
    }

    pub fn load(checkpoint: &Path) -> Result<Self> {
        let side = Self::sidecar_path(checkpoint);
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: StateSidecar = serde_json::from_str(&text).map_err(|e| Error::json(&side, e))?;
        let params = ModelParams::load(checkpoint)?;
        let net = RadioUNet::new(meta.model.clone())?;
        for spec in net.param_specs() {
            match params.get(&spec.path) {
                Some(p) if p.value.shape() == spec.shape.as_slice() => {}
                _ => {
                    return Err(Error::Shape(format!(
                        "checkpoint {} does not match the model: parameter {}",
                        checkpoint.display(),
                        spec.path
                    )))
                }
            }
        }
        if params.len() != net.param_specs().len() {
            return Err(Error::Shape(format!(
                "checkpoint {} has {} parameters, model expects {}",
                checkpoint.display(),
                params.len(),
                net.param_specs().len()
            )));
        }
        Ok(TrainingState {
            model: meta.model,
            params,
            step: meta.step,
            lr: meta.lr,
            stats: meta.stats,
            seed: meta.seed,
        })
    }
}
