use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use rfspeech_core::metrics::Variant;
use rfspeech_core::model::{RadioUNetConfig, TrainConfig};
use rfspeech_core::signal::DEFAULT_GL_ITERS;
use rfspeech_core::sim::{RadarConfig, SplitFractions};

pub const SEED_ENV: &str = "R2S_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    /// Directory of mono WAV clips; when null, synthetic speech is generated.
    pub speech_dir: Option<PathBuf>,
    pub synthetic_clips: usize,
    pub split: SplitFractions,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            speech_dir: None,
            synthetic_clips: 50,
            split: SplitFractions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub variants: Vec<Variant>,
    pub griffin_lim_iters: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            variants: Variant::ALL.to_vec(),
            griffin_lim_iters: DEFAULT_GL_ITERS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    pub run: PathBuf,
    pub eval: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus: "out/corpus".into(),
            run: "out/run".into(),
            eval: "out/eval".into(),
        }
    }
}

/// Everything a run needs; written next to every command's outputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub radar: RadarConfig,
    pub corpus: CorpusConfig,
    pub model: RadioUNetConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("config key {path}: {}", e.into_inner())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("config {}", path.display()))
    }

    /// Seed precedence: explicit flag, then the environment, then the file.
    pub fn apply_seed(&mut self, flag: Option<u64>) -> Result<()> {
        let env = match std::env::var(SEED_ENV) {
            Ok(v) => Some(v.trim().parse::<u64>().with_context(|| format!("{SEED_ENV}={v:?} is not an integer"))?),
            Err(_) => None,
        };
        if let Some(seed) = flag.or(env) {
            self.radar.rng_seed = seed;
            self.train.seed = seed;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.corpus.split.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.eval.griffin_lim_iters == 0 {
            anyhow::bail!("eval.griffin_lim_iters must be positive");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn write_snapshot(&self, dir: &Path) -> Result<()> {
        let path = dir.join("config.json");
        std::fs::write(&path, self.to_json()).with_context(|| format!("writing {}", path.display()))
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// `key = default` lines for every config key, derived from the defaults.
pub fn key_reference() -> String {
    let mut keys = Vec::new();
    flatten("", &serde_json::to_value(RunConfig::default()).unwrap(), &mut keys);
    let width = keys.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("Config keys (JSON file via --config; defaults shown):\n");
    for (k, v) in keys {
        out.push_str(&format!("  {k:<width$}  {v}\n"));
    }
    out.push_str(&format!("\n{SEED_ENV} overrides radar.rng_seed and train.seed; --seed overrides both.\n"));
    out
}
