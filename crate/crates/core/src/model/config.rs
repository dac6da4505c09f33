use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What sits between encoder and decoder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bottleneck {
    /// Tokenize, run the Transformer stack, detokenize.
    #[default]
    Transformer,
    /// Pass the deepest encoder features straight through.
    Identity,
    /// Replace the bottleneck output by zeros; only skips carry signal.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioUNetConfig {
    pub enc_dec_levels: usize,
    pub transformer_layers: usize,
    /// Spatial patch size of a token; only 1 is supported.
    pub token_patch: usize,
    pub token_dim: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    /// Channels of the input layer and first level; doubles per deeper level.
    pub base_channels: usize,
    /// Frequency extent of the input (Mel bands).
    pub input_bands: usize,
    /// Time extent of the input (frames).
    pub input_frames: usize,
    pub bottleneck: Bottleneck,
}

impl Default for RadioUNetConfig {
    fn default() -> Self {
        RadioUNetConfig {
            enc_dec_levels: 3,
            transformer_layers: 12,
            token_patch: 1,
            token_dim: 256,
            heads: 4,
            mlp_ratio: 4,
            base_channels: 32,
            input_bands: 80,
            input_frames: 80,
            bottleneck: Bottleneck::Transformer,
        }
    }
}

impl RadioUNetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.enc_dec_levels == 0 {
            return bad("enc_dec_levels must be at least 1".into());
        }
        if self.token_patch != 1 {
            return bad(format!("token_patch must be 1, got {}", self.token_patch));
        }
        if self.token_dim == 0 || self.heads == 0 || !self.token_dim.is_multiple_of(self.heads) {
            return bad(format!(
                "token_dim {} must be a positive multiple of heads {}",
                self.token_dim, self.heads
            ));
        }
        if self.mlp_ratio == 0 || self.base_channels == 0 {
            return bad("mlp_ratio and base_channels must be positive".into());
        }
        let unit = 1usize << self.enc_dec_levels;
        for (name, n) in [("input_bands", self.input_bands), ("input_frames", self.input_frames)] {
            if n == 0 || n % unit != 0 {
                return bad(format!(
                    "{name} = {n} must be a positive multiple of 2^enc_dec_levels = {unit}"
                ));
            }
        }
        Ok(())
    }

    /// Channels at encoder level `l` (0 is the input layer).
    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level.saturating_sub(1)
    }

    /// (frequency, time) extent at encoder level `l`.
    pub fn extent(&self, level: usize) -> (usize, usize) {
        (self.input_bands >> level, self.input_frames >> level)
    }

    /// Tokens at the bottleneck: H·W / P².
    pub fn bottleneck_tokens(&self) -> usize {
        let (f, t) = self.extent(self.enc_dec_levels);
        f * t / (self.token_patch * self.token_patch)
    }

    /// The small configuration used by model-level gradient checks.
    pub fn tiny() -> Self {
        RadioUNetConfig {
            enc_dec_levels: 2,
            transformer_layers: 2,
            token_dim: 32,
            heads: 4,
            mlp_ratio: 2,
            base_channels: 4,
            input_bands: 16,
            input_frames: 16,
            ..Self::default()
        }
    }
}
