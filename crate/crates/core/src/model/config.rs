use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the preference query attends over the encoded features.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Multi-head attention with learned query/key/value/output projections,
    /// scaled by the per-head width.
    #[default]
    Projected,
    /// Single head, no projections: `softmax(P Eᵀ / √d) E`.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Model width.
    pub d_model: usize,
    /// Feature patches per item.
    pub patches: usize,
    /// Width of each input patch feature.
    pub d_in: usize,
    /// Hidden width of the feed-forward blocks.
    pub d_ff: usize,
    pub vocab_size: usize,
    /// Preference dimension (number of objectives).
    pub pref_dim: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    /// Scale of the fusion residual, `U = E + alpha·H`.
    pub alpha: f64,
    /// Maximum number of generated tokens, excluding `<eos>`.
    pub max_len: usize,
    /// Learned per-patch position embeddings in the encoder.
    pub encoder_positions: bool,
    pub fusion: FusionMode,
    pub layer_norm_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 64,
            patches: 16,
            d_in: 32,
            d_ff: 128,
            vocab_size: 64,
            pref_dim: 2,
            n_heads: 8,
            n_enc_layers: 2,
            n_dec_layers: 2,
            alpha: 3.0,
            max_len: 24,
            encoder_positions: true,
            fusion: FusionMode::Projected,
            layer_norm_eps: 1e-5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_model", self.d_model),
            ("patches", self.patches),
            ("d_in", self.d_in),
            ("d_ff", self.d_ff),
            ("vocab_size", self.vocab_size),
            ("pref_dim", self.pref_dim),
            ("n_heads", self.n_heads),
            ("max_len", self.max_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.layer_norm_eps >= 0.0) {
            return Err(Error::Config("layer_norm_eps must be >= 0".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}
