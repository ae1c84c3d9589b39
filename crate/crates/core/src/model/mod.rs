//! Preference-conditioned encoder–decoder.
//!
//! Patch features are encoded by post-norm transformer layers into `E`. The
//! preference vector is projected, repeated once per patch into `P`, and used
//! as the attention query over `E`; the result `H` is merged as
//! `U = E + alpha·H`. The decoder reads `U` through cross-attention only.
//!
//! Two forward paths exist: a taped one for training ([`Model::mle_loss`],
//! [`Model::sequence_nll`]) and a tape-free one with cached keys and values
//! for generation ([`Model::decoder`]).

mod config;
mod generate;
mod infer;
mod params;
mod taped;

pub use config::{FusionMode, ModelConfig};
pub use generate::{beam, decode, greedy, sample, Generation, Strategy};
pub use infer::{DecodeState, Decoder};
pub use params::ParamStore;
pub use taped::Bound;

use std::path::Path;

use crate::autodiff::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Tensor};
use crate::corpus::EOS;
use crate::error::{Error, Result};
use crate::preference::PreferenceVector;
use crate::rng;
use params::Layout;

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

impl Model {
    /// A freshly initialised model; parameters depend only on `config` and `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let mut r = rng::seeded(seed);
        let (params, layout) = params::initialize(&config, &mut r);
        Ok(Model { config, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Changes the fusion scale; parameters are untouched.
    pub fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        let mut c = self.config.clone();
        c.alpha = alpha;
        c.validate()?;
        self.config = c;
        Ok(())
    }

    /// Generates from precomputed fused features.
    pub fn generate_from(&self, u: &Tensor, strategy: Strategy<'_>) -> Result<Generation> {
        decode(self.decoder(u)?, self.config.max_len, Some(EOS), strategy)
    }

    pub fn generate(&self, features: &Tensor, p: &PreferenceVector, strategy: Strategy<'_>) -> Result<Generation> {
        let u = self.condition(features, p)?;
        self.generate_from(&u, strategy)
    }

    pub fn write_params<W: std::io::Write>(&self, w: W) -> Result<()> {
        write_checkpoint(w, &self.params.entries()).map_err(|e| Error::io("checkpoint", e))
    }

    pub fn read_params<R: std::io::Read>(&mut self, r: R) -> Result<()> {
        self.params.load_entries(read_checkpoint(r)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(path, &self.params.entries())
    }

    /// Builds a model for `config` and fills it from a checkpoint file.
    pub fn load(config: ModelConfig, path: &Path) -> Result<Model> {
        let mut m = Model::new(config, 0)?;
        m.params.load_entries(load_checkpoint(path)?)?;
        Ok(m)
    }
}

/// Sinusoidal position encoding of one position.
pub fn sinusoid(pos: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| {
            let angle = pos as f64 / 10000f64.powf((i - i % 2) as f64 / d as f64);
            if i % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

pub fn sinusoid_table(n: usize, d: usize) -> Tensor {
    let data = (0..n).flat_map(|p| sinusoid(p, d)).collect();
    Tensor::matrix(n, d, data).expect("positive dims")
}
