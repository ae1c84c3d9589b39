use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    /// `v ← μv + g; θ ← θ − lr·v`.
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Sgd { momentum: 0.9 }
    }
}

impl OptimizerConfig {
    pub fn adam() -> Self {
        OptimizerConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerConfig::Sgd { momentum } => (0.0..1.0).contains(&momentum),
            OptimizerConfig::Adam { beta1, beta2, eps } => {
                (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// First-order optimizer with per-parameter state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer {
            config,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape("optimizer", &[params.len()], &[grads.len()]));
        }
        if self.first.is_empty() {
            self.first = params.iter().map(Tensor::zeros_like).collect();
            if matches!(self.config, OptimizerConfig::Adam { .. }) {
                self.second = params.iter().map(Tensor::zeros_like).collect();
            }
        }
        self.steps += 1;
        match self.config {
            OptimizerConfig::Sgd { momentum } => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((pi, gi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                        *vi = momentum * *vi + gi;
                        *pi -= lr * *vi;
                    }
                }
            }
            OptimizerConfig::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.steps as i32);
                let c2 = 1.0 - beta2.powi(self.steps as i32);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    for (((pi, gi), mi), vi) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        *pi -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Tensor::squared_norm).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads {
            g.scale_assign(s);
        }
    }
    norm
}
