//! Two-stage training: maximum likelihood, then preference-weighted
//! REINFORCE with a greedy baseline, each batch under a preference vector
//! drawn from the grid.

mod config;
mod grid;
mod optim;
mod rl;
mod sweep;
mod train;

pub use config::{PreferenceSampling, TrainConfig};
pub use grid::{enumerate_preference_grid, grid_steps, sample_preference};
pub use optim::{clip_grad_norm, Optimizer, OptimizerConfig};
pub use rl::{compute_baseline, reinforce_surrogate, rollout, rollout_gradient, Rollout};
pub use sweep::{evaluate, preference_sweep, EvalStrategy, SweepTable};
pub use train::{BatchStats, EpochLog, Stage, TrainLog, Trainer};
