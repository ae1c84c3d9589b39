use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::config::{PreferenceSampling, TrainConfig};
use super::grid::enumerate_preference_grid;
use super::optim::{clip_grad_norm, Optimizer};
use super::rl::{collect_grads, rollout, rollout_gradient};
use crate::autodiff::{Graph, Tensor};
use crate::corpus::Example;
use crate::error::{Error, Result};
use crate::metrics::Scorer;
use crate::model::Model;
use crate::preference::PreferenceVector;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Teacher-forced maximum likelihood.
    Mle,
    /// Preference-weighted REINFORCE.
    Reinforce,
}

impl Stage {
    pub fn number(self) -> u8 {
        match self {
            Stage::Mle => 1,
            Stage::Reinforce => 2,
        }
    }
}

/// Aggregates of one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    /// 1-based within its stage.
    pub epoch: usize,
    pub stage: Stage,
    /// Mean item loss: cross-entropy in stage 1, negative mean weighted
    /// sample reward in stage 2.
    pub loss: f64,
    /// Mean per-objective sample reward (stage 2 only).
    pub rewards: Option<Vec<f64>>,
    pub seconds: Option<f64>,
    /// Largest gradient norm of the fusion parameters over the epoch's batches.
    pub pvf_grad_norm: f64,
}

/// Per-epoch rows of a training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub pref_dim: usize,
    pub rows: Vec<EpochLog>,
}

impl TrainLog {
    /// CSV with header `epoch,stage,loss,reward_1..reward_m,seconds`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["epoch".to_string(), "stage".into(), "loss".into()];
        header.extend((1..=self.pref_dim).map(|i| format!("reward_{i}")));
        header.push("seconds".into());
        let io = |e: csv::Error| Error::Contract(format!("writing log: {e}"));
        out.write_record(&header).map_err(io)?;
        for r in &self.rows {
            let mut rec = vec![r.epoch.to_string(), r.stage.number().to_string(), r.loss.to_string()];
            match &r.rewards {
                Some(v) => rec.extend(v.iter().map(f64::to_string)),
                None => rec.extend(std::iter::repeat_n(String::new(), self.pref_dim)),
            }
            rec.push(r.seconds.map(|s| format!("{s:.3}")).unwrap_or_default());
            out.write_record(&rec).map_err(io)?;
        }
        out.flush().map_err(|e| Error::io("log", e))
    }
}

/// Result of one optimizer step.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub losses: Vec<f64>,
    pub rewards: Vec<Vec<f64>>,
    pub grad_norm: f64,
    pub pvf_grad_norm: f64,
}

struct ItemOut {
    loss: f64,
    rewards: Vec<f64>,
    grads: Option<Vec<Tensor>>,
}

pub struct Trainer<'a> {
    config: &'a TrainConfig,
    scorer: &'a Scorer,
    grid: Vec<PreferenceVector>,
    pool: Option<rayon::ThreadPool>,
}

impl<'a> Trainer<'a> {
    pub fn new(config: &'a TrainConfig, scorer: &'a Scorer) -> Result<Self> {
        config.validate()?;
        let grid = enumerate_preference_grid(config.pref_dim(), config.preference_interval)?;
        let pool = if config.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.threads)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Trainer {
            config,
            scorer,
            grid,
            pool,
        })
    }

    pub fn grid(&self) -> &[PreferenceVector] {
        &self.grid
    }

    /// Runs `f` over `0..n`, in parallel when configured; results keep index order.
    fn map_items<T: Send>(&self, n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        match &self.pool {
            Some(pool) => {
                use rayon::prelude::*;
                pool.install(|| (0..n).into_par_iter().map(&f).collect())
            }
            None => (0..n).map(f).collect(),
        }
    }

    fn check_model(&self, model: &Model) -> Result<()> {
        if model.config().pref_dim != self.config.pref_dim() {
            return Err(Error::Config(format!(
                "model preference dimension {} differs from the {} training objectives",
                model.config().pref_dim,
                self.config.pref_dim()
            )));
        }
        Ok(())
    }

    /// Preference vector for a batch, drawn uniformly from the grid.
    pub fn batch_preference(&self, stage: Stage, epoch: usize, batch: usize) -> PreferenceVector {
        let mut r = rng::stream(self.config.seed, &[stage.number() as u64, epoch as u64, 1, batch as u64]);
        self.grid[r.random_range(0..self.grid.len())].clone()
    }

    /// Preference vectors for the `n` items of a batch under the configured
    /// sampling scheme.
    pub fn batch_preferences(&self, stage: Stage, epoch: usize, batch: usize, n: usize) -> Vec<PreferenceVector> {
        match self.config.preference_sampling {
            PreferenceSampling::PerBatch => vec![self.batch_preference(stage, epoch, batch); n],
            PreferenceSampling::PerItem => {
                let mut r = rng::stream(self.config.seed, &[stage.number() as u64, epoch as u64, 1, batch as u64]);
                (0..n).map(|_| self.grid[r.random_range(0..self.grid.len())].clone()).collect()
            }
        }
    }

    /// One optimizer step on `items` (dataset indices into `data`); item
    /// `k` is conditioned on `prefs[k]`.
    pub fn step(
        &self,
        stage: Stage,
        epoch: usize,
        batch: usize,
        model: &mut Model,
        opt: &mut Optimizer,
        data: &[Example],
        items: &[usize],
        prefs: &[PreferenceVector],
    ) -> Result<BatchStats> {
        let cfg = self.config;
        if prefs.len() != items.len() {
            return Err(Error::Contract(format!(
                "{} preference vectors for {} items",
                prefs.len(),
                items.len()
            )));
        }
        let frozen: &Model = model;
        let outs = self.map_items(items.len(), |k| {
            let ex = &data[items[k]];
            let p = &prefs[k];
            match stage {
                Stage::Mle => {
                    let mut g = Graph::new();
                    let b = frozen.bind(&mut g);
                    let loss = frozen.mle_loss(&mut g, &b, &ex.features, p, &ex.reference.tokens)?;
                    let grads = g.backward(loss)?;
                    Ok(ItemOut {
                        loss: g.value(loss).item()?,
                        rewards: Vec::new(),
                        grads: Some(collect_grads(frozen, &b, &grads)),
                    })
                }
                Stage::Reinforce => {
                    let mut r = rng::stream(cfg.seed, &[2, epoch as u64, 2, items[k] as u64]);
                    let ro = rollout(frozen, ex, p, &cfg.objectives, self.scorer, cfg.n_samples, cfg.temperature, &mut r)?;
                    let n = ro.samples.len() as f64;
                    let mut rewards = vec![0.0; cfg.pref_dim()];
                    for rv in &ro.rewards {
                        for (acc, v) in rewards.iter_mut().zip(rv.values()) {
                            *acc += v / n;
                        }
                    }
                    Ok(ItemOut {
                        loss: -ro.weighted.iter().sum::<f64>() / n,
                        rewards,
                        grads: rollout_gradient(frozen, ex, p, &ro)?,
                    })
                }
            }
        })?;

        let non_finite = |o: &ItemOut| !o.loss.is_finite() || o.grads.as_ref().is_some_and(|g| g.iter().any(|t| !t.is_finite()));
        if outs.iter().any(non_finite) {
            return Err(Error::NonFinite {
                stage: stage.number(),
                epoch,
                batch,
                items: items
                    .iter()
                    .zip(&outs)
                    .filter(|(_, o)| non_finite(o))
                    .map(|(&i, _)| data[i].id.clone())
                    .collect(),
            });
        }

        let mut total: Vec<Tensor> = model.params().tensors().iter().map(Tensor::zeros_like).collect();
        for o in &outs {
            if let Some(g) = &o.grads {
                for (t, gi) in total.iter_mut().zip(g) {
                    t.add_assign(gi);
                }
            }
        }
        let inv = 1.0 / items.len() as f64;
        for t in &mut total {
            t.scale_assign(inv);
        }
        let pvf_sq: f64 = model
            .params()
            .names()
            .iter()
            .zip(&total)
            .filter(|(n, _)| n.starts_with("pvf."))
            .map(|(_, t)| t.squared_norm())
            .sum();
        let grad_norm = match cfg.clip_norm {
            Some(c) => clip_grad_norm(&mut total, c),
            None => total.iter().map(Tensor::squared_norm).sum::<f64>().sqrt(),
        };
        let lr = match stage {
            Stage::Mle => cfg.lr1,
            Stage::Reinforce => cfg.lr2,
        };
        opt.step(model.params_mut().tensors_mut(), &total, lr)?;
        Ok(BatchStats {
            losses: outs.iter().map(|o| o.loss).collect(),
            rewards: outs.into_iter().map(|o| o.rewards).collect(),
            grad_norm,
            pvf_grad_norm: pvf_sq.sqrt(),
        })
    }

    /// Runs every epoch of one stage with a fresh optimizer.
    pub fn run_stage(&self, stage: Stage, model: &mut Model, data: &[Example]) -> Result<Vec<EpochLog>> {
        self.check_model(model)?;
        let epochs = match stage {
            Stage::Mle => self.config.epochs1,
            Stage::Reinforce => self.config.epochs2,
        };
        if epochs > 0 && data.is_empty() {
            return Err(Error::Contract("training data is empty".into()));
        }
        let mut opt = Optimizer::new(self.config.optimizer);
        let mut logs = Vec::with_capacity(epochs);
        for epoch in 1..=epochs {
            let start = Instant::now();
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut rng::stream(self.config.seed, &[stage.number() as u64, epoch as u64, 0]));
            let mut losses = 0.0;
            let mut rewards = vec![0.0; self.config.pref_dim()];
            let mut pvf_norm: f64 = 0.0;
            for (bi, items) in order.chunks(self.config.batch_size).enumerate() {
                let prefs = self.batch_preferences(stage, epoch, bi, items.len());
                let stats = self.step(stage, epoch, bi, model, &mut opt, data, items, &prefs)?;
                losses += stats.losses.iter().sum::<f64>();
                for r in &stats.rewards {
                    for (acc, v) in rewards.iter_mut().zip(r) {
                        *acc += v;
                    }
                }
                pvf_norm = pvf_norm.max(stats.pvf_grad_norm);
            }
            let n = data.len() as f64;
            logs.push(EpochLog {
                epoch,
                stage,
                loss: losses / n,
                rewards: (stage == Stage::Reinforce).then(|| rewards.iter().map(|r| r / n).collect()),
                seconds: self.config.log_wall_time.then(|| start.elapsed().as_secs_f64()),
                pvf_grad_norm: pvf_norm,
            });
        }
        Ok(logs)
    }

    /// Stage 1 then stage 2; `after_stage` sees the model after each stage.
    pub fn train(
        &self,
        model: &mut Model,
        data: &[Example],
        mut after_stage: impl FnMut(Stage, &Model) -> Result<()>,
    ) -> Result<TrainLog> {
        let mut log = TrainLog {
            pref_dim: self.config.pref_dim(),
            rows: Vec::new(),
        };
        for stage in [Stage::Mle, Stage::Reinforce] {
            log.rows.extend(self.run_stage(stage, model, data)?);
            after_stage(stage, model)?;
        }
        Ok(log)
    }
}
