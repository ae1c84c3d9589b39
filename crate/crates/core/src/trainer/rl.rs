//! Preference-weighted REINFORCE with a greedy self-critical baseline.

use crate::autodiff::{Graph, Tensor, Var};
use crate::corpus::Example;
use crate::error::Result;
use crate::metrics::{weighted_reward, Objective, RewardVector, Scorer};
use crate::model::{Generation, Model, Strategy};
use crate::preference::PreferenceVector;
use crate::rng::Rng;

/// Scalar surrogate whose gradient is the REINFORCE estimate:
/// `(1/N) Σ_n (R_n − b)·nll_n`, where `nll_n = −log π(Y_n)`. Its gradient
/// equals `−(1/N) Σ_n (R_n − b) ∇log π(Y_n)`.
pub fn reinforce_surrogate(g: &mut Graph, nlls: &[Var], rewards: &[f64], baseline: f64) -> Result<Option<Var>> {
    let n = nlls.len() as f64;
    let mut total: Option<Var> = None;
    for (&nll, &r) in nlls.iter().zip(rewards) {
        let adv = r - baseline;
        if adv == 0.0 {
            continue;
        }
        let term = g.scale(nll, adv / n);
        total = Some(match total {
            Some(t) => g.add(t, term)?,
            None => term,
        });
    }
    Ok(total)
}

/// `b = Σ_i p_i r^i(Y_greedy)` for the greedy decode under `p`.
pub fn compute_baseline(
    model: &Model,
    example: &Example,
    p: &PreferenceVector,
    objectives: &[Objective],
    scorer: &Scorer,
) -> Result<f64> {
    let u = model.condition(&example.features, p)?;
    let greedy = model.generate_from(&u, Strategy::Greedy)?;
    weighted_reward(p, &scorer.rewards(objectives, &greedy.tokens, &example.reference))
}

/// Rollouts of one item under one preference.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub greedy: Generation,
    pub baseline: f64,
    pub samples: Vec<Generation>,
    pub rewards: Vec<RewardVector>,
    pub weighted: Vec<f64>,
}

pub fn rollout(
    model: &Model,
    example: &Example,
    p: &PreferenceVector,
    objectives: &[Objective],
    scorer: &Scorer,
    n_samples: usize,
    temperature: f64,
    rng: &mut Rng,
) -> Result<Rollout> {
    let u = model.condition(&example.features, p)?;
    let greedy = model.generate_from(&u, Strategy::Greedy)?;
    let baseline = weighted_reward(p, &scorer.rewards(objectives, &greedy.tokens, &example.reference))?;
    let mut samples = Vec::with_capacity(n_samples);
    let mut rewards = Vec::with_capacity(n_samples);
    let mut weighted = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let s = model.generate_from(&u, Strategy::Sample { temperature, rng })?;
        let r = scorer.rewards(objectives, &s.tokens, &example.reference);
        weighted.push(weighted_reward(p, &r)?);
        rewards.push(r);
        samples.push(s);
    }
    Ok(Rollout {
        greedy,
        baseline,
        samples,
        rewards,
        weighted,
    })
}

/// Parameter gradients of the REINFORCE surrogate for one rollout, or
/// `None` when every advantage is zero.
pub fn rollout_gradient(model: &Model, example: &Example, p: &PreferenceVector, ro: &Rollout) -> Result<Option<Vec<Tensor>>> {
    if ro.weighted.iter().all(|&r| r == ro.baseline) {
        return Ok(None);
    }
    let mut g = Graph::new();
    let b = model.bind(&mut g);
    let u = model.condition_taped(&mut g, &b, &example.features, p)?;
    let mut nlls = Vec::with_capacity(ro.samples.len());
    for s in &ro.samples {
        nlls.push(model.sequence_nll(&mut g, &b, u, &s.tokens, s.ended_with_eos)?);
    }
    let Some(loss) = reinforce_surrogate(&mut g, &nlls, &ro.weighted, ro.baseline)? else {
        return Ok(None);
    };
    let grads = g.backward(loss)?;
    Ok(Some(collect_grads(model, &b, &grads)))
}

/// Gradients of the bound parameters, zeros where none flowed.
pub(crate) fn collect_grads(model: &Model, b: &crate::model::Bound, grads: &crate::autodiff::Gradients) -> Vec<Tensor> {
    b.vars()
        .iter()
        .zip(model.params().tensors())
        .map(|(&v, t)| grads.get(v).cloned().unwrap_or_else(|| Tensor::zeros_like(t)))
        .collect()
}
