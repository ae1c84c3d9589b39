//! Central finite-difference gradient checking.
//!
//! The numerical side only ever evaluates the forward pass, so it stays
//! independent of every backward rule it checks.

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
    pub max_rel_error: f64,
    /// `(input index, element index)` where the largest error occurred.
    pub worst: (usize, usize),
    pub checked: usize,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn evaluate<F>(inputs: &[Tensor], f: &F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let root = f(&mut g, &vars)?;
    g.value(root).item()
}

/// Compares backward-pass gradients of the scalar `f(inputs)` against
/// central differences with the given step, for every input element.
pub fn check_gradients<F>(inputs: &[Tensor], step: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let root = f(&mut g, &vars)?;
    let grads = g.backward(root)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        checked: 0,
    };
    let mut probe = inputs.to_vec();
    for (i, &v) in vars.iter().enumerate() {
        let analytic = grads.get(v).cloned().unwrap_or_else(|| Tensor::zeros_like(&inputs[i]));
        for j in 0..inputs[i].len() {
            let orig = inputs[i].data()[j];
            probe[i].data_mut()[j] = orig + step;
            let plus = evaluate(&probe, &f)?;
            probe[i].data_mut()[j] = orig - step;
            let minus = evaluate(&probe, &f)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic.data()[j], numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (i, j);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
