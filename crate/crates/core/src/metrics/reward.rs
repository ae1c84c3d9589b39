//! Per-objective rewards and their preference-weighted combination.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bleu::bleu;
use super::labels::{ce_prf, LabelSet, Labeler, Lexicon};
use super::rouge::{rouge_l, DEFAULT_ROUGE_BETA};
use crate::error::{Error, Result};
use crate::preference::PreferenceVector;

/// A scalar objective computed between a candidate and a reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Objective {
    /// BLEU of order 1..=4.
    Bleu(u8),
    RougeL,
    CePrecision,
    CeRecall,
    CeF1,
}

impl Objective {
    /// Every objective, in report order.
    pub const ALL: [Objective; 8] = [
        Objective::Bleu(1),
        Objective::Bleu(2),
        Objective::Bleu(3),
        Objective::Bleu(4),
        Objective::RougeL,
        Objective::CePrecision,
        Objective::CeRecall,
        Objective::CeF1,
    ];
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Bleu(n) => write!(f, "bleu{n}"),
            Objective::RougeL => f.write_str("rouge_l"),
            Objective::CePrecision => f.write_str("ce_precision"),
            Objective::CeRecall => f.write_str("ce_recall"),
            Objective::CeF1 => f.write_str("ce_f1"),
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bleu1" => Objective::Bleu(1),
            "bleu2" => Objective::Bleu(2),
            "bleu3" => Objective::Bleu(3),
            "bleu4" => Objective::Bleu(4),
            "rouge_l" => Objective::RougeL,
            "ce_precision" => Objective::CePrecision,
            "ce_recall" => Objective::CeRecall,
            "ce_f1" => Objective::CeF1,
            other => return Err(Error::Config(format!("unknown objective {other:?}"))),
        })
    }
}

impl TryFrom<String> for Objective {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Objective> for String {
    fn from(o: Objective) -> String {
        o.to_string()
    }
}

/// The ground truth a candidate is scored against.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub tokens: Vec<usize>,
    pub labels: LabelSet,
}

/// One score per objective, aligned with the preference dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardVector(pub Vec<f64>);

impl RewardVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Scores token sequences against references.
#[derive(Clone, Debug)]
pub struct Scorer {
    labeler: Labeler<usize>,
    rouge_beta: f64,
}

impl Scorer {
    /// `token_id` maps lexicon words onto vocabulary ids.
    pub fn new(lexicon: &Lexicon, token_id: impl Fn(&str) -> Option<usize>) -> Self {
        Scorer {
            labeler: Labeler::build(lexicon, token_id),
            rouge_beta: DEFAULT_ROUGE_BETA,
        }
    }

    pub fn with_rouge_beta(mut self, beta: f64) -> Self {
        self.rouge_beta = beta;
        self
    }

    pub fn labels(&self, tokens: &[usize]) -> LabelSet {
        self.labeler.extract(tokens)
    }

    pub fn score(&self, objective: Objective, candidate: &[usize], reference: &Reference) -> f64 {
        match objective {
            Objective::Bleu(n) => bleu(candidate, &reference.tokens, n as usize).unwrap_or(0.0),
            Objective::RougeL => rouge_l(candidate, &reference.tokens, self.rouge_beta),
            Objective::CePrecision | Objective::CeRecall | Objective::CeF1 => {
                let (p, r, f1) = ce_prf(&self.labels(candidate), &reference.labels);
                match objective {
                    Objective::CePrecision => p,
                    Objective::CeRecall => r,
                    _ => f1,
                }
            }
        }
    }

    pub fn rewards(&self, objectives: &[Objective], candidate: &[usize], reference: &Reference) -> RewardVector {
        RewardVector(objectives.iter().map(|&o| self.score(o, candidate, reference)).collect())
    }

    /// Improvement on one objective from appending a single token:
    /// `r(Y[..t]) - r(Y[..t-1])`, with the empty prefix scoring 0.
    pub fn step_reward(
        &self,
        objective: Objective,
        prefix: &[usize],
        previous: &[usize],
        reference: &Reference,
    ) -> Result<f64> {
        if prefix.len() != previous.len() + 1 || !prefix.starts_with(previous) {
            return Err(Error::Contract(format!(
                "step reward needs a one-token extension, got lengths {} and {}",
                prefix.len(),
                previous.len()
            )));
        }
        let base = if previous.is_empty() {
            // Label metrics score an empty pair as 1; the sum must start from 0.
            0.0
        } else {
            self.score(objective, previous, reference)
        };
        Ok(self.score(objective, prefix, reference) - base)
    }

    /// Sum over steps of the preference-weighted per-step rewards; equals
    /// `Σ_i p_i r^i(Y)` for non-empty `Y`.
    pub fn telescoped_reward(
        &self,
        objectives: &[Objective],
        preference: &PreferenceVector,
        candidate: &[usize],
        reference: &Reference,
    ) -> Result<f64> {
        check_dims(preference.dim(), objectives.len())?;
        let mut total = 0.0;
        for t in 1..=candidate.len() {
            for (&o, &w) in objectives.iter().zip(preference.weights()) {
                total += w * self.step_reward(o, &candidate[..t], &candidate[..t - 1], reference)?;
            }
        }
        Ok(total)
    }
}

fn check_dims(pref: usize, rewards: usize) -> Result<()> {
    if pref != rewards {
        return Err(Error::Contract(format!(
            "preference has {pref} weights but there are {rewards} rewards"
        )));
    }
    Ok(())
}

/// `Σ_i p_i r^i`.
pub fn weighted_reward(preference: &PreferenceVector, rewards: &RewardVector) -> Result<f64> {
    check_dims(preference.dim(), rewards.0.len())?;
    Ok(preference.weights().iter().zip(&rewards.0).map(|(p, r)| p * r).sum())
}
