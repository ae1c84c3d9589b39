use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on `Σ p_i = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A point on the probability simplex weighting `m` objectives.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceVector(Vec<f64>);

impl PreferenceVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Contract("preference vector must be non-empty".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Contract(format!("preference weight {w} is not a non-negative number")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Contract(format!(
                "preference weights must sum to 1, got sum {sum}"
            )));
        }
        Ok(PreferenceVector(weights))
    }

    /// The `i`-th corner of the simplex in `m` dimensions.
    pub fn basis(m: usize, i: usize) -> Self {
        assert!(i < m);
        let mut w = vec![0.0; m];
        w[i] = 1.0;
        PreferenceVector(w)
    }

    pub fn uniform(m: usize) -> Self {
        PreferenceVector(vec![1.0 / m as f64; m])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl std::str::FromStr for PreferenceVector {
    type Err = Error;

    /// Parses a comma-separated list such as `0.3,0.7`.
    fn from_str(s: &str) -> Result<Self> {
        let weights = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Contract(format!("invalid preference weight {part:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        PreferenceVector::new(weights)
    }
}

impl fmt::Display for PreferenceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{w}")?;
        }
        Ok(())
    }
}
