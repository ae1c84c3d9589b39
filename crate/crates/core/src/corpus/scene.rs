use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::metrics::LabelSet;
use crate::rng::{self, Rng};

/// Root seed of the per-finding feature signatures. Fixed so that every
/// corpus, whatever its own seed, shares one finding-to-feature mapping.
pub const SIGNATURE_SEED: u64 = 0x5EED_F1D1_0000_0001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Mild,
    Moderate,
    Severe,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Mild, Severity::Moderate, Severity::Severe];

    pub fn word(self) -> &'static str {
        match self {
            Severity::Mild => "mild",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
        }
    }

    /// Amplitude of the finding signature in the feature grid.
    pub fn amplitude(self) -> f64 {
        match self {
            Severity::Mild => 1.0,
            Severity::Moderate => 1.5,
            Severity::Severe => 2.0,
        }
    }
}

/// Shape and noise of the synthetic patch-feature grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub patches: usize,
    pub feature_dim: usize,
    pub noise: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            patches: 16,
            feature_dim: 32,
            noise: 0.1,
        }
    }
}

/// A ground-truth case: findings sorted by lexicon index, each with a severity.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub findings: Vec<(usize, Severity)>,
    pub seed: u64,
}

impl Scene {
    /// Draws 1..=`max_findings` distinct findings with uniform severities.
    pub fn sample(n_findings: usize, max_findings: usize, seed: u64) -> Scene {
        let mut r = rng::stream(seed, &[0]);
        let k = r.random_range(1..=max_findings.min(n_findings));
        let mut chosen: Vec<usize> = sample(&mut r, n_findings, k).into_vec();
        chosen.sort_unstable();
        let findings = chosen
            .into_iter()
            .map(|f| (f, Severity::ALL[r.random_range(0..Severity::ALL.len())]))
            .collect();
        Scene { findings, seed }
    }

    pub fn labels(&self) -> LabelSet {
        self.findings.iter().map(|&(f, _)| f).collect()
    }

    /// Sum of severity-scaled finding signatures tiled over every patch,
    /// plus Gaussian noise. Pure in (findings, severities, seed).
    pub fn features(&self, grid: &GridSpec) -> Result<Tensor> {
        let d = grid.feature_dim;
        let mut base = vec![0.0; d];
        for &(f, sev) in &self.findings {
            for (b, s) in base.iter_mut().zip(signature(f, d)) {
                *b += sev.amplitude() * s;
            }
        }
        let noise = Normal::new(0.0, grid.noise).map_err(|e| Error::Config(format!("noise: {e}")))?;
        let mut r = rng::stream(self.seed, &[1]);
        let mut data = Vec::with_capacity(grid.patches * d);
        for _ in 0..grid.patches {
            data.extend(base.iter().map(|b| b + noise.sample(&mut r)));
        }
        Tensor::matrix(grid.patches, d, data)
    }
}

/// Fixed standard-normal signature of one finding.
pub fn signature(finding: usize, dim: usize) -> Vec<f64> {
    let mut r: Rng = rng::stream(SIGNATURE_SEED, &[finding as u64]);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..dim).map(|_| normal.sample(&mut r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_sorted_and_bounded() {
        for seed in 0..200 {
            let s = Scene::sample(14, 4, seed);
            assert!((1..=4).contains(&s.findings.len()));
            assert!(s.findings.windows(2).all(|w| w[0].0 < w[1].0));
            assert_eq!(s, Scene::sample(14, 4, seed));
        }
    }

    #[test]
    fn features_are_pure() {
        let s = Scene::sample(14, 4, 3);
        let g = GridSpec::default();
        let a = s.features(&g).unwrap();
        assert_eq!(a, s.features(&g).unwrap());
        assert_eq!(a.shape(), &[16, 32]);
        let mut other = s.clone();
        other.findings[0].1 = match other.findings[0].1 {
            Severity::Mild => Severity::Severe,
            _ => Severity::Mild,
        };
        assert_ne!(a, other.features(&g).unwrap());
    }
}
