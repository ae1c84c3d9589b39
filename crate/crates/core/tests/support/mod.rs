//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use prefseq::autodiff::Tensor;
use prefseq::model::ModelConfig;
use prefseq::rng::Rng;
use rand::Rng as _;

/// Straightforward re-implementations of the text metrics.
pub mod oracle {
    /// Occurrences of `gram` in `seq`, by direct scan.
    fn occurrences(seq: &[usize], gram: &[usize]) -> usize {
        if gram.len() > seq.len() {
            return 0;
        }
        (0..=seq.len() - gram.len()).filter(|&i| &seq[i..i + gram.len()] == gram).count()
    }

    /// Modified n-gram precision as (clipped matches, candidate n-grams).
    pub fn clipped_precision(cand: &[usize], reference: &[usize], n: usize) -> (usize, usize) {
        if cand.len() < n {
            return (0, 0);
        }
        let total = cand.len() - n + 1;
        let mut clipped = 0;
        for i in 0..total {
            let gram = &cand[i..i + n];
            let first = (0..i).all(|j| &cand[j..j + n] != gram);
            if first {
                clipped += occurrences(cand, gram).min(occurrences(reference, gram));
            }
        }
        (clipped, total)
    }

    /// Sentence BLEU-n, uniform weights, no smoothing.
    pub fn bleu(cand: &[usize], reference: &[usize], n: usize) -> f64 {
        let mut product = 1.0;
        for k in 1..=n {
            let (m, t) = clipped_precision(cand, reference, k);
            if m == 0 {
                return 0.0;
            }
            product *= m as f64 / t as f64;
        }
        let (c, r) = (cand.len() as f64, reference.len() as f64);
        let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        bp * product.powf(1.0 / n as f64)
    }

    fn is_subsequence(needle: &[usize], hay: &[usize]) -> bool {
        let mut it = hay.iter();
        needle.iter().all(|x| it.any(|y| y == x))
    }

    /// LCS length by trying every subsequence of the shorter input.
    pub fn lcs(a: &[usize], b: &[usize]) -> usize {
        let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        assert!(short.len() <= 16, "brute force LCS is exponential");
        let mut best = 0;
        for mask in 0u32..(1 << short.len()) {
            let size = mask.count_ones() as usize;
            if size <= best {
                continue;
            }
            let sub: Vec<usize> = (0..short.len()).filter(|i| mask & (1 << i) != 0).map(|i| short[i]).collect();
            if is_subsequence(&sub, long) {
                best = size;
            }
        }
        best
    }

    pub fn rouge_l(cand: &[usize], reference: &[usize], beta: f64) -> f64 {
        let l = lcs(cand, reference) as f64;
        if l == 0.0 {
            return 0.0;
        }
        let p = l / cand.len() as f64;
        let r = l / reference.len() as f64;
        (1.0 + beta * beta) * p * r / (r + beta * beta * p)
    }
}

pub fn random_sentence(rng: &mut Rng, min_len: usize, max_len: usize, vocab: usize) -> Vec<usize> {
    let len = rng.random_range(min_len..=max_len);
    (0..len).map(|_| rng.random_range(0..vocab)).collect()
}

pub fn random_tensor(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// A model small enough for element-wise finite differences.
pub fn tiny_config(vocab_size: usize) -> ModelConfig {
    ModelConfig {
        d_model: 8,
        patches: 3,
        d_in: 4,
        d_ff: 12,
        vocab_size,
        pref_dim: 2,
        n_heads: 2,
        n_enc_layers: 1,
        n_dec_layers: 1,
        max_len: 5,
        ..ModelConfig::default()
    }
}

pub fn features_for(config: &ModelConfig, rng: &mut Rng) -> Tensor {
    random_tensor(rng, config.patches, config.d_in, 1.0)
}

/// A two-step policy over three tokens with tabular logits: `first` for
/// step one and `second[y1]` for step two.
#[derive(Clone, Debug)]
pub struct TabularPolicy {
    pub first: [f64; 3],
    pub second: [[f64; 3]; 3],
}

impl TabularPolicy {
    fn softmax(l: &[f64; 3]) -> [f64; 3] {
        let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e = l.map(|x| (x - m).exp());
        let s: f64 = e.iter().sum();
        e.map(|x| x / s)
    }

    pub fn prob(&self, y: [usize; 2]) -> f64 {
        Self::softmax(&self.first)[y[0]] * Self::softmax(&self.second[y[0]])[y[1]]
    }

    /// Analytic `∇ log π(y)` over the 12 logits, `first` then `second` row-major.
    pub fn grad_log_prob(&self, y: [usize; 2]) -> [f64; 12] {
        let mut g = [0.0; 12];
        let p1 = Self::softmax(&self.first);
        for k in 0..3 {
            g[k] = f64::from(u8::from(k == y[0])) - p1[k];
        }
        let p2 = Self::softmax(&self.second[y[0]]);
        for k in 0..3 {
            g[3 + 3 * y[0] + k] = f64::from(u8::from(k == y[1])) - p2[k];
        }
        g
    }

    pub fn sequences() -> impl Iterator<Item = [usize; 2]> {
        (0..3).flat_map(|a| (0..3).map(move |b| [a, b]))
    }

    /// `Σ_Y π(Y)(R(Y) − b)(−∇log π(Y))`, the exact gradient of the expected loss.
    pub fn exact_gradient(&self, reward: impl Fn([usize; 2]) -> f64, baseline: f64) -> [f64; 12] {
        let mut out = [0.0; 12];
        for y in Self::sequences() {
            let w = self.prob(y) * (reward(y) - baseline);
            for (o, g) in out.iter_mut().zip(self.grad_log_prob(y)) {
                *o -= w * g;
            }
        }
        out
    }
}
