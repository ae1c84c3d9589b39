//! Sentence-level BLEU against a single reference, without smoothing.

use std::collections::HashMap;

use crate::error::{Error, Result};

fn ngram_counts(tokens: &[usize], n: usize) -> HashMap<&[usize], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and total candidate n-grams.
pub fn ngram_matches(candidate: &[usize], reference: &[usize], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let total = candidate.len().saturating_sub(n - 1);
    let clipped = cand
        .iter()
        .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
        .sum();
    (clipped, total)
}

pub fn brevity_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    if candidate_len > reference_len {
        1.0
    } else if candidate_len == 0 {
        0.0
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    }
}

/// BLEU-n: brevity penalty times the geometric mean of the clipped
/// precisions of orders `1..=n`. Zero when any precision is zero or the
/// candidate has fewer than `n` tokens.
pub fn bleu(candidate: &[usize], reference: &[usize], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Contract("BLEU order must be at least 1".into()));
    }
    if candidate.len() < n {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for k in 1..=n {
        let (clipped, total) = ngram_matches(candidate, reference, k);
        if clipped == 0 {
            return Ok(0.0);
        }
        log_sum += (clipped as f64 / total as f64).ln();
    }
    Ok(brevity_penalty(candidate.len(), reference.len()) * (log_sum / n as f64).exp())
}
