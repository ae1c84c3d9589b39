/// ROUGE-L `β` used for rewards and reports.
pub const DEFAULT_ROUGE_BETA: f64 = 1.2;

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[usize], b: &[usize]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F-measure `(1+β²)PR / (R + β²P)`, zero when there is no overlap.
pub fn rouge_l(candidate: &[usize], reference: &[usize], beta: f64) -> f64 {
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (r + b2 * p)
}
