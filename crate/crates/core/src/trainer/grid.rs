use rand::Rng as _;

use crate::error::{Error, Result};
use crate::preference::PreferenceVector;
use crate::rng::Rng;

/// Number of grid steps `K = 1/interval`; the interval must divide 1.
pub fn grid_steps(interval: f64) -> Result<usize> {
    if !(interval > 0.0 && interval <= 1.0) {
        return Err(Error::Config(format!("preference interval must lie in (0, 1], got {interval}")));
    }
    let k = (1.0 / interval).round();
    if (k * interval - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("preference interval {interval} does not divide 1")));
    }
    Ok(k as usize)
}

/// Every `p` with `p_i = k_i·interval`, `Σ k_i = 1/interval`, in descending
/// lexicographic order of `(k_1, …, k_m)`: the first row is `e_1`, the
/// last is `e_m`.
pub fn enumerate_preference_grid(m: usize, interval: f64) -> Result<Vec<PreferenceVector>> {
    if m == 0 {
        return Err(Error::Config("preference dimension must be positive".into()));
    }
    let k = grid_steps(interval)?;
    let mut out = Vec::new();
    let mut parts = Vec::with_capacity(m);
    compositions(k, m, &mut parts, &mut |c| {
        let w = c.iter().map(|&ki| ki as f64 / k as f64).collect();
        out.push(PreferenceVector::new(w).expect("grid points lie on the simplex"));
    });
    Ok(out)
}

fn compositions(remaining: usize, slots: usize, parts: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
    if slots == 1 {
        parts.push(remaining);
        emit(parts);
        parts.pop();
        return;
    }
    for k in (0..=remaining).rev() {
        parts.push(k);
        compositions(remaining - k, slots - 1, parts, emit);
        parts.pop();
    }
}

/// Uniform draw from the preference grid.
pub fn sample_preference(m: usize, interval: f64, rng: &mut Rng) -> Result<PreferenceVector> {
    let grid = enumerate_preference_grid(m, interval)?;
    Ok(grid[rng.random_range(0..grid.len())].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dimensional_half_grid() {
        let g = enumerate_preference_grid(2, 0.5).unwrap();
        let w: Vec<&[f64]> = g.iter().map(|p| p.weights()).collect();
        assert_eq!(w, vec![&[1.0, 0.0][..], &[0.5, 0.5], &[0.0, 1.0]]);
    }

    #[test]
    fn rejects_non_dividing_interval() {
        assert!(matches!(enumerate_preference_grid(2, 0.3), Err(Error::Config(_))));
        assert!(enumerate_preference_grid(2, 0.0).is_err());
        assert!(enumerate_preference_grid(2, 1.5).is_err());
        assert_eq!(enumerate_preference_grid(3, 1.0).unwrap().len(), 3);
    }
}
