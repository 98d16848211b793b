//! Gaussian half-space dictionary.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::prob::{FiniteSpace, LDictionary, ScalarFn};
use crate::rng;

fn check_features(f: &[Vec<f64>]) -> Result<usize> {
    let dim = f.first().map_or(0, Vec::len);
    for v in f {
        if v.len() != dim {
            return Err(Error::SpaceMismatch("feature vectors of different lengths".into()));
        }
        if v.iter().map(|x| x * x).sum::<f64>().sqrt() > 1.0 + 1e-12 {
            return Err(Error::Range("feature vector outside the unit ball".into()));
        }
    }
    Ok(dim)
}

/// Values of `ℓ_w(z) = ‖f(z)‖ · 1{⟨f(z), w⟩ ≥ 0}` for one `w`.
pub fn halfspace_fn(f: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    f.iter()
        .map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let s: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
            if s >= 0.0 {
                n.min(1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Draws `w_1..w_n ∼ N(0, I_D)` from the seeded dictionary stream.
pub fn gaussian_directions(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut g = rng::stream(seed, rng::tag::DICT, 0);
    (0..n).map(|_| (0..dim).map(|_| StandardNormal.sample(&mut g)).collect()).collect()
}

/// `n` sampled half-space functions over `space`, `f[z]` in the unit ball.
pub fn gaussian_halfspace_dictionary(space: &FiniteSpace, f: &[Vec<f64>], n: usize, seed: u64) -> Result<LDictionary> {
    if f.len() != space.len() {
        return Err(Error::SpaceMismatch("one feature vector per element required".into()));
    }
    let dim = check_features(f)?;
    let entries = gaussian_directions(dim, n, seed)
        .iter()
        .map(|w| ScalarFn::new(space.clone(), halfspace_fn(f, w)))
        .collect::<Result<Vec<_>>>()?;
    LDictionary::new(entries)
}

/// Monte-Carlo mean and standard error of `D_ℓ²(P,Q)` over `n` sampled `ℓ`.
pub fn halfspace_mc(p: &[f64], q: &[f64], f: &[Vec<f64>], n: usize, seed: u64) -> Result<(f64, f64)> {
    let dim = check_features(f)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for w in gaussian_directions(dim, n, seed) {
        let l = halfspace_fn(f, &w);
        let d = crate::prob::raw::l_divergence(p, q, &l);
        sum += d * d;
        sum_sq += d.powi(4);
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0).max(1.0);
    Ok((mean, (var / nf).sqrt()))
}
