//! Fractional covering number.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lp::{Cmp, Lp};
use crate::models::ModelClass;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoveringResult {
    /// `+inf` when some model has no `Δ`-good decision.
    pub n_frac: f64,
    pub p_star: Option<Vec<f64>>,
    pub delta: f64,
}

/// `1 / max_p min_M P_{π∼p}(L(M,π) ≤ Δ)`.
pub fn fractional_covering(class: &ModelClass, delta: f64) -> Result<CoveringResult> {
    let np = class.n_decisions();
    let good: Vec<Vec<bool>> = (0..class.len())
        .map(|m| (0..np).map(|pi| class.loss(m, pi) <= delta + 1e-12).collect())
        .collect();
    if good.iter().any(|g| !g.iter().any(|b| *b)) {
        return Ok(CoveringResult { n_frac: f64::INFINITY, p_star: None, delta });
    }
    let mut lp = Lp::new(np + 1);
    lp.c[np] = -1.0;
    for g in &good {
        let mut row: Vec<f64> = g.iter().map(|&b| if b { -1.0 } else { 0.0 }).collect();
        row.push(1.0);
        lp.add(row, Cmp::Le, 0.0);
    }
    let mut sum = vec![1.0; np + 1];
    sum[np] = 0.0;
    lp.add(sum, Cmp::Eq, 1.0);
    let sol = lp.minimize()?;
    let mut p = sol.x[..np].to_vec();
    crate::lp::clean_blocks(&mut p, &[np]);
    let t = good
        .iter()
        .map(|g| g.iter().zip(&p).filter(|(b, _)| **b).map(|(_, w)| w).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let n_frac = match snap_rational(t, 10_000, 1e-9) {
        Some((num, den)) => den as f64 / num as f64,
        None => 1.0 / t,
    };
    Ok(CoveringResult { n_frac, p_star: Some(p), delta })
}

/// Closest fraction `num/den` with `den ≤ max_den` from the continued
/// fraction of `x`, if it lies within `tol` (relative) of `x > 0`. LP vertices
/// are rational, so this removes round-off from `1/t`.
fn snap_rational(x: f64, max_den: u64, tol: f64) -> Option<(u64, u64)> {
    if !(x > 0.0) || !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1, mut k0, mut k1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let (h2, k2) = (a.checked_mul(h1)? + h0, a.checked_mul(k1)? + k0);
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - x).abs() <= tol * x {
            return Some((h1, k1));
        }
        let frac = r - a as f64;
        if frac <= 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{mab_canonical, mab_class};

    #[test]
    fn covering_examples() {
        let one = mab_class(&[vec![0.2, 0.9]]).unwrap();
        assert_eq!(fractional_covering(&one, 0.0).unwrap().n_frac, 1.0);
        for k in 2..=6 {
            let r = fractional_covering(&mab_canonical(k).unwrap(), 0.5).unwrap();
            assert_eq!(r.n_frac, k as f64);
        }
        let shared = mab_class(&[vec![1.0, 0.0], vec![1.0, 0.5]]).unwrap();
        assert!((fractional_covering(&shared, 0.0).unwrap().n_frac - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snapping() {
        assert_eq!(snap_rational(0.2 + 1e-15, 100, 1e-9), Some((1, 5)));
        assert_eq!(snap_rational(2.0 / 7.0, 100, 1e-9), Some((2, 7)));
        assert_eq!(snap_rational(std::f64::consts::PI, 100, 1e-9), None);
    }
}
