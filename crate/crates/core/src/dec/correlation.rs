//! Pairwise correlations and the minimum-correlation search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelClass;

/// `ρ_D(D1, D2) = Σ_z D1(z) D2(z) / D(z) - 1`.
pub fn correlation(d: &[f64], d1: &[f64], d2: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for z in 0..d.len() {
        if d[z] > 0.0 {
            s += d1[z] * d2[z] / d[z];
        } else if d1[z] > 0.0 || d2[z] > 0.0 {
            return Err(Error::AbsoluteContinuity(format!("reference has no mass at index {z}")));
        }
    }
    Ok(s - 1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Index into the candidate list and the reference itself.
    pub reference_index: usize,
    pub reference: Vec<f64>,
    /// `ρ` between all class members under the chosen reference.
    pub pairwise: Vec<Vec<f64>>,
    /// Best subset found.
    pub subset: Vec<usize>,
    /// Smallest certified `ε`; `+inf` when no subset qualifies.
    pub eps_correlated_at: f64,
    pub decision_coverage_ok: bool,
}

/// Full correlation matrix of a statistical class under `reference`.
pub fn correlation_matrix(class: &ModelClass, reference: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = class.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let r = correlation(reference, class.model(i).dist(0), class.model(j).dist(0))?;
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}

/// Searches subsets of size `2..=subset_cap` for `ε`-correlated families in
/// which every decision is `Δ`-good for at most half of the members.
pub fn min_correlation(
    class: &ModelClass,
    delta: f64,
    ref_candidates: &[Vec<f64>],
    subset_cap: usize,
) -> Result<CorrelationReport> {
    let n = class.len();
    if ref_candidates.is_empty() {
        return Err(Error::Config("no reference candidates".into()));
    }
    let cap = subset_cap.min(n);
    let mut count = 0.0;
    let mut c = 1.0;
    for k in 1..=cap {
        c *= (n + 1 - k) as f64 / k as f64;
        if k >= 2 {
            count += c;
        }
    }
    if count * ref_candidates.len() as f64 > 1e6 {
        return Err(Error::InstanceTooLarge(format!("{count} subsets to enumerate")));
    }
    let np = class.n_decisions();
    let good: Vec<Vec<bool>> =
        (0..n).map(|m| (0..np).map(|pi| class.loss(m, pi) <= delta).collect()).collect();
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    let mut matrices = Vec::with_capacity(ref_candidates.len());
    for (ri, reference) in ref_candidates.iter().enumerate() {
        let rho = correlation_matrix(class, reference)?;
        for mask in 1u64..(1u64 << n.min(63)) {
            let m = mask.count_ones() as usize;
            if m < 2 || m > cap {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let covered = (0..np).all(|pi| members.iter().filter(|&&i| good[i][pi]).count() * 2 <= m);
            if !covered {
                continue;
            }
            let mut e2: f64 = 0.0;
            for &i in &members {
                e2 = e2.max(rho[i][i].abs() / m as f64);
                for &j in &members {
                    if i != j {
                        e2 = e2.max(rho[i][j].abs());
                    }
                }
            }
            let e = e2.sqrt();
            if best.as_ref().is_none_or(|b| e < b.0 - 1e-15) {
                best = Some((e, ri, members));
            }
        }
        matrices.push(rho);
    }
    Ok(match best {
        Some((e, ri, subset)) => CorrelationReport {
            reference_index: ri,
            reference: ref_candidates[ri].clone(),
            pairwise: matrices.swap_remove(ri),
            subset,
            eps_correlated_at: e,
            decision_coverage_ok: true,
        },
        None => CorrelationReport {
            reference_index: 0,
            reference: ref_candidates[0].clone(),
            pairwise: matrices.swap_remove(0),
            subset: vec![],
            eps_correlated_at: f64::INFINITY,
            decision_coverage_ok: false,
        },
    })
}
