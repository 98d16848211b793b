//! Decision-estimation coefficients on finite instances.
//!
//! Every solver returns a [`DecCertificate`] whose `value` is the defining
//! objective re-evaluated at the certificate's `(p, q)`. Restricting `q` to a
//! finite dictionary only removes options from the minimizing player, so
//! private-DEC values are upper bounds on the unrestricted quantities.

mod constrained;
mod correlation;
mod covering;
mod fixed_point;
mod halfspace;
mod local;
mod offset;

pub use constrained::*;
pub use correlation::*;
pub use covering::*;
pub use fixed_point::*;
pub use halfspace::*;
pub use local::*;
pub use offset::*;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, ModelClass};
use crate::prob::raw;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ExactLp,
    ExactEnum,
    HeuristicUpper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Pac,
    Reg,
}

/// Divergence between a model and the reference at an exploration cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Divergence {
    /// `D_ℓ²(M(π), M̄(π))` over cells `(π, ℓ)`.
    Ldp,
    /// `D_H²(M(π), M̄(π))` over cells `π`.
    Hellinger,
    /// β-perturbed Hellinger over cells `π`.
    Huber { beta: f64 },
}

/// A solved DEC instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecCertificate {
    pub kind: String,
    pub value: f64,
    /// Distribution over decisions.
    pub p: Vec<f64>,
    /// Distribution over exploration cells; cell `j` is decision
    /// `j / n_dict` with dictionary entry `j % n_dict`.
    pub q: Vec<f64>,
    pub n_dict: usize,
    /// Lowest-index model attaining the supremum at `(p, q)`.
    pub witness_model: Option<usize>,
    /// Worst-case mixture over models from the dual program, when available.
    pub witness_mixture: Vec<f64>,
    pub mode: Mode,
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
}

/// Loss and divergence tables of a finite DEC problem.
#[derive(Clone, Debug)]
pub struct DecInstance {
    /// `loss[m][π]`.
    pub loss: Vec<Vec<f64>>,
    /// `div[m][j]`.
    pub div: Vec<Vec<f64>>,
    pub n_decisions: usize,
    pub n_dict: usize,
}

impl DecInstance {
    pub fn from_class(class: &ModelClass, reference: &Model, divergence: Divergence) -> Result<Self> {
        check_reference(class, reference)?;
        let np = class.n_decisions();
        let (n_dict, div) = match divergence {
            Divergence::Ldp => {
                let dict = class.dictionary();
                let div = class
                    .models()
                    .iter()
                    .map(|m| {
                        let mut row = Vec::with_capacity(np * dict.len());
                        for pi in 0..np {
                            for l in dict.entries() {
                                let d = raw::l_divergence(m.dist(pi), reference.dist(pi), l.values());
                                row.push(d * d);
                            }
                        }
                        row
                    })
                    .collect();
                (dict.len(), div)
            }
            Divergence::Hellinger => (
                1,
                class
                    .models()
                    .iter()
                    .map(|m| (0..np).map(|pi| raw::hellinger_sq(m.dist(pi), reference.dist(pi))).collect())
                    .collect(),
            ),
            Divergence::Huber { beta } => {
                if !(0.0..=1.0).contains(&beta) {
                    return Err(Error::Range(format!("beta = {beta} outside [0,1]")));
                }
                (
                    1,
                    class
                        .models()
                        .iter()
                        .map(|m| {
                            (0..np)
                                .map(|pi| raw::huber_hellinger(m.dist(pi), reference.dist(pi), beta))
                                .collect()
                        })
                        .collect(),
                )
            }
        };
        Ok(Self { loss: class.loss_table().to_vec(), div, n_decisions: np, n_dict })
    }

    pub fn n_models(&self) -> usize {
        self.loss.len()
    }

    pub fn n_cells(&self) -> usize {
        self.div.first().map_or(0, Vec::len)
    }

    pub fn cell_decision(&self, j: usize) -> usize {
        j / self.n_dict
    }

    /// Decision marginal of a cell distribution.
    pub fn marginal(&self, q: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_decisions];
        for (j, w) in q.iter().enumerate() {
            p[self.cell_decision(j)] += w;
        }
        p
    }

    /// `max_M (E_p L_M - γ E_q D_M)` and the lowest maximizer.
    pub fn offset_objective(&self, p: &[f64], q: &[f64], gamma: f64) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for m in 0..self.n_models() {
            let v = raw::dot(p, &self.loss[m]) - gamma * raw::dot(q, &self.div[m]);
            if v > best.0 {
                best = (v, m);
            }
        }
        best
    }

    /// Models with `E_q D_M ≤ budget`.
    pub fn feasible(&self, q: &[f64], budget: f64) -> Vec<bool> {
        self.div.iter().map(|d| raw::dot(q, d) <= budget + FEAS_TOL).collect()
    }

    /// `max_{M feasible} E_p L_M`, or 0 with `None` when nothing is feasible.
    pub fn constrained_objective(&self, p: &[f64], q: &[f64], budget: f64) -> (f64, Option<usize>) {
        let feas = self.feasible(q, budget);
        let mut best: (f64, Option<usize>) = (0.0, None);
        for m in 0..self.n_models() {
            if feas[m] {
                let v = raw::dot(p, &self.loss[m]);
                if best.1.is_none() || v > best.0 {
                    best = (v, Some(m));
                }
            }
        }
        best
    }
}

/// Slack on the divergence budget absorbing floating-point noise.
pub const FEAS_TOL: f64 = 1e-12;

pub(crate) fn check_reference(class: &ModelClass, reference: &Model) -> Result<()> {
    if reference.dists.len() != class.n_decisions()
        || reference.dists.iter().any(|d| d.len() != class.n_obs())
    {
        return Err(Error::SpaceMismatch("reference model shape differs from the class".into()));
    }
    Ok(())
}

/// Zeroes entries below `1e-12` and renormalizes.
pub(crate) fn tidy(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 1e-12 {
            *v = 0.0;
        }
    }
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    } else {
        let n = x.len() as f64;
        x.iter_mut().for_each(|v| *v = 1.0 / n);
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// All points of the simplex `Δ(n)` with coordinates in `{0, 1/res, ..., 1}`.
pub fn simplex_grid(n: usize, res: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, res: usize, out: &mut Vec<Vec<f64>>) {
        let n = cur.len();
        if i == n - 1 {
            cur[i] = left;
            out.push(cur.iter().map(|&c| c as f64 / res as f64).collect());
            return;
        }
        for k in 0..=left {
            cur[i] = k;
            rec(i + 1, left - k, cur, res, out);
        }
    }
    if n > 0 {
        rec(0, res, &mut cur, res, &mut out);
    }
    out
}

/// Number of grid points of `simplex_grid(n, res)`.
pub fn simplex_grid_size(n: usize, res: usize) -> f64 {
    // C(res + n - 1, n - 1)
    let mut c = 1.0;
    for i in 1..n {
        c *= (res + i) as f64 / i as f64;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_is_on_simplex() {
        let p = project_simplex(&[0.5, 2.0, -1.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
        let q = project_simplex(&[0.2, 0.3, 0.5]);
        assert!((q[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_counts() {
        assert_eq!(simplex_grid(3, 4).len(), 15);
        assert_eq!(simplex_grid_size(3, 4), 15.0);
        assert!(simplex_grid(2, 3).iter().all(|g| (g.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }
}
