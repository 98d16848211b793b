//! Information set structures: a cover of the class by subsets `M_ψ` with
//! anchor decisions `π_ψ` and a prior over `Ψ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ContextualBandit, ModelClass, Regression};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InfoKind {
    ModelBased,
    PolicyBased { delta: f64 },
    ValueBased { delta: f64 },
    Contextual { delta: f64 },
    /// `Ψ = P × Π` over a list of constraint sets.
    Hybrid,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfoSetStructure {
    pub kind: InfoKind,
    /// `sets[ψ]` lists the model indices of `M_ψ`.
    pub sets: Vec<Vec<usize>>,
    pub anchors: Vec<usize>,
    pub prior: Vec<f64>,
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

impl InfoSetStructure {
    pub fn explicit(sets: Vec<Vec<usize>>, anchors: Vec<usize>, prior: Option<Vec<f64>>) -> Self {
        let prior = prior.unwrap_or_else(|| uniform(sets.len()));
        Self { kind: InfoKind::Explicit, sets, anchors, prior }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Checks shapes, coverage and the prior.
    pub fn validate(&self, class: &ModelClass) -> Result<()> {
        let n = self.sets.len();
        if n == 0 {
            return Err(Error::Structure("empty information set structure".into()));
        }
        if self.anchors.len() != n || self.prior.len() != n {
            return Err(Error::Structure("sets, anchors and prior lengths differ".into()));
        }
        let mut covered = vec![false; class.len()];
        for (psi, set) in self.sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::Structure(format!("information set {psi} is empty")));
            }
            for &m in set {
                if m >= class.len() {
                    return Err(Error::Structure(format!("model index {m} out of range")));
                }
                covered[m] = true;
            }
            if self.anchors[psi] >= class.n_decisions() {
                return Err(Error::Structure(format!("anchor of set {psi} is not a decision")));
            }
        }
        if let Some(m) = covered.iter().position(|c| !c) {
            return Err(Error::Structure(format!("model {} is in no information set", class.model(m).name)));
        }
        if self.prior.iter().any(|w| !(*w > 0.0)) || (self.prior.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Structure("prior must be a positive distribution".into()));
        }
        Ok(())
    }

    /// `Ψ = M`, `M_ψ = {ψ}`, anchored at each model's optimal decision.
    pub fn model_based(class: &ModelClass) -> Self {
        let n = class.len();
        Self {
            kind: InfoKind::ModelBased,
            sets: (0..n).map(|m| vec![m]).collect(),
            anchors: (0..n).map(|m| class.optimal_decision(m)).collect(),
            prior: uniform(n),
        }
    }

    /// `Ψ = Π`, `M_π = {M: L(M,π) ≤ Δ}`; decisions that are Δ-good for no
    /// model are dropped.
    pub fn policy_based(class: &ModelClass, delta: f64) -> Self {
        let mut sets = Vec::new();
        let mut anchors = Vec::new();
        for pi in 0..class.n_decisions() {
            let set: Vec<usize> = (0..class.len()).filter(|&m| class.loss(m, pi) <= delta + 1e-12).collect();
            if !set.is_empty() {
                sets.push(set);
                anchors.push(pi);
            }
        }
        let n = sets.len();
        Self { kind: InfoKind::PolicyBased { delta }, sets, anchors, prior: uniform(n) }
    }

    /// `Ψ = F`, `M_f = {M: E_{x∼ν_M} |f_M(x) - f(x)| ≤ Δ}`, `π_f = f`.
    pub fn value_based(reg: &Regression, delta: f64) -> Self {
        let nf = reg.fs.len();
        let mut sets = Vec::new();
        let mut anchors = Vec::new();
        for f in 0..nf {
            let set: Vec<usize> = (0..reg.model_params.len())
                .filter(|&m| {
                    let (nu, g) = reg.model_params[m];
                    let nu = &reg.nus[nu];
                    let total: f64 = nu.iter().sum();
                    let s: f64 =
                        nu.iter().enumerate().map(|(x, w)| w / total * (reg.fs[g][x] - reg.fs[f][x]).abs()).sum();
                    s <= delta + 1e-12
                })
                .collect();
            if !set.is_empty() {
                sets.push(set);
                anchors.push(f);
            }
        }
        let n = sets.len();
        Self { kind: InfoKind::ValueBased { delta }, sets, anchors, prior: uniform(n) }
    }

    /// Minimal sup-norm Δ-cover `F_Δ` of the reward functions;
    /// `M_ψ = {M_{ν,f}: ‖f - ψ‖_∞ ≤ Δ}` and `π_ψ` is greedy for `ψ`.
    pub fn contextual(cb: &ContextualBandit, delta: f64) -> Self {
        let nf = cb.fs.len();
        let close = |a: usize, b: usize| -> bool {
            cb.fs[a]
                .iter()
                .flatten()
                .zip(cb.fs[b].iter().flatten())
                .all(|(x, y)| (x - y).abs() <= delta + 1e-12)
        };
        let adj: Vec<Vec<bool>> = (0..nf).map(|a| (0..nf).map(|b| close(a, b)).collect()).collect();
        let cover = minimal_cover(&adj);
        let sets = cover
            .iter()
            .map(|&c| (0..cb.model_params.len()).filter(|&m| adj[c][cb.model_params[m].1]).collect())
            .collect();
        let anchors = cover.iter().map(|&c| cb.greedy_policy(c)).collect();
        Self { kind: InfoKind::Contextual { delta }, sets, anchors, prior: uniform(cover.len()) }
    }

    /// `Ψ = P × Π` for constraint sets `P`, `M_ψ = P^ψ`, `π_ψ = π^ψ`.
    pub fn hybrid(class: &ModelClass, constraints: &[Vec<usize>]) -> Self {
        let mut sets = Vec::new();
        let mut anchors = Vec::new();
        for c in constraints {
            for pi in 0..class.n_decisions() {
                sets.push(c.clone());
                anchors.push(pi);
            }
        }
        let n = sets.len();
        Self { kind: InfoKind::Hybrid, sets, anchors, prior: uniform(n) }
    }
}

/// Smallest `C` with every element adjacent to some member of `C`; exact
/// for up to 20 elements, greedy beyond.
fn minimal_cover(adj: &[Vec<bool>]) -> Vec<usize> {
    let n = adj.len();
    let covers = |c: &[usize]| (0..n).all(|b| c.iter().any(|&a| adj[a][b]));
    if n <= 20 {
        for size in 1..=n {
            let mut idx: Vec<usize> = (0..size).collect();
            loop {
                if covers(&idx) {
                    return idx;
                }
                let mut i = size;
                while i > 0 && idx[i - 1] == n - size + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                idx[i - 1] += 1;
                for k in i..size {
                    idx[k] = idx[k - 1] + 1;
                }
            }
        }
    }
    let mut done = vec![false; n];
    let mut out = Vec::new();
    while done.iter().any(|d| !d) {
        let best = (0..n)
            .max_by_key(|&a| (0..n).filter(|&b| !done[b] && adj[a][b]).count() * n + (n - a))
            .expect("non-empty");
        out.push(best);
        for b in 0..n {
            if adj[best][b] {
                done[b] = true;
            }
        }
    }
    out
}
