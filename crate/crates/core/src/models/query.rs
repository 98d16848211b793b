//! Deterministic query models for the statistical-query setting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::FiniteSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        let it = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::L1 => it.sum(),
            Norm::L2 => it.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Linf => it.fold(0.0, f64::max),
        }
    }
}

/// Class of deterministic query models `M: queries -> R^k` with a loss
/// over decisions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QueryModelClass {
    pub decisions: FiniteSpace,
    pub queries: FiniteSpace,
    pub names: Vec<String>,
    /// `responses[m][j]`.
    pub responses: Vec<Vec<Vec<f64>>>,
    pub norm: Norm,
    /// `loss[m][π]`.
    pub loss: Vec<Vec<f64>>,
}

/// Randomized reference: for each query, a finite mixture of response
/// vectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomizedQueryModel {
    /// `atoms[j] = [(weight, vector), ...]`.
    pub atoms: Vec<Vec<(f64, Vec<f64>)>>,
}

impl QueryModelClass {
    pub fn new(
        decisions: FiniteSpace,
        queries: FiniteSpace,
        names: Vec<String>,
        responses: Vec<Vec<Vec<f64>>>,
        norm: Norm,
        loss: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if responses.is_empty() {
            return Err(Error::EmptyClass);
        }
        if names.len() != responses.len() || loss.len() != responses.len() {
            return Err(Error::SpaceMismatch("names/loss/responses lengths differ".into()));
        }
        for r in &responses {
            if r.len() != queries.len() {
                return Err(Error::SpaceMismatch("response table width != |queries|".into()));
            }
        }
        if loss.iter().any(|l| l.len() != decisions.len()) {
            return Err(Error::SpaceMismatch("loss table width != |decisions|".into()));
        }
        Ok(Self { decisions, queries, names, responses, norm, loss })
    }

    /// Statistical queries: `M_i(φ_j) = E_{D_i} φ_j`, scalar responses.
    pub fn statistical(
        dists: &[Vec<f64>],
        query_fns: &[Vec<f64>],
        decisions: FiniteSpace,
        loss: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let responses = dists
            .iter()
            .map(|d| query_fns.iter().map(|phi| vec![crate::prob::raw::dot(d, phi)]).collect())
            .collect();
        Self::new(
            decisions,
            FiniteSpace::indexed("phi", query_fns.len())?,
            (0..dists.len()).map(|i| format!("D{i}")).collect(),
            responses,
            Norm::Linf,
            loss,
        )
    }

    /// Hypothesis selection over blocks of distributions with singleton
    /// indicator queries.
    pub fn hypothesis_selection(dists: &[Vec<f64>], blocks: &[Vec<usize>]) -> Result<Self> {
        let nz = dists.first().ok_or(Error::EmptyClass)?.len();
        let mut block_of = vec![usize::MAX; dists.len()];
        for (b, members) in blocks.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidPartition(format!("block {b} is empty")));
            }
            for &m in members {
                if m >= dists.len() || block_of[m] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("model {m} misplaced")));
                }
                block_of[m] = b;
            }
        }
        if block_of.contains(&usize::MAX) {
            return Err(Error::InvalidPartition("some model is in no block".into()));
        }
        let loss = block_of
            .iter()
            .map(|&b| (0..blocks.len()).map(|k| if k == b { 0.0 } else { 1.0 }).collect())
            .collect();
        let fns: Vec<Vec<f64>> =
            (0..nz).map(|z| (0..nz).map(|k| if k == z { 1.0 } else { 0.0 }).collect()).collect();
        Self::statistical(dists, &fns, FiniteSpace::indexed("block", blocks.len())?, loss)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn n_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn n_decisions(&self) -> usize {
        self.decisions.len()
    }

    pub fn response(&self, m: usize, j: usize) -> &[f64] {
        &self.responses[m][j]
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.norm.dist(a, b)
    }

    /// Largest response distance over models for any query.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for j in 0..self.n_queries() {
            for a in 0..self.len() {
                for b in 0..a {
                    d = d.max(self.distance(&self.responses[a][j], &self.responses[b][j]));
                }
            }
        }
        d
    }

    /// Mixture of members with the given weights as a randomized model.
    pub fn mixture_reference(&self, weights: &[f64]) -> RandomizedQueryModel {
        let atoms = (0..self.n_queries())
            .map(|j| {
                let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
                for (m, &w) in weights.iter().enumerate() {
                    if w <= 0.0 {
                        continue;
                    }
                    let v = &self.responses[m][j];
                    match out.iter_mut().find(|(_, u)| u == v) {
                        Some(a) => a.0 += w,
                        None => out.push((w, v.clone())),
                    }
                }
                out
            })
            .collect();
        RandomizedQueryModel { atoms }
    }

    pub fn uniform_reference(&self) -> RandomizedQueryModel {
        self.mixture_reference(&vec![1.0 / self.len() as f64; self.len()])
    }

    /// `P_{v∼ref(j)}(‖M(j) - v‖ > tol)` for every model and query.
    pub fn exceed_table(&self, reference: &RandomizedQueryModel, tol: f64) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|m| {
                (0..self.n_queries())
                    .map(|j| {
                        reference.atoms[j]
                            .iter()
                            .filter(|(_, v)| self.distance(&self.responses[m][j], v) > tol)
                            .map(|(w, _)| w)
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        let a = [1.0, -2.0];
        let b = [0.0, 0.0];
        assert_eq!(Norm::L1.dist(&a, &b), 3.0);
        assert_eq!(Norm::Linf.dist(&a, &b), 2.0);
        assert!((Norm::L2.dist(&a, &b) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hypothesis_queries() {
        let q = QueryModelClass::hypothesis_selection(&[vec![0.5, 0.5], vec![0.9, 0.1]], &[vec![0], vec![1]])
            .unwrap();
        assert_eq!(q.response(1, 0), &[0.9]);
        assert!((q.diameter() - 0.4).abs() < 1e-15);
        let r = q.uniform_reference();
        assert_eq!(r.atoms[0].len(), 2);
        let ex = q.exceed_table(&r, 0.1);
        assert_eq!(ex[0][0], 0.5);
    }
}
