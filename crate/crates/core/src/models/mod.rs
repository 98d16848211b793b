//! Finite model classes with loss and value specifications.

mod builders;
mod query;

pub use builders::*;
pub use query::*;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{self, FiniteDist, FiniteSpace, LDictionary, ScalarFn};

/// Default cap on enumerated decision spaces.
pub const DEFAULT_DECISION_CAP: usize = 4096;

/// A model: one distribution over `Z` per decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub name: String,
    /// `dists[π][z]`.
    pub dists: Vec<Vec<f64>>,
}

impl Model {
    pub fn new(name: impl Into<String>, dists: Vec<Vec<f64>>) -> Result<Self> {
        let dists = dists.into_iter().map(prob::normalize_mass).collect::<Result<Vec<_>>>()?;
        Ok(Self { name: name.into(), dists })
    }

    /// Model whose observation law ignores the decision.
    pub fn statistical(name: impl Into<String>, dist: Vec<f64>, n_decisions: usize) -> Result<Self> {
        Self::new(name, vec![dist; n_decisions])
    }

    pub fn dist(&self, pi: usize) -> &[f64] {
        &self.dists[pi]
    }

    /// Convex combination of models.
    pub fn mixture(weights: &[f64], models: &[&Model]) -> Model {
        let np = models[0].dists.len();
        let nz = models[0].dists[0].len();
        let mut dists = vec![vec![0.0; nz]; np];
        for (&w, m) in weights.iter().zip(models) {
            if w == 0.0 {
                continue;
            }
            for (d, md) in dists.iter_mut().zip(&m.dists) {
                for (x, y) in d.iter_mut().zip(md) {
                    *x += w * y;
                }
            }
        }
        Model { name: "mixture".into(), dists }
    }
}

/// Known reward `R(z, π) ∈ [0,1]`, stored as `values[z][π]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardFn {
    pub values: Vec<Vec<f64>>,
}

impl RewardFn {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(v) = values.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Range(format!("reward {v} outside [0,1]")));
        }
        Ok(Self { values })
    }

    pub fn get(&self, z: usize, pi: usize) -> f64 {
        self.values[z][pi]
    }

    /// `R(·, π)` as a vector over `Z`.
    pub fn column(&self, pi: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[pi]).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LossSpec {
    /// `L(M,π) = max_π' V^M(π') - V^M(π)`.
    RewardBased { reward: RewardFn },
    /// Explicit `table[m][π]`, optionally with a metric on decisions.
    MetricBased { table: Vec<Vec<f64>>, metric: Option<Vec<Vec<f64>>> },
    /// Decision `b` is correct for models in block `b`.
    Indicator { blocks: Vec<Vec<usize>> },
}

/// Serialized form of a [`ModelClass`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelClassSpec {
    pub decisions: Vec<String>,
    pub observations: Vec<String>,
    pub models: Vec<Model>,
    pub loss: LossSpec,
    /// Extra dictionary entries appended to the defaults.
    #[serde(default)]
    pub dictionary_extra: Vec<Vec<f64>>,
}

/// Finite model class with cached losses and values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ModelClassSpec", into = "ModelClassSpec")]
pub struct ModelClass {
    decisions: FiniteSpace,
    obs: FiniteSpace,
    models: Vec<Model>,
    loss: LossSpec,
    dictionary: LDictionary,
    extra: Vec<Vec<f64>>,
    loss_table: Vec<Vec<f64>>,
    value_table: Option<Vec<Vec<f64>>>,
    statistical: bool,
}

impl ModelClass {
    pub fn new(
        decisions: FiniteSpace,
        obs: FiniteSpace,
        models: Vec<Model>,
        loss: LossSpec,
        dictionary_extra: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::EmptyClass);
        }
        let np = decisions.len();
        let nz = obs.len();
        for m in &models {
            if m.dists.len() != np || m.dists.iter().any(|d| d.len() != nz) {
                return Err(Error::SpaceMismatch(format!("model {} has wrong shape", m.name)));
            }
        }
        let (loss_table, value_table) = match &loss {
            LossSpec::RewardBased { reward } => {
                if reward.values.len() != nz || reward.values.iter().any(|r| r.len() != np) {
                    return Err(Error::SpaceMismatch("reward table shape".into()));
                }
                let values: Vec<Vec<f64>> =
                    models.iter().map(|m| values_of(reward, &m.dists)).collect();
                let losses = values.iter().map(|v| losses_from_values(v)).collect();
                (losses, Some(values))
            }
            LossSpec::MetricBased { table, metric } => {
                if table.len() != models.len() || table.iter().any(|r| r.len() != np) {
                    return Err(Error::SpaceMismatch("loss table shape".into()));
                }
                if let Some(v) = table.iter().flatten().find(|v| **v < 0.0 || !v.is_finite()) {
                    return Err(Error::Range(format!("loss {v} is negative or not finite")));
                }
                if let Some(rho) = metric {
                    check_metric_loss(table, rho)?;
                }
                (table.clone(), None)
            }
            LossSpec::Indicator { blocks } => {
                if blocks.len() != np {
                    return Err(Error::InvalidPartition(format!(
                        "{} blocks for {} decisions",
                        blocks.len(),
                        np
                    )));
                }
                let block_of = block_index(blocks, models.len())?;
                let table = block_of
                    .iter()
                    .map(|&b| (0..np).map(|pi| if pi == b { 0.0 } else { 1.0 }).collect())
                    .collect();
                (table, None)
            }
        };
        let statistical = models.iter().all(|m| m.dists.iter().all(|d| d == &m.dists[0]));
        let dictionary = default_dictionary(&obs, &loss, np, &dictionary_extra)?;
        Ok(Self {
            decisions,
            obs,
            models,
            loss,
            dictionary,
            extra: dictionary_extra,
            loss_table,
            value_table,
            statistical,
        })
    }

    pub fn decisions(&self) -> &FiniteSpace {
        &self.decisions
    }

    pub fn obs_space(&self) -> &FiniteSpace {
        &self.obs
    }

    pub fn models(&self) -> &[Model] {
        &self.models
    }

    pub fn model(&self, m: usize) -> &Model {
        &self.models[m]
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn n_decisions(&self) -> usize {
        self.decisions.len()
    }

    pub fn n_obs(&self) -> usize {
        self.obs.len()
    }

    pub fn loss_spec(&self) -> &LossSpec {
        &self.loss
    }

    pub fn dictionary(&self) -> &LDictionary {
        &self.dictionary
    }

    /// Replaces the dictionary.
    pub fn with_dictionary(mut self, dictionary: LDictionary) -> Result<Self> {
        dictionary.space().check_same(&self.obs)?;
        self.dictionary = dictionary;
        Ok(self)
    }

    /// True when every model's law ignores the decision.
    pub fn is_statistical(&self) -> bool {
        self.statistical
    }

    pub fn is_reward_based(&self) -> bool {
        matches!(self.loss, LossSpec::RewardBased { .. })
    }

    pub fn reward(&self) -> Option<&RewardFn> {
        match &self.loss {
            LossSpec::RewardBased { reward } => Some(reward),
            _ => None,
        }
    }

    /// `L(M_m, π)`.
    pub fn loss(&self, m: usize, pi: usize) -> f64 {
        self.loss_table[m][pi]
    }

    pub fn loss_table(&self) -> &[Vec<f64>] {
        &self.loss_table
    }

    /// `V^{M_m}(π)` for reward-based classes.
    pub fn value(&self, m: usize, pi: usize) -> Option<f64> {
        self.value_table.as_ref().map(|v| v[m][pi])
    }

    /// Values of an arbitrary model (for example a mixture).
    pub fn values_of_model(&self, model: &Model) -> Option<Vec<f64>> {
        self.reward().map(|r| values_of(r, &model.dists))
    }

    /// Lowest-index decision of minimal loss.
    pub fn optimal_decision(&self, m: usize) -> usize {
        argmin(&self.loss_table[m])
    }

    pub fn dist(&self, m: usize, pi: usize) -> FiniteDist {
        FiniteDist::new(self.obs.clone(), self.models[m].dists[pi].clone()).expect("validated")
    }

    /// Uniform mixture of all members.
    pub fn uniform_reference(&self) -> Model {
        let w = vec![1.0 / self.len() as f64; self.len()];
        self.mixture(&w)
    }

    pub fn mixture(&self, weights: &[f64]) -> Model {
        let refs: Vec<&Model> = self.models.iter().collect();
        Model::mixture(weights, &refs)
    }

    /// Index of the model with this name.
    pub fn find(&self, name: &str) -> Result<usize> {
        self.models
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::NotFound(format!("model {name}")))
    }

    /// Index of a model equal (distribution-wise) to `model`.
    pub fn position_of(&self, model: &Model) -> Option<usize> {
        self.models.iter().position(|m| m.dists == model.dists)
    }

    /// Subclass with the given member indices.
    pub fn subclass(&self, idx: &[usize]) -> Result<Self> {
        let models: Vec<Model> = idx.iter().map(|&i| self.models[i].clone()).collect();
        let loss = match &self.loss {
            LossSpec::RewardBased { reward } => LossSpec::RewardBased { reward: reward.clone() },
            LossSpec::MetricBased { table, metric } => LossSpec::MetricBased {
                table: idx.iter().map(|&i| table[i].clone()).collect(),
                metric: metric.clone(),
            },
            LossSpec::Indicator { .. } => LossSpec::MetricBased {
                table: idx.iter().map(|&i| self.loss_table[i].clone()).collect(),
                metric: None,
            },
        };
        let c = Self::new(self.decisions.clone(), self.obs.clone(), models, loss, self.extra.clone())?;
        c.with_dictionary(self.dictionary.clone())
    }
}

impl TryFrom<ModelClassSpec> for ModelClass {
    type Error = Error;
    fn try_from(s: ModelClassSpec) -> Result<Self> {
        Self::new(
            FiniteSpace::new(s.decisions)?,
            FiniteSpace::new(s.observations)?,
            s.models,
            s.loss,
            s.dictionary_extra,
        )
    }
}

impl From<ModelClass> for ModelClassSpec {
    fn from(c: ModelClass) -> Self {
        ModelClassSpec {
            decisions: c.decisions.labels().to_vec(),
            observations: c.obs.labels().to_vec(),
            models: c.models,
            loss: c.loss,
            dictionary_extra: c.extra,
        }
    }
}

/// `V(π) = E_{z∼M(π)} R(z,π)` for each decision.
pub fn values_of(reward: &RewardFn, dists: &[Vec<f64>]) -> Vec<f64> {
    dists
        .iter()
        .enumerate()
        .map(|(pi, d)| d.iter().enumerate().map(|(z, p)| p * reward.values[z][pi]).sum())
        .collect()
}

pub fn losses_from_values(values: &[f64]) -> Vec<f64> {
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values.iter().map(|v| (best - v).max(0.0)).collect()
}

/// Lowest index attaining the minimum.
pub fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Lowest index attaining the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn block_index(blocks: &[Vec<usize>], n: usize) -> Result<Vec<usize>> {
    let mut of = vec![usize::MAX; n];
    for (b, members) in blocks.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::InvalidPartition(format!("block {b} is empty")));
        }
        for &m in members {
            if m >= n || of[m] != usize::MAX {
                return Err(Error::InvalidPartition(format!("model {m} misplaced in block {b}")));
            }
            of[m] = b;
        }
    }
    if let Some(m) = of.iter().position(|b| *b == usize::MAX) {
        return Err(Error::InvalidPartition(format!("model {m} is in no block")));
    }
    Ok(of)
}

fn check_metric_loss(table: &[Vec<f64>], rho: &[Vec<f64>]) -> Result<()> {
    let np = rho.len();
    for row in table {
        for a in 0..np {
            for b in 0..np {
                if row[a] > row[b] + rho[a][b] + 1e-12 {
                    return Err(Error::Range(format!(
                        "loss table violates the metric between decisions {a} and {b}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Singleton indicators over `Z`, `R(·,π)` for each decision, then
/// `extra`, with exact duplicates removed.
pub fn default_dictionary(
    obs: &FiniteSpace,
    loss: &LossSpec,
    n_decisions: usize,
    extra: &[Vec<f64>],
) -> Result<LDictionary> {
    let mut entries: Vec<ScalarFn> = (0..obs.len()).map(|z| ScalarFn::indicator(obs.clone(), z)).collect();
    if let LossSpec::RewardBased { reward } = loss {
        for pi in 0..n_decisions {
            entries.push(ScalarFn::new(obs.clone(), reward.column(pi))?);
        }
    }
    for e in extra {
        entries.push(ScalarFn::new(obs.clone(), e.clone())?);
    }
    LDictionary::dedup(entries)
}
