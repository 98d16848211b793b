//! Interactive learners.
//!
//! A learner is driven round by round: [`Learner::plan`] returns the action
//! for round `t` together with the learner's internal distributions, and
//! [`Learner::observe`] feeds back the observation. Every random draw of a
//! learner comes from `rng::stream(seed, LEARNER*, t)`, so a learner rebuilt
//! from its [`LearnerSpec`] and seed reproduces its actions when fed the
//! recorded observations.

mod brute;
mod e2d;
mod exo;
mod info;
mod sq;

pub use brute::BruteForceDc;
pub use e2d::LdpE2d;
pub use exo::{exo_regret_bound, ExoPlus};
pub use info::*;
pub use sq::{sq_gamma_bar, SqE2d};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channels::Channel;
use crate::dec::SearchConfig;
use crate::error::{Error, Result};
use crate::estimators::OracleSpec;
use crate::models::{ModelClass, QueryModelClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    LdpE2d,
    ExoPlus,
    BruteForceDc,
    SqE2d,
}

impl Algorithm {
    pub fn id(self) -> &'static str {
        match self {
            Algorithm::LdpE2d => "ldp_e2d",
            Algorithm::ExoPlus => "exo_plus",
            Algorithm::BruteForceDc => "brute_force_dc",
            Algorithm::SqE2d => "sq_e2d",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExoOption {
    Pac,
    #[default]
    Reg,
}

fn default_c0() -> f64 {
    16.0
}

fn default_exo_rounds() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    /// Horizon `T`; experiment configs fill it from their `T` list.
    #[serde(default)]
    pub horizon: usize,
    pub delta: f64,
    pub alpha: f64,
    /// ExO+ offset parameter.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Information-set slack (ExO+) or goodness level (brute force).
    #[serde(default)]
    pub info_delta: f64,
    /// GQ tolerance.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub option: ExoOption,
    /// ExO+ clip level; defaults to `ln T`.
    #[serde(default)]
    pub clip: Option<f64>,
    #[serde(default = "default_exo_rounds")]
    pub exo_rounds: usize,
    /// Offset parameters of the E2D Lagrangian sweep; defaults to `2^0..2^12`.
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    #[serde(default)]
    pub search: SearchConfig,
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm, horizon: usize, delta: f64, alpha: f64) -> Self {
        Self {
            algorithm,
            horizon,
            delta,
            alpha,
            gamma: None,
            info_delta: 0.0,
            tau: None,
            c0: default_c0(),
            oracle: OracleSpec::default(),
            option: ExoOption::default(),
            clip: None,
            exo_rounds: default_exo_rounds(),
            gammas: None,
            search: SearchConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta = {} outside (0,1)", self.delta)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha = {} must be positive", self.alpha)));
        }
        if !(self.info_delta >= 0.0) {
            return Err(Error::Config("info_delta must be non-negative".into()));
        }
        Ok(())
    }

    /// `K = ⌈ln(2/δ)⌉`.
    pub fn k_batches(&self) -> usize {
        (2.0 / self.delta).ln().ceil() as usize
    }
}

/// The problem a learner is built for.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Problem {
    Class { class: ModelClass },
    Query { class: QueryModelClass },
}

impl Problem {
    pub fn model_class(&self) -> Result<&ModelClass> {
        match self {
            Problem::Class { class } => Ok(class),
            Problem::Query { .. } => Err(Error::Config("algorithm needs a model class".into())),
        }
    }

    pub fn query_class(&self) -> Result<&QueryModelClass> {
        match self {
            Problem::Query { class } => Ok(class),
            Problem::Class { .. } => Err(Error::Config("algorithm needs a query class".into())),
        }
    }

    pub fn n_decisions(&self) -> usize {
        match self {
            Problem::Class { class } => class.n_decisions(),
            Problem::Query { class } => class.n_decisions(),
        }
    }
}

/// Everything needed to rebuild a learner.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub config: LearnerConfig,
    pub problem: Problem,
    #[serde(default)]
    pub info: Option<InfoSetStructure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Action {
    /// Play `decision` and release the output of `channel` applied to `z`.
    Channel { decision: usize, cell: usize, channel: Channel },
    /// Ask the GQ oracle about `query`.
    Query { query: usize },
    /// No interaction this round.
    Idle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Observation {
    /// Index into the channel's output space.
    Outcome { index: usize },
    Response { value: Vec<f64> },
    None,
}

impl Observation {
    /// `±1` value of a binary-channel outcome.
    pub fn sign(&self) -> Result<f64> {
        match self {
            Observation::Outcome { index: 0 } => Ok(-1.0),
            Observation::Outcome { index: 1 } => Ok(1.0),
            _ => Err(Error::Protocol(format!("expected a binary outcome, got {self:?}"))),
        }
    }
}

/// What a learner commits to in one round.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub action: Action,
    /// Exploitation distribution over decisions.
    pub p: Vec<f64>,
    /// Distribution of the executed decision.
    pub played: Vec<f64>,
    /// Per-round certificate, when the algorithm produces one.
    pub cert: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub action: Action,
    pub observation: Observation,
    pub p: Vec<f64>,
    pub played: Vec<f64>,
    pub cert: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub spec: LearnerSpec,
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    /// Output distribution `p̂`.
    pub output: Vec<f64>,
    pub stats: BTreeMap<String, f64>,
}

pub trait Learner {
    fn plan(&mut self, t: usize) -> Result<Plan>;
    fn observe(&mut self, t: usize, action: &Action, obs: &Observation) -> Result<()>;
    /// Final output distribution over decisions.
    fn output(&self) -> Vec<f64>;
    fn stats(&self) -> BTreeMap<String, f64>;
}

/// Builds the learner described by `spec`.
pub fn build(spec: &LearnerSpec, seed: u64) -> Result<Box<dyn Learner>> {
    spec.config.validate()?;
    Ok(match spec.config.algorithm {
        Algorithm::LdpE2d => Box::new(LdpE2d::new(spec.problem.model_class()?.clone(), spec.config.clone(), seed)?),
        Algorithm::ExoPlus => {
            let class = spec.problem.model_class()?;
            let info = spec
                .info
                .clone()
                .ok_or_else(|| Error::Structure("exo_plus needs an information set structure".into()))?;
            Box::new(ExoPlus::new(class.clone(), info, spec.config.clone(), seed)?)
        }
        Algorithm::BruteForceDc => {
            Box::new(BruteForceDc::new(spec.problem.model_class()?.clone(), spec.config.clone(), seed)?)
        }
        Algorithm::SqE2d => Box::new(SqE2d::new(spec.problem.query_class()?.clone(), spec.config.clone(), seed)?),
    })
}

/// Decision marginal of a cell distribution with `n_dict` cells per decision.
pub(crate) fn cell_marginal(q: &[f64], n_dict: usize, n_decisions: usize) -> Vec<f64> {
    let mut p = vec![0.0; n_decisions];
    for (j, w) in q.iter().enumerate() {
        p[j / n_dict] += w;
    }
    p
}

pub(crate) fn point(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_uses_natural_log() {
        let cfg = LearnerConfig::new(Algorithm::LdpE2d, 100, 0.1, 1.0);
        assert_eq!(cfg.k_batches(), 3);
    }

    #[test]
    fn config_validation() {
        let mut cfg = LearnerConfig::new(Algorithm::LdpE2d, 100, 0.1, 1.0);
        assert!(cfg.validate().is_ok());
        cfg.delta = 1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.delta = 0.1;
        cfg.horizon = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let s = r#"{"algorithm":"ldp_e2d","horizon":10,"delta":0.1,"alpha":1.0,"gama":1.0}"#;
        assert!(serde_json::from_str::<LearnerConfig>(s).is_err());
    }
}
