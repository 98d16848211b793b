//! Instance builders addressed by string id.

use serde::{Deserialize, Serialize};

use crate::environments::{AdversaryStrategy, EnvSpec, GqStrategy, HuberStrategy};
use crate::error::{Error, Result};
use crate::learners::{InfoSetStructure, Problem};
use crate::models::{
    contextual_bandit_class, hypothesis_selection, linear_model_class, mab_canonical, mab_class, parity_class,
    regression_class, ContextualBandit, ModelClass, ParityDecisions, QueryModelClass, Regression,
};

fn default_cap() -> usize {
    4096
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "builder", deny_unknown_fields)]
pub enum InstanceSpec {
    /// One model per row of arm means in `[-1, 1]`.
    Mab { means: Vec<Vec<f64>> },
    MabCanonical { arms: usize },
    ContextualBandit {
        contexts: usize,
        actions: usize,
        /// `fs[i][x][a]`.
        fs: Vec<Vec<Vec<f64>>>,
        nus: Vec<Vec<f64>>,
        #[serde(default = "default_cap")]
        cap: usize,
    },
    Regression { fs: Vec<Vec<f64>>, nus: Vec<Vec<f64>> },
    HypothesisSelection { dists: Vec<Vec<f64>>, blocks: Vec<Vec<usize>> },
    /// Hypothesis selection answered through statistical queries.
    QueryHypothesisSelection { dists: Vec<Vec<f64>>, blocks: Vec<Vec<usize>> },
    Parity {
        d: usize,
        lambda: f64,
        decisions: ParityDecisions,
        #[serde(default = "default_cap")]
        cap: usize,
    },
    Linear { covariates: Vec<Vec<f64>>, nus: Vec<Vec<f64>>, theta_grid: Vec<Vec<f64>> },
    Inline { class: ModelClass },
    InlineQuery { class: QueryModelClass },
}

/// A built instance with the metadata some information sets need.
#[derive(Clone, Debug)]
pub struct BuiltInstance {
    pub problem: Problem,
    pub regression: Option<Regression>,
    pub contextual: Option<ContextualBandit>,
}

impl BuiltInstance {
    fn class(class: ModelClass) -> Self {
        Self { problem: Problem::Class { class }, regression: None, contextual: None }
    }

    pub fn n_models(&self) -> usize {
        match &self.problem {
            Problem::Class { class } => class.len(),
            Problem::Query { class } => class.len(),
        }
    }
}

impl InstanceSpec {
    pub fn build(&self) -> Result<BuiltInstance> {
        Ok(match self {
            InstanceSpec::Mab { means } => BuiltInstance::class(mab_class(means)?),
            InstanceSpec::MabCanonical { arms } => BuiltInstance::class(mab_canonical(*arms)?),
            InstanceSpec::ContextualBandit { contexts, actions, fs, nus, cap } => {
                let cb = contextual_bandit_class(*contexts, *actions, fs, nus, *cap)?;
                BuiltInstance {
                    problem: Problem::Class { class: cb.class.clone() },
                    regression: None,
                    contextual: Some(cb),
                }
            }
            InstanceSpec::Regression { fs, nus } => {
                let reg = regression_class(fs, nus)?;
                BuiltInstance {
                    problem: Problem::Class { class: reg.class.clone() },
                    regression: Some(reg),
                    contextual: None,
                }
            }
            InstanceSpec::HypothesisSelection { dists, blocks } => {
                BuiltInstance::class(hypothesis_selection(dists, blocks.clone())?)
            }
            InstanceSpec::QueryHypothesisSelection { dists, blocks } => BuiltInstance {
                problem: Problem::Query { class: QueryModelClass::hypothesis_selection(dists, blocks)? },
                regression: None,
                contextual: None,
            },
            InstanceSpec::Parity { d, lambda, decisions, cap } => {
                BuiltInstance::class(parity_class(*d, *lambda, *decisions, *cap)?.class)
            }
            InstanceSpec::Linear { covariates, nus, theta_grid } => {
                BuiltInstance::class(linear_model_class(covariates, nus, theta_grid)?)
            }
            InstanceSpec::Inline { class } => BuiltInstance::class(class.clone()),
            InstanceSpec::InlineQuery { class } => BuiltInstance {
                problem: Problem::Query { class: class.clone() },
                regression: None,
                contextual: None,
            },
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InfoSpec {
    ModelBased,
    PolicyBased { delta: f64 },
    ValueBased { delta: f64 },
    Contextual { delta: f64 },
    Hybrid { constraints: Vec<Vec<usize>> },
    Explicit {
        sets: Vec<Vec<usize>>,
        anchors: Vec<usize>,
        #[serde(default)]
        prior: Option<Vec<f64>>,
    },
}

impl InfoSpec {
    pub fn build(&self, inst: &BuiltInstance) -> Result<InfoSetStructure> {
        let class = inst.problem.model_class()?;
        let info = match self {
            InfoSpec::ModelBased => InfoSetStructure::model_based(class),
            InfoSpec::PolicyBased { delta } => InfoSetStructure::policy_based(class, *delta),
            InfoSpec::ValueBased { delta } => InfoSetStructure::value_based(
                inst.regression.as_ref().ok_or_else(|| Error::Config("value_based needs a regression instance".into()))?,
                *delta,
            ),
            InfoSpec::Contextual { delta } => InfoSetStructure::contextual(
                inst.contextual
                    .as_ref()
                    .ok_or_else(|| Error::Config("contextual needs a contextual_bandit instance".into()))?,
                *delta,
            ),
            InfoSpec::Hybrid { constraints } => InfoSetStructure::hybrid(class, constraints),
            InfoSpec::Explicit { sets, anchors, prior } => {
                InfoSetStructure::explicit(sets.clone(), anchors.clone(), prior.clone())
            }
        };
        info.validate(class)?;
        Ok(info)
    }
}

/// Environment as written in configs; `adversarial_context` is resolved
/// against the contextual bandit metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Stationary { truth: usize },
    Huber { truth: usize, beta: f64, strategy: HuberStrategy },
    GqOracle { truth: usize, tau: f64, strategy: GqStrategy },
    Adversarial { constraint: Vec<usize>, strategy: AdversaryStrategy },
    AdversarialContext { f_star: usize, strategy: AdversaryStrategy },
}

impl EnvironmentConfig {
    pub fn resolve(&self, inst: &BuiltInstance) -> Result<EnvSpec> {
        let spec = match self.clone() {
            EnvironmentConfig::Stationary { truth } => EnvSpec::Stationary { truth },
            EnvironmentConfig::Huber { truth, beta, strategy } => EnvSpec::Huber { truth, beta, strategy },
            EnvironmentConfig::GqOracle { truth, tau, strategy } => EnvSpec::GqOracle { truth, tau, strategy },
            EnvironmentConfig::Adversarial { constraint, strategy } => EnvSpec::Adversarial { constraint, strategy },
            EnvironmentConfig::AdversarialContext { f_star, strategy } => {
                let cb = inst
                    .contextual
                    .as_ref()
                    .ok_or_else(|| Error::Config("adversarial_context needs a contextual_bandit instance".into()))?;
                if f_star >= cb.fs.len() {
                    return Err(Error::Config(format!("f_star = {f_star} out of range")));
                }
                EnvSpec::adversarial_context(cb, f_star, strategy)
            }
        };
        let n = inst.n_models();
        let constraint = spec.constraint();
        if constraint.is_empty() || constraint.iter().any(|&m| m >= n) {
            return Err(Error::Config(format!("model index out of range (class has {n} models)")));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builders_by_id() {
        let s: InstanceSpec = serde_json::from_str(r#"{"builder":"mab_canonical","arms":3}"#).unwrap();
        assert_eq!(s.build().unwrap().n_models(), 3);
        let s: InstanceSpec =
            serde_json::from_str(r#"{"builder":"mab","means":[[0.5,-0.5],[-0.5,0.5]]}"#).unwrap();
        assert_eq!(s.build().unwrap().n_models(), 2);
        assert!(serde_json::from_str::<InstanceSpec>(r#"{"builder":"mab","means":[[0.5]],"x":1}"#).is_err());
        assert!(serde_json::from_str::<InstanceSpec>(r#"{"builder":"nope"}"#).is_err());
    }

    #[test]
    fn context_env_needs_metadata() {
        let inst = InstanceSpec::MabCanonical { arms: 2 }.build().unwrap();
        let e = EnvironmentConfig::AdversarialContext { f_star: 0, strategy: AdversaryStrategy::Cycle };
        assert!(matches!(e.resolve(&inst), Err(Error::Config(_))));
        let e = EnvironmentConfig::Stationary { truth: 5 };
        assert!(matches!(e.resolve(&inst), Err(Error::Config(_))));
    }
}
