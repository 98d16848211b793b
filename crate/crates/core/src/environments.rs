//! Interaction protocols, adversaries, run accounting and the privacy
//! auditor.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channels::dp_level;
use crate::error::{Error, Result};
use crate::learners::{self, exo_regret_bound, Action, Algorithm, LearnerSpec, Observation, Problem, RoundRecord, Transcript};
use crate::models::{ContextualBandit, RandomizedQueryModel};
use crate::prob::raw;
use crate::rng::{sample_index, stream, tag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "id")]
pub enum HuberStrategy {
    /// Deviating outcomes drawn from a fixed distribution over `O`.
    Fixed { dist: Vec<f64> },
    /// The outcome least likely under the true model and current channel.
    GreedyProxy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "id")]
pub enum GqStrategy {
    Truthful,
    /// Answer with a draw from the class's uniform mixture when it lies in
    /// the τ-ball of the truth, and with the truth otherwise.
    ReferencePull,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "id")]
pub enum AdversaryStrategy {
    /// `M^t = constraint[t mod |P|]`.
    Cycle,
    Random,
    /// The member with the smallest value under the previous round's
    /// executed decision distribution.
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum EnvSpec {
    Stationary { truth: usize },
    Huber { truth: usize, beta: f64, strategy: HuberStrategy },
    GqOracle { truth: usize, tau: f64, strategy: GqStrategy },
    /// Hybrid protocol: `M^t` chosen from the constraint set each round.
    Adversarial { constraint: Vec<usize>, strategy: AdversaryStrategy },
}

impl EnvSpec {
    /// Contexts chosen adversarially for a fixed reward function `f*`.
    pub fn adversarial_context(cb: &ContextualBandit, f_star: usize, strategy: AdversaryStrategy) -> Self {
        EnvSpec::Adversarial { constraint: cb.models_with_f(f_star), strategy }
    }

    /// Models the environment may use.
    pub fn constraint(&self) -> Vec<usize> {
        match self {
            EnvSpec::Stationary { truth } | EnvSpec::Huber { truth, .. } | EnvSpec::GqOracle { truth, .. } => {
                vec![*truth]
            }
            EnvSpec::Adversarial { constraint, .. } => constraint.clone(),
        }
    }
}

/// A running environment.
pub struct Environment {
    spec: EnvSpec,
    problem: Problem,
    seed: u64,
    reference: Option<RandomizedQueryModel>,
    last_played: Option<Vec<f64>>,
    deviations: usize,
}

impl Environment {
    pub fn new(spec: EnvSpec, problem: Problem, seed: u64) -> Result<Self> {
        let n_models = match &problem {
            Problem::Class { class } => class.len(),
            Problem::Query { class } => class.len(),
        };
        let constraint = spec.constraint();
        if constraint.is_empty() || constraint.iter().any(|&m| m >= n_models) {
            return Err(Error::Config("environment refers to a model outside the class".into()));
        }
        match (&spec, &problem) {
            (EnvSpec::GqOracle { tau, .. }, Problem::Query { .. }) => {
                if !(*tau >= 0.0) {
                    return Err(Error::Range(format!("tau = {tau} must be non-negative")));
                }
            }
            (EnvSpec::GqOracle { .. }, _) => return Err(Error::Config("gq_oracle needs a query class".into())),
            (_, Problem::Query { .. }) => return Err(Error::Config("query classes need a gq_oracle".into())),
            (EnvSpec::Huber { beta, strategy, .. }, Problem::Class { .. }) => {
                if !(0.0..=1.0).contains(beta) {
                    return Err(Error::Range(format!("beta = {beta} outside [0,1]")));
                }
                if let HuberStrategy::Fixed { dist } = strategy {
                    crate::prob::normalize_mass(dist.clone())?;
                }
            }
            _ => {}
        }
        let reference = match &problem {
            Problem::Query { class } => Some(class.uniform_reference()),
            _ => None,
        };
        Ok(Self { spec, problem, seed, reference, last_played: None, deviations: 0 })
    }

    pub fn deviations(&self) -> usize {
        self.deviations
    }

    fn value(&self, m: usize, pi: usize) -> f64 {
        match &self.problem {
            Problem::Class { class } => class.value(m, pi).unwrap_or(-class.loss(m, pi)),
            Problem::Query { class } => -class.loss[m][pi],
        }
    }

    /// Model in force at round `t`.
    pub fn model_at(&self, t: usize) -> usize {
        match &self.spec {
            EnvSpec::Adversarial { constraint, strategy } => match strategy {
                AdversaryStrategy::Cycle => constraint[t % constraint.len()],
                AdversaryStrategy::Random => {
                    let mut rng = stream(self.seed, tag::ENV_AUX, t as u64);
                    constraint[rand::Rng::random_range(&mut rng, 0..constraint.len())]
                }
                AdversaryStrategy::Greedy => match &self.last_played {
                    None => constraint[0],
                    Some(p) => {
                        let vals: Vec<f64> = constraint
                            .iter()
                            .map(|&m| (0..p.len()).map(|pi| p[pi] * self.value(m, pi)).sum())
                            .collect();
                        constraint[crate::models::argmin(&vals)]
                    }
                },
            },
            other => other.constraint()[0],
        }
    }

    /// One round: the observation for `action` under model `m`.
    pub fn step(&mut self, t: usize, m: usize, action: &Action, played: &[f64]) -> Result<Observation> {
        self.last_played = Some(played.to_vec());
        match action {
            Action::Idle => Ok(Observation::None),
            Action::Channel { decision, channel, .. } => {
                let Problem::Class { class } = &self.problem else {
                    return Err(Error::Protocol("channel action against a query class".into()));
                };
                if *decision >= class.n_decisions() || channel.input().len() != class.n_obs() {
                    return Err(Error::Protocol("channel action does not match the class".into()));
                }
                if matches!(self.spec, EnvSpec::GqOracle { .. }) {
                    return Err(Error::Protocol("channel action sent to a GQ oracle".into()));
                }
                let mut rng = stream(self.seed, tag::ENV, t as u64);
                let dist = class.model(m).dist(*decision);
                let z = sample_index(&mut rng, dist);
                let mut o = sample_index(&mut rng, &channel.kernel()[z]);
                if let EnvSpec::Huber { beta, strategy, .. } = &self.spec {
                    let mut aux = stream(self.seed, tag::ENV_AUX, t as u64);
                    let u: f64 = rand::Rng::random(&mut aux);
                    if u < *beta {
                        self.deviations += 1;
                        o = match strategy {
                            HuberStrategy::Fixed { dist } => {
                                if dist.len() != channel.output().len() {
                                    return Err(Error::Protocol("contamination law does not match |O|".into()));
                                }
                                sample_index(&mut aux, dist)
                            }
                            HuberStrategy::GreedyProxy => {
                                let out = crate::channels::apply_raw(channel.kernel(), dist);
                                crate::models::argmin(&out)
                            }
                        };
                    }
                }
                Ok(Observation::Outcome { index: o })
            }
            Action::Query { query } => {
                let (Problem::Query { class }, EnvSpec::GqOracle { tau, strategy, .. }) = (&self.problem, &self.spec)
                else {
                    return Err(Error::Protocol("query action needs a GQ oracle".into()));
                };
                if *query >= class.n_queries() {
                    return Err(Error::Protocol(format!("query {query} out of range")));
                }
                let truth = class.response(m, *query).to_vec();
                let v = match strategy {
                    GqStrategy::Truthful => truth.clone(),
                    GqStrategy::ReferencePull => {
                        let atoms = &self.reference.as_ref().expect("query reference").atoms[*query];
                        let w: Vec<f64> = atoms.iter().map(|a| a.0).collect();
                        let mut rng = stream(self.seed, tag::ENV, t as u64);
                        let v = atoms[sample_index(&mut rng, &w)].1.clone();
                        if class.distance(&v, &truth) <= *tau {
                            v
                        } else {
                            truth.clone()
                        }
                    }
                };
                if class.distance(&v, &truth) > *tau {
                    return Err(Error::Protocol(format!("round {t}: response outside the τ-ball")));
                }
                Ok(Observation::Response { value: v })
            }
        }
    }
}

/// One itemized audit failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub round: usize,
    pub kind: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub pass: bool,
    pub alpha: f64,
    pub rounds: usize,
    pub channels_checked: usize,
    pub failures: Vec<AuditFailure>,
}

impl AuditReport {
    pub fn first_failure_round(&self) -> Option<usize> {
        self.failures.iter().map(|f| f.round).min()
    }
}

/// Checks every recorded channel is α-DP and that replaying the learner
/// from its seed over the recorded observations reproduces every action.
pub fn privacy_audit(transcript: &Transcript, alpha: f64) -> AuditReport {
    let AuditReport { channels_checked: checked, mut failures, .. } = privacy_audit_channels(transcript, alpha);
    match learners::build(&transcript.spec, transcript.seed) {
        Err(e) => failures.push(AuditFailure { round: 0, kind: "replay".into(), detail: e.to_string() }),
        Ok(mut learner) => {
            for r in &transcript.rounds {
                let plan = match learner.plan(r.t) {
                    Ok(p) => p,
                    Err(e) => {
                        failures.push(AuditFailure { round: r.t, kind: "replay".into(), detail: e.to_string() });
                        break;
                    }
                };
                if plan.action != r.action {
                    failures.push(AuditFailure {
                        round: r.t,
                        kind: "replay".into(),
                        detail: "replayed action differs from the recorded one".into(),
                    });
                    break;
                }
                if let Err(e) = learner.observe(r.t, &r.action, &r.observation) {
                    failures.push(AuditFailure { round: r.t, kind: "replay".into(), detail: e.to_string() });
                    break;
                }
            }
        }
    }
    failures.sort_by_key(|f| f.round);
    AuditReport { pass: failures.is_empty(), alpha, rounds: transcript.rounds.len(), channels_checked: checked, failures }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub seed: u64,
    pub horizon: usize,
    pub alpha: f64,
    /// `E_{π∼p̂} L(truth, π)`.
    pub risk: f64,
    /// `max_π Σ_t V^{M^t}(π) - Σ_t E_{π∼played^t} V^{M^t}(π)`.
    pub regret: f64,
    pub bound: f64,
    pub cert_value: f64,
    pub audit: AuditReport,
    pub deviations: usize,
    pub stats: BTreeMap<String, f64>,
    /// Model index in force at each round.
    pub realized: Vec<usize>,
    #[serde(skip)]
    pub transcript: Option<Transcript>,
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Replay the learner during the audit.
    pub replay: bool,
    pub keep_transcript: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { replay: true, keep_transcript: false }
    }
}

/// Drives `T` rounds with default options.
pub fn run(spec: &LearnerSpec, env: &EnvSpec, seed: u64) -> Result<RunReport> {
    run_with(spec, env, seed, RunOptions::default())
}

pub fn run_with(spec: &LearnerSpec, env_spec: &EnvSpec, seed: u64, opts: RunOptions) -> Result<RunReport> {
    spec.config.validate()?;
    let horizon = spec.config.horizon;
    let mut learner = learners::build(spec, seed)?;
    let mut env = Environment::new(env_spec.clone(), spec.problem.clone(), seed)?;
    let mut rounds = Vec::with_capacity(horizon);
    let mut realized = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let plan = learner.plan(t)?;
        let m = env.model_at(t);
        let obs = env.step(t, m, &plan.action, &plan.played)?;
        learner.observe(t, &plan.action, &obs)?;
        realized.push(m);
        rounds.push(RoundRecord {
            t,
            action: plan.action,
            observation: obs,
            p: plan.p,
            played: plan.played,
            cert: plan.cert,
        });
    }
    let output = learner.output();
    let stats = learner.stats();
    let transcript = Transcript { spec: spec.clone(), seed, rounds, output, stats: stats.clone() };

    let np = spec.problem.n_decisions();
    let value = |m: usize, pi: usize| env.value(m, pi);
    let mut vbar = vec![0.0; np];
    for &m in &realized {
        for (pi, v) in vbar.iter_mut().enumerate() {
            *v += value(m, pi) / horizon as f64;
        }
    }
    let best = vbar.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let risk = match &spec.problem {
        Problem::Class { class } if !class.is_reward_based() => {
            let mut lbar = vec![0.0; np];
            for &m in &realized {
                for (pi, l) in lbar.iter_mut().enumerate() {
                    *l += class.loss(m, pi) / horizon as f64;
                }
            }
            raw::dot(&transcript.output, &lbar)
        }
        _ => transcript.output.iter().zip(&vbar).map(|(p, v)| p * (best - v)).sum(),
    };
    let earned: f64 = transcript
        .rounds
        .iter()
        .zip(&realized)
        .map(|(r, &m)| r.played.iter().enumerate().map(|(pi, w)| w * value(m, pi)).sum::<f64>())
        .sum();
    let regret = best * horizon as f64 - earned;

    let cert_value = stats.get("cert_value").copied().unwrap_or(f64::NAN);
    let bound = match spec.config.algorithm {
        Algorithm::LdpE2d | Algorithm::SqE2d => cert_value,
        Algorithm::BruteForceDc => stats.get("bound").copied().unwrap_or(f64::NAN),
        Algorithm::ExoPlus => {
            let class = spec.problem.model_class()?;
            let info = spec.info.as_ref().ok_or_else(|| Error::Structure("missing info sets".into()))?;
            exo_regret_bound(class, info, &spec.config, cert_value, &env_spec.constraint(), &realized)
        }
    };

    let audit = if opts.replay {
        privacy_audit(&transcript, spec.config.alpha)
    } else {
        privacy_audit_channels(&transcript, spec.config.alpha)
    };
    Ok(RunReport {
        algorithm: spec.config.algorithm.id().into(),
        seed,
        horizon,
        alpha: spec.config.alpha,
        risk,
        regret,
        bound,
        cert_value,
        audit,
        deviations: env.deviations(),
        stats,
        realized,
        transcript: opts.keep_transcript.then_some(transcript),
    })
}

/// The dp-level half of [`privacy_audit`], without replay.
pub fn privacy_audit_channels(transcript: &Transcript, alpha: f64) -> AuditReport {
    let mut failures = Vec::new();
    let mut checked = 0;
    for r in &transcript.rounds {
        if let Action::Channel { channel, .. } = &r.action {
            checked += 1;
            let level = dp_level(channel);
            if !(level <= alpha + 1e-12) {
                failures.push(AuditFailure {
                    round: r.t,
                    kind: "dp_level".into(),
                    detail: format!("dp level {level} exceeds alpha {alpha}"),
                });
            }
        }
    }
    AuditReport { pass: failures.is_empty(), alpha, rounds: transcript.rounds.len(), channels_checked: checked, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{Algorithm, LearnerConfig};
    use crate::models::{mab_class, QueryModelClass};

    fn mab_spec(alg: Algorithm, horizon: usize) -> LearnerSpec {
        let c = mab_class(&[vec![0.6, -0.2], vec![-0.2, 0.6]]).unwrap();
        let mut cfg = LearnerConfig::new(alg, horizon, 0.1, 1.0);
        cfg.info_delta = 0.5;
        LearnerSpec { config: cfg, problem: Problem::Class { class: c }, info: None }
    }

    #[test]
    fn huber_beta_zero_is_stationary() {
        let spec = mab_spec(Algorithm::LdpE2d, 64);
        let a = run(&spec, &EnvSpec::Stationary { truth: 0 }, 9).unwrap();
        let b = run(
            &spec,
            &EnvSpec::Huber { truth: 0, beta: 0.0, strategy: HuberStrategy::GreedyProxy },
            9,
        )
        .unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(b.deviations, 0);
    }

    #[test]
    fn truthful_gq_is_exact() {
        let q = QueryModelClass::hypothesis_selection(&[vec![0.5, 0.5], vec![0.9, 0.1]], &[vec![0], vec![1]])
            .unwrap();
        let mut env = Environment::new(
            EnvSpec::GqOracle { truth: 1, tau: 0.0, strategy: GqStrategy::Truthful },
            Problem::Query { class: q.clone() },
            0,
        )
        .unwrap();
        for j in 0..q.n_queries() {
            let o = env.step(j, 1, &Action::Query { query: j }, &[0.5, 0.5]).unwrap();
            assert_eq!(o, Observation::Response { value: q.response(1, j).to_vec() });
        }
    }

    #[test]
    fn single_model_risk_is_zero() {
        let c = mab_class(&[vec![0.3, -0.1]]).unwrap();
        let cfg = LearnerConfig::new(Algorithm::LdpE2d, 32, 0.1, 1.0);
        let spec = LearnerSpec { config: cfg, problem: Problem::Class { class: c }, info: None };
        let r = run(&spec, &EnvSpec::Stationary { truth: 0 }, 1).unwrap();
        assert!(r.risk.abs() < 1e-12);
        assert!(r.audit.pass);
    }

    #[test]
    fn zero_horizon_rejected() {
        let spec = mab_spec(Algorithm::LdpE2d, 0);
        assert!(matches!(run(&spec, &EnvSpec::Stationary { truth: 0 }, 0), Err(Error::Config(_))));
    }

    #[test]
    fn protocol_mismatch() {
        let spec = mab_spec(Algorithm::LdpE2d, 16);
        let mut env = Environment::new(EnvSpec::Stationary { truth: 0 }, spec.problem.clone(), 0).unwrap();
        assert!(matches!(env.step(0, 0, &Action::Query { query: 0 }, &[1.0, 0.0]), Err(Error::Protocol(_))));
        let ch = crate::channels::identity_channel(&crate::prob::FiniteSpace::indexed("z", 3).unwrap());
        let a = Action::Channel { decision: 0, cell: 0, channel: ch };
        assert!(matches!(env.step(0, 0, &a, &[1.0, 0.0]), Err(Error::Protocol(_))));
    }

    #[test]
    fn mutated_channel_fails_audit_at_its_round() {
        let spec = mab_spec(Algorithm::LdpE2d, 40);
        let r = run_with(&spec, &EnvSpec::Stationary { truth: 0 }, 3, RunOptions { replay: true, keep_transcript: true })
            .unwrap();
        let mut t = r.transcript.unwrap();
        assert!(privacy_audit(&t, 1.0).pass);
        let Action::Channel { channel, .. } = &mut t.rounds[7].action else { panic!("channel round") };
        *channel = crate::channels::binary_channel(
            &crate::prob::ScalarFn::new(crate::prob::FiniteSpace::signs(), vec![0.0, 1.0]).unwrap(),
            2.0,
        )
        .unwrap();
        let rep = privacy_audit(&t, 1.0);
        assert!(!rep.pass);
        assert_eq!(rep.failures[0].round, 7);
        assert_eq!(rep.failures[0].kind, "dp_level");
    }
}
