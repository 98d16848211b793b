//! Brute-force selection via the fractional covering distribution.

use std::collections::BTreeMap;

use super::{point, Action, LearnerConfig, Learner, Observation, Plan};
use crate::channels::{binary_channel, c_alpha, Channel};
use crate::dec::fractional_covering;
use crate::error::{Error, Result};
use crate::models::ModelClass;
use crate::prob::ScalarFn;
use crate::rng::{sample_index, stream, tag};

/// Draws `N = ⌈N_frac ln(1/δ)⌉` candidates from `p*_Δ`, spends `J = ⌊T/N⌋`
/// rounds on each through the binary channel of `R(·, π)`, and outputs the
/// candidate with the largest mean observation.
pub struct BruteForceDc {
    np: usize,
    alpha: f64,
    n_frac: f64,
    n: usize,
    j: usize,
    delta_good: f64,
    delta: f64,
    candidates: Vec<usize>,
    channels: Vec<Channel>,
    sums: Vec<f64>,
}

impl BruteForceDc {
    pub fn new(class: ModelClass, cfg: LearnerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let reward = class
            .reward()
            .ok_or_else(|| Error::Config("brute_force_dc needs a reward-based loss".into()))?
            .clone();
        let cov = fractional_covering(&class, cfg.info_delta)?;
        let p_star = cov
            .p_star
            .ok_or_else(|| Error::Infeasible(format!("N_frac is infinite at Δ = {}", cfg.info_delta)))?;
        let n = (cov.n_frac * (1.0 / cfg.delta).ln()).ceil().max(1.0) as usize;
        if cfg.horizon < n {
            return Err(Error::Config(format!("T = {} < N = {n}", cfg.horizon)));
        }
        let mut rng = stream(seed, tag::LEARNER_AUX, 0);
        let candidates: Vec<usize> = (0..n).map(|_| sample_index(&mut rng, &p_star)).collect();
        let channels = candidates
            .iter()
            .map(|&pi| binary_channel(&ScalarFn::new(class.obs_space().clone(), reward.column(pi))?, cfg.alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            np: class.n_decisions(),
            alpha: cfg.alpha,
            n_frac: cov.n_frac,
            n,
            j: cfg.horizon / n,
            delta_good: cfg.info_delta,
            delta: cfg.delta,
            candidates,
            channels,
            sums: vec![0.0; n],
        })
    }

    /// `N = ⌈N_frac ln(1/δ)⌉`.
    pub fn n_candidates(&self) -> usize {
        self.n
    }

    /// `Δ + (2/c_α) √(2 ln(2N/δ)/J)`.
    pub fn risk_bound(&self) -> f64 {
        self.delta_good
            + 2.0 / c_alpha(self.alpha) * (2.0 * (2.0 * self.n as f64 / self.delta).ln() / self.j as f64).sqrt()
    }

    fn k_hat(&self) -> usize {
        crate::models::argmax(&self.sums)
    }
}

impl Learner for BruteForceDc {
    fn plan(&mut self, t: usize) -> Result<Plan> {
        if t < self.n * self.j {
            let k = t / self.j;
            let pi = self.candidates[k];
            let p = point(self.np, pi);
            return Ok(Plan {
                action: Action::Channel { decision: pi, cell: k, channel: self.channels[k].clone() },
                played: p.clone(),
                p,
                cert: None,
            });
        }
        let p = self.output();
        Ok(Plan { action: Action::Idle, played: p.clone(), p, cert: None })
    }

    fn observe(&mut self, t: usize, action: &Action, obs: &Observation) -> Result<()> {
        if let Action::Channel { .. } = action {
            self.sums[t / self.j] += obs.sign()?;
        }
        Ok(())
    }

    fn output(&self) -> Vec<f64> {
        point(self.np, self.candidates[self.k_hat()])
    }

    fn stats(&self) -> BTreeMap<String, f64> {
        let mut s = BTreeMap::new();
        s.insert("n_frac".into(), self.n_frac);
        s.insert("N".into(), self.n as f64);
        s.insert("J".into(), self.j as f64);
        s.insert("bound".into(), self.risk_bound());
        s.insert("cert_value".into(), self.n_frac);
        s
    }
}
