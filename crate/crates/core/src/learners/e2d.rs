//! Estimation-to-decisions under local privacy, PAC version.

use std::collections::BTreeMap;

use super::{cell_marginal, Action, LearnerConfig, Learner, Observation, Plan};
use crate::channels::{binary_channel, Channel};
use crate::dec::{lagrangian_sweep, DecInstance, Divergence};
use crate::error::{Error, Result};
use crate::estimators::Oracle;
use crate::models::{Model, ModelClass};
use crate::prob::raw;
use crate::rng::{sample_index, stream, tag};

/// Exploration phase of `N` rounds followed by `K` refining batches of `N`
/// rounds, `K = ⌈ln(2/δ)⌉`, `N = ⌊T/(K+1)⌋`. Leftover rounds are idle and
/// recommend the output distribution.
pub struct LdpE2d {
    class: ModelClass,
    cfg: LearnerConfig,
    seed: u64,
    k: usize,
    n: usize,
    est_bound: f64,
    eps_sq: f64,
    gammas: Vec<f64>,
    channels: Vec<Channel>,
    oracle: Oracle,
    preds: Vec<Model>,
    ps: Vec<Vec<f64>>,
    qs: Vec<Vec<f64>>,
    certs: Vec<f64>,
    t_k: Vec<usize>,
    batch_sum: Option<Model>,
    batch_err: Vec<f64>,
    k_hat: Option<usize>,
}

impl LdpE2d {
    pub fn new(class: ModelClass, cfg: LearnerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.k_batches();
        if cfg.horizon < 2 * (k + 1) {
            return Err(Error::Config(format!("T = {} < 2(K+1) = {}", cfg.horizon, 2 * (k + 1))));
        }
        if !class.is_reward_based() && !matches!(class.loss_spec(), crate::models::LossSpec::MetricBased { .. }) {
            return Err(Error::Config("ldp_e2d needs a reward- or metric-based loss".into()));
        }
        let n = cfg.horizon / (k + 1);
        let est_bound = Oracle::bound(&cfg.oracle, &class, n, cfg.delta / (4.0 * k as f64), cfg.alpha);
        let eps_sq = 64.0 * est_bound / n as f64;
        let gammas = cfg.gammas.clone().unwrap_or_else(|| (0..=12).map(|j| 2f64.powi(j)).collect());
        let channels = class
            .dictionary()
            .entries()
            .iter()
            .map(|l| binary_channel(l, cfg.alpha))
            .collect::<Result<Vec<_>>>()?;
        let oracle = Oracle::new(&cfg.oracle, &class, n, cfg.alpha)?;
        let mut aux = stream(seed, tag::LEARNER_AUX, 0);
        let t_k = (0..k).map(|_| rand::Rng::random_range(&mut aux, 0..n)).collect();
        Ok(Self {
            class,
            cfg,
            seed,
            k,
            n,
            est_bound,
            eps_sq,
            gammas,
            channels,
            oracle,
            preds: Vec::new(),
            ps: Vec::new(),
            qs: Vec::new(),
            certs: Vec::new(),
            t_k,
            batch_sum: None,
            batch_err: Vec::new(),
            k_hat: None,
        })
    }

    pub fn eps_bar(&self) -> f64 {
        self.eps_sq.sqrt()
    }

    fn n_dict(&self) -> usize {
        self.channels.len()
    }

    fn sample_cell(&self, t: usize, q: &[f64]) -> Action {
        let mut rng = stream(self.seed, tag::LEARNER, t as u64);
        let j = sample_index(&mut rng, q);
        let nd = self.n_dict();
        Action::Channel { decision: j / nd, cell: j, channel: self.channels[j % nd].clone() }
    }

    /// `E_{(π,ℓ)∼q} D_ℓ²(a(π), b(π))`.
    fn div(&self, q: &[f64], a: &Model, b: &Model) -> f64 {
        let nd = self.n_dict();
        let dict = self.class.dictionary();
        q.iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(j, w)| {
                let d = raw::l_divergence(a.dist(j / nd), b.dist(j / nd), dict.get(j % nd).values());
                w * d * d
            })
            .sum()
    }

    fn finish_batch(&mut self, kb: usize) {
        let mut avg = self.batch_sum.take().expect("batch in progress");
        for d in avg.dists.iter_mut().flatten() {
            *d /= self.n as f64;
        }
        let tk = self.t_k[kb];
        let e = self.div(&self.qs[tk], &self.preds[tk], &avg);
        self.batch_err.push(e);
        if self.batch_err.len() == self.k {
            self.k_hat = Some(crate::models::argmin(&self.batch_err));
        }
    }

    fn t_hat(&self) -> Option<usize> {
        self.k_hat.map(|k| self.t_k[k])
    }
}

impl Learner for LdpE2d {
    fn plan(&mut self, t: usize) -> Result<Plan> {
        let np = self.class.n_decisions();
        let nd = self.n_dict();
        if t < self.n {
            let pred = self.oracle.predict();
            let inst = DecInstance::from_class(&self.class, &pred, Divergence::Ldp)?;
            let choice = lagrangian_sweep(&inst, self.eps_sq, &self.gammas)?;
            let (p, q) = (choice.cert.p, choice.cert.q);
            let action = self.sample_cell(t, &q);
            let played = cell_marginal(&q, nd, np);
            self.preds.push(pred);
            self.ps.push(p.clone());
            self.qs.push(q);
            self.certs.push(choice.constrained_value);
            return Ok(Plan { action, p, played, cert: Some(choice.constrained_value) });
        }
        if t < (self.k + 1) * self.n {
            let kb = (t - self.n) / self.n;
            if (t - self.n).is_multiple_of(self.n) {
                self.oracle = Oracle::new(&self.cfg.oracle, &self.class, self.n, self.cfg.alpha)?;
            }
            let pred = self.oracle.predict();
            match &mut self.batch_sum {
                None => self.batch_sum = Some(pred),
                Some(s) => {
                    for (a, b) in s.dists.iter_mut().flatten().zip(pred.dists.iter().flatten()) {
                        *a += b;
                    }
                }
            }
            let tk = self.t_k[kb];
            let q = self.qs[tk].clone();
            let action = self.sample_cell(t, &q);
            return Ok(Plan {
                action,
                p: self.ps[tk].clone(),
                played: cell_marginal(&q, nd, np),
                cert: None,
            });
        }
        let p = self.output();
        Ok(Plan { action: Action::Idle, played: p.clone(), p, cert: None })
    }

    fn observe(&mut self, t: usize, action: &Action, obs: &Observation) -> Result<()> {
        let Action::Channel { decision, cell, .. } = action else {
            return Ok(());
        };
        let o = obs.sign()?;
        let l = self.class.dictionary().get(cell % self.n_dict()).values().to_vec();
        self.oracle.step(*decision, &l, o)?;
        if t >= self.n && t < (self.k + 1) * self.n && (t - self.n) % self.n == self.n - 1 {
            self.finish_batch((t - self.n) / self.n);
        }
        Ok(())
    }

    fn output(&self) -> Vec<f64> {
        match self.t_hat() {
            Some(t) => self.ps[t].clone(),
            None => self.ps.last().cloned().unwrap_or_else(|| {
                let np = self.class.n_decisions();
                vec![1.0 / np as f64; np]
            }),
        }
    }

    fn stats(&self) -> BTreeMap<String, f64> {
        let mut s = BTreeMap::new();
        s.insert("K".into(), self.k as f64);
        s.insert("N".into(), self.n as f64);
        s.insert("eps_bar".into(), self.eps_bar());
        s.insert("est_bound".into(), self.est_bound);
        if let Some(t) = self.t_hat() {
            s.insert("t_hat".into(), t as f64);
            s.insert("k_hat".into(), self.k_hat.unwrap_or(0) as f64);
            s.insert("cert_value".into(), self.certs[t]);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Algorithm;
    use crate::models::mab_class;

    #[test]
    fn phase_lengths() {
        let c = mab_class(&[vec![0.5, -0.5], vec![-0.5, 0.5]]).unwrap();
        let cfg = LearnerConfig::new(Algorithm::LdpE2d, 101, 0.1, 1.0);
        let l = LdpE2d::new(c.clone(), cfg, 0).unwrap();
        assert_eq!((l.k, l.n), (3, 25));
        assert!((l.k + 1) * l.n <= 101);
        let cfg = LearnerConfig::new(Algorithm::LdpE2d, 7, 0.1, 1.0);
        assert!(matches!(LdpE2d::new(c, cfg, 0), Err(Error::Config(_))));
    }
}
