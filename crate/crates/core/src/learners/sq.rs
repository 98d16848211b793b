//! Query-based estimation-to-decisions against a GQ oracle.

use std::collections::{BTreeMap, HashMap};

use super::{Action, LearnerConfig, Learner, Observation, Plan};
use crate::dec::{constrained_search, sq_instance, Inner};
use crate::error::{Error, Result};
use crate::models::QueryModelClass;
use crate::rng::{sample_index, stream, tag};

/// `γ̄ = C₀ max{ln|M|/T, ln(1/δ)/N}` with `N = ⌊T/(2K)⌋`.
pub fn sq_gamma_bar(n_models: usize, horizon: usize, delta: f64, c0: f64) -> f64 {
    let k = (2.0 / delta).ln().ceil() as usize;
    let n = horizon / (2 * k);
    c0 * ((n_models as f64).ln() / horizon as f64).max((1.0 / delta).ln() / n as f64)
}

struct Step {
    p: Vec<f64>,
    q: Vec<f64>,
    value: f64,
}

/// Exploration for `T₀ = ⌊T/2⌋` rounds over elimination sets, then up to `K`
/// refining batches of `N` rounds; stops at the first batch whose mean
/// disagreement is below `γ̄`.
pub struct SqE2d {
    qclass: QueryModelClass,
    cfg: LearnerConfig,
    seed: u64,
    tau: f64,
    k: usize,
    t0: usize,
    n: usize,
    gamma_bar: f64,
    alive: Vec<bool>,
    cache: HashMap<Vec<bool>, (Vec<f64>, Vec<f64>, f64)>,
    steps: Vec<Step>,
    t_k: Vec<usize>,
    batch_err: f64,
    k_star: Option<usize>,
    stopped: bool,
    solves: usize,
}

impl SqE2d {
    pub fn new(qclass: QueryModelClass, cfg: LearnerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let tau = cfg.tau.ok_or_else(|| Error::Config("sq_e2d needs tau".into()))?;
        if !(tau >= 0.0) {
            return Err(Error::Config(format!("tau = {tau} must be non-negative")));
        }
        let k = cfg.k_batches();
        if cfg.horizon < 4 * k {
            return Err(Error::Config(format!("T = {} < 4K = {}", cfg.horizon, 4 * k)));
        }
        let t0 = cfg.horizon / 2;
        let n = cfg.horizon / (2 * k);
        let gamma_bar = sq_gamma_bar(qclass.len(), cfg.horizon, cfg.delta, cfg.c0);
        let mut aux = stream(seed, tag::LEARNER_AUX, 0);
        let t_k = (0..k).map(|_| rand::Rng::random_range(&mut aux, 0..t0)).collect();
        Ok(Self {
            alive: vec![true; qclass.len()],
            qclass,
            cfg,
            seed,
            tau,
            k,
            t0,
            n,
            gamma_bar,
            cache: HashMap::new(),
            steps: Vec::new(),
            t_k,
            batch_err: 0.0,
            k_star: None,
            stopped: false,
            solves: 0,
        })
    }

    pub fn gamma_bar(&self) -> f64 {
        self.gamma_bar
    }

    pub fn survivors(&self) -> Vec<usize> {
        (0..self.alive.len()).filter(|&m| self.alive[m]).collect()
    }

    /// Minimax step against `μ = Unif(survivors)`, cached per survivor set.
    fn step_for_alive(&mut self) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        if let Some(s) = self.cache.get(&self.alive) {
            return Ok(s.clone());
        }
        let live = self.survivors();
        let mut w = vec![0.0; self.qclass.len()];
        for &m in &live {
            w[m] = 1.0 / live.len() as f64;
        }
        let reference = self.qclass.mixture_reference(&w);
        let inst = sq_instance(&self.qclass, &reference, 2.0 * self.tau);
        let cert = constrained_search(&inst, self.gamma_bar, Inner::Expected, &self.cfg.search)?;
        self.solves += 1;
        let out = (cert.p, cert.q, cert.value);
        self.cache.insert(self.alive.clone(), out.clone());
        Ok(out)
    }

    fn sample_query(&self, t: usize, q: &[f64]) -> Action {
        let mut rng = stream(self.seed, tag::LEARNER, t as u64);
        Action::Query { query: sample_index(&mut rng, q) }
    }

    fn batch_of(&self, t: usize) -> Option<usize> {
        if t >= self.t0 && t < self.t0 + self.k * self.n {
            Some((t - self.t0) / self.n)
        } else {
            None
        }
    }
}

impl Learner for SqE2d {
    fn plan(&mut self, t: usize) -> Result<Plan> {
        if t < self.t0 {
            let (p, q, value) = self.step_for_alive()?;
            let action = self.sample_query(t, &q);
            self.steps.push(Step { p: p.clone(), q, value });
            return Ok(Plan { action, played: p.clone(), p, cert: Some(value) });
        }
        if let (Some(kb), false) = (self.batch_of(t), self.stopped) {
            let step = &self.steps[self.t_k[kb]];
            let (p, q) = (step.p.clone(), step.q.clone());
            let action = self.sample_query(t, &q);
            return Ok(Plan { action, played: p.clone(), p, cert: None });
        }
        let p = self.output();
        Ok(Plan { action: Action::Idle, played: p.clone(), p, cert: None })
    }

    fn observe(&mut self, t: usize, action: &Action, obs: &Observation) -> Result<()> {
        let Action::Query { query } = action else {
            return Ok(());
        };
        let Observation::Response { value } = obs else {
            return Err(Error::Protocol("query round without a response".into()));
        };
        let live = self.survivors();
        let far: Vec<bool> = (0..self.qclass.len())
            .map(|m| self.qclass.distance(self.qclass.response(m, *query), value) > self.tau)
            .collect();
        if let Some(kb) = self.batch_of(t) {
            self.batch_err += live.iter().filter(|&&m| far[m]).count() as f64 / live.len() as f64;
            if (t - self.t0) % self.n == self.n - 1 {
                let e = self.batch_err / self.n as f64;
                self.batch_err = 0.0;
                if e < self.gamma_bar {
                    self.k_star = Some(kb);
                    self.stopped = true;
                } else if kb + 1 == self.k {
                    self.stopped = true;
                }
            }
        }
        // An empty elimination set would contradict the oracle's tolerance;
        // keep the previous survivors in that case.
        if live.iter().any(|&m| !far[m]) {
            for m in live {
                if far[m] {
                    self.alive[m] = false;
                }
            }
        }
        Ok(())
    }

    fn output(&self) -> Vec<f64> {
        let k = self.k_star.unwrap_or(0);
        match self.t_k.get(k).and_then(|&t| self.steps.get(t)) {
            Some(s) => s.p.clone(),
            None => {
                let np = self.qclass.n_decisions();
                vec![1.0 / np as f64; np]
            }
        }
    }

    fn stats(&self) -> BTreeMap<String, f64> {
        let mut s = BTreeMap::new();
        s.insert("K".into(), self.k as f64);
        s.insert("N".into(), self.n as f64);
        s.insert("T0".into(), self.t0 as f64);
        s.insert("gamma_bar".into(), self.gamma_bar);
        s.insert("k_star".into(), self.k_star.unwrap_or(0) as f64);
        s.insert("survivors".into(), self.survivors().len() as f64);
        s.insert("dec_solves".into(), self.solves as f64);
        if let Some(st) = self.t_k.get(self.k_star.unwrap_or(0)).and_then(|&t| self.steps.get(t)) {
            s.insert("cert_value".into(), st.value);
        }
        s
    }
}
