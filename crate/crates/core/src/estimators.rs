//! Online estimation oracles for binary-channel observations.
//!
//! An observation is a triple `(π, ℓ, o)` with `o ∈ {-1,+1}` drawn from the
//! binary channel of `ℓ` applied to `M*(π)`, so `E[o] = c_α ⟨ℓ, M*(π)⟩`.

use serde::{Deserialize, Serialize};

use crate::channels::c_alpha;
use crate::error::{Error, Result};
use crate::models::{Model, ModelClass};
use crate::prob::{raw, LDictionary};

/// Default constant in the configured estimation bounds.
pub const DEFAULT_EST_CONSTANT: f64 = 20.0;

fn check_sign(o: f64) -> Result<()> {
    if o == 1.0 || o == -1.0 {
        Ok(())
    } else {
        Err(Error::Range(format!("observation {o} is not ±1")))
    }
}

fn softmax(logw: &[f64]) -> Vec<f64> {
    let mx = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logw.iter().map(|l| if l.is_finite() { (l - mx).exp() } else { 0.0 }).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Exponential weights on the squared loss `(c_α M(π)[ℓ] - o)²/2`.
#[derive(Clone, Debug)]
pub struct VovkState {
    models: Vec<Model>,
    log_w: Vec<f64>,
    eta: f64,
    alpha: f64,
    t: usize,
}

impl VovkState {
    pub fn new(class: &ModelClass, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Range(format!("alpha = {alpha} must be positive")));
        }
        Ok(Self {
            models: class.models().to_vec(),
            log_w: vec![0.0; class.len()],
            eta: 1.0 / 8.0,
            alpha,
            t: 0,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn steps(&self) -> usize {
        self.t
    }

    pub fn weights(&self) -> Vec<f64> {
        softmax(&self.log_w)
    }

    /// Weighted mixture of the class.
    pub fn predict(&self) -> Model {
        let refs: Vec<&Model> = self.models.iter().collect();
        let mut m = Model::mixture(&self.weights(), &refs);
        m.name = "vovk".into();
        m
    }

    pub fn step(&mut self, pi: usize, l: &[f64], o: f64) -> Result<Model> {
        check_sign(o)?;
        let c = c_alpha(self.alpha);
        for (lw, m) in self.log_w.iter_mut().zip(&self.models) {
            let r = c * raw::dot(m.dist(pi), l) - o;
            *lw -= self.eta * r * r / 2.0;
        }
        let mx = self.log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.log_w.iter_mut().for_each(|x| *x -= mx);
        self.t += 1;
        Ok(self.predict())
    }
}

/// Free-function form of [`VovkState::step`].
pub fn vovk_step(state: &mut VovkState, pi: usize, l: &[f64], o: f64) -> Result<Model> {
    state.step(pi, l, o)
}

/// Online mirror descent with KL regularizer around a reference `M̄ ∈ Δ(Z)`,
/// for statistical classes.
#[derive(Clone, Debug)]
pub struct OmdState {
    log_ref: Vec<f64>,
    /// `Σ_s (c_α⟨ℓ^s, M̂^s⟩ - o^s) ℓ^s`.
    grad: Vec<f64>,
    pred: Vec<f64>,
    eta: f64,
    alpha: f64,
    n_decisions: usize,
    t: usize,
}

/// `max_M KL(M ‖ M̄)` over a statistical class.
pub fn kl_radius(class: &ModelClass, reference: &[f64]) -> f64 {
    class.models().iter().map(|m| raw::kl(m.dist(0), reference)).fold(0.0, f64::max)
}

impl OmdState {
    /// `η = √(C_KL / (16 N))`.
    pub fn new(class: &ModelClass, reference: &[f64], c_kl: f64, n: usize, alpha: f64) -> Result<Self> {
        if !class.is_statistical() {
            return Err(Error::Structure("mirror descent needs a statistical class".into()));
        }
        if !(alpha > 0.0) || n == 0 || !(c_kl >= 0.0) {
            return Err(Error::Range("alpha, N and C_KL must be positive".into()));
        }
        if reference.len() != class.n_obs() {
            return Err(Error::SpaceMismatch("reference length != |Z|".into()));
        }
        for m in class.models() {
            if let Some(z) = (0..reference.len()).find(|&z| m.dist(0)[z] > 0.0 && reference[z] <= 0.0) {
                return Err(Error::AbsoluteContinuity(format!(
                    "model {} has mass at {} outside the reference support",
                    m.name,
                    class.obs_space().label(z)
                )));
            }
        }
        let log_ref: Vec<f64> =
            reference.iter().map(|&r| if r > 0.0 { r.ln() } else { f64::NEG_INFINITY }).collect();
        let pred = softmax(&log_ref);
        Ok(Self {
            log_ref,
            grad: vec![0.0; reference.len()],
            pred,
            eta: (c_kl / (16.0 * n as f64)).sqrt(),
            alpha,
            n_decisions: class.n_decisions(),
            t: 0,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn predict(&self) -> &[f64] {
        &self.pred
    }

    pub fn predict_model(&self) -> Model {
        Model { name: "omd".into(), dists: vec![self.pred.clone(); self.n_decisions] }
    }

    pub fn step(&mut self, l: &[f64], o: f64) -> Result<&[f64]> {
        check_sign(o)?;
        let g = c_alpha(self.alpha) * raw::dot(l, &self.pred) - o;
        for (a, v) in self.grad.iter_mut().zip(l) {
            *a += g * v;
        }
        let logits: Vec<f64> = self.log_ref.iter().zip(&self.grad).map(|(r, a)| r - self.eta * a).collect();
        self.pred = softmax(&logits);
        self.t += 1;
        Ok(&self.pred)
    }
}

/// Free-function form of [`OmdState::step`].
pub fn omd_step(state: &mut OmdState, l: &[f64], o: f64) -> Result<Vec<f64>> {
    state.step(l, o).map(<[f64]>::to_vec)
}

/// Cumulative estimation error `Σ_t E_{(π,ℓ)∼q^t} D_ℓ²(M*(π), M̂^t(π))`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstRecord {
    pub cumulative: f64,
    pub per_step: Vec<f64>,
    pub bound: f64,
}

impl EstRecord {
    pub fn new(bound: f64) -> Self {
        Self { cumulative: 0.0, per_step: Vec::new(), bound }
    }

    /// Appends the error of `pred` under the cell distribution `q`
    /// (cell `j` is decision `j / |dict|`, entry `j % |dict|`).
    pub fn record(&mut self, truth: &Model, pred: &Model, q: &[f64], dict: &LDictionary) -> f64 {
        let nd = dict.len();
        let mut e = 0.0;
        for (j, &w) in q.iter().enumerate() {
            if w > 0.0 {
                let (pi, k) = (j / nd, j % nd);
                let d = raw::l_divergence(truth.dist(pi), pred.dist(pi), dict.get(k).values());
                e += w * d * d;
            }
        }
        self.push(e);
        e
    }

    pub fn push(&mut self, e: f64) {
        self.per_step.push(e);
        self.cumulative += e;
    }

    pub fn within_bound(&self) -> bool {
        self.cumulative <= self.bound
    }
}

/// Free-function form of [`EstRecord::record`].
pub fn record_est(record: &mut EstRecord, truth: &Model, q: &[f64], pred: &Model, dict: &LDictionary) -> f64 {
    record.record(truth, pred, q, dict)
}

/// `C·ln(|M|/δ)/α²`.
pub fn vovk_bound(n_models: usize, delta: f64, alpha: f64, constant: f64) -> f64 {
    constant * (n_models as f64 / delta).ln() / (alpha * alpha)
}

/// `C·(√(C_KL N)/α + ln(1/δ)/α²)`.
pub fn omd_bound(c_kl: f64, n: usize, delta: f64, alpha: f64, constant: f64) -> f64 {
    constant * ((c_kl * n as f64).sqrt() / alpha + (1.0 / delta).ln() / (alpha * alpha))
}

/// Oracle selection by id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "id", deny_unknown_fields)]
pub enum OracleSpec {
    Vovk {
        #[serde(default = "default_constant")]
        constant: f64,
    },
    /// Mirror descent around the uniform-mixture reference of the class.
    Omd {
        #[serde(default = "default_constant")]
        constant: f64,
    },
}

fn default_constant() -> f64 {
    DEFAULT_EST_CONSTANT
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec::Vovk { constant: DEFAULT_EST_CONSTANT }
    }
}

/// A running estimation oracle.
#[derive(Clone, Debug)]
pub enum Oracle {
    Vovk(VovkState),
    Omd(OmdState),
}

impl Oracle {
    /// Fresh oracle for a run of `n` rounds.
    pub fn new(spec: &OracleSpec, class: &ModelClass, n: usize, alpha: f64) -> Result<Self> {
        match spec {
            OracleSpec::Vovk { .. } => Ok(Oracle::Vovk(VovkState::new(class, alpha)?)),
            OracleSpec::Omd { .. } => {
                let r = class.uniform_reference();
                let c_kl = kl_radius(class, r.dist(0));
                Ok(Oracle::Omd(OmdState::new(class, r.dist(0), c_kl, n, alpha)?))
            }
        }
    }

    /// Configured `Est(n, δ)`.
    pub fn bound(spec: &OracleSpec, class: &ModelClass, n: usize, delta: f64, alpha: f64) -> f64 {
        match *spec {
            OracleSpec::Vovk { constant } => vovk_bound(class.len(), delta, alpha, constant),
            OracleSpec::Omd { constant } => {
                let r = class.uniform_reference();
                omd_bound(kl_radius(class, r.dist(0)), n, delta, alpha, constant)
            }
        }
    }

    pub fn predict(&self) -> Model {
        match self {
            Oracle::Vovk(s) => s.predict(),
            Oracle::Omd(s) => s.predict_model(),
        }
    }

    pub fn step(&mut self, pi: usize, l: &[f64], o: f64) -> Result<()> {
        match self {
            Oracle::Vovk(s) => s.step(pi, l, o).map(|_| ()),
            Oracle::Omd(s) => s.step(l, o).map(|_| ()),
        }
    }
}
