//! Exploration-by-optimization with an information set structure.
//!
//! Exploration cells are pairs `(π, ℓ)` over the class dictionary, observed
//! through the binary channel of `ℓ`, so `O = {-1,+1}` and
//! `P_M(o = +1 | π, ℓ) = (1 + c_α ⟨ℓ, M(π)⟩)/2`.

use std::collections::BTreeMap;

use super::{cell_marginal, Action, ExoOption, InfoSetStructure, LearnerConfig, Learner, Observation, Plan};
use crate::channels::{binary_channel, c_alpha, Channel};
use crate::error::{Error, Result};
use crate::lp;
use crate::models::ModelClass;
use crate::prob::raw;
use crate::rng::{sample_index, stream, tag};

/// `ξ[ψ][j][o]`.
pub type Xi = Vec<Vec<[f64; 2]>>;

/// Smallest decrease of `Γ` that resets the stall counter.
const IMPROVE_TOL: f64 = 1e-3;

pub struct ExoPlus {
    class: ModelClass,
    info: InfoSetStructure,
    cfg: LearnerConfig,
    seed: u64,
    gamma: f64,
    clip: f64,
    channels: Vec<Channel>,
    /// `(ψ, m)` for `m ∈ M_ψ`.
    rows: Vec<(usize, usize)>,
    /// `lpsi[r][π] = L_ψ(M, π)`.
    lpsi: Vec<Vec<f64>>,
    /// `obs[m][j] = [P(o=-1), P(o=+1)]`.
    obs: Vec<Vec<[f64; 2]>>,
    log_w: Vec<f64>,
    last_xi: Option<Xi>,
    p_sum: Vec<f64>,
    rounds: usize,
    gamma_sum: f64,
}

impl ExoPlus {
    pub fn new(class: ModelClass, info: InfoSetStructure, cfg: LearnerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        info.validate(&class)?;
        let gamma = cfg.gamma.ok_or_else(|| Error::Config("exo_plus needs gamma".into()))?;
        if !(gamma > 0.0) {
            return Err(Error::Config(format!("gamma = {gamma} must be positive")));
        }
        if cfg.option == ExoOption::Reg && !class.is_reward_based() {
            return Err(Error::Config("the reg option needs a reward-based class".into()));
        }
        let clip = cfg.clip.unwrap_or_else(|| (cfg.horizon.max(2) as f64).ln());
        let dict = class.dictionary();
        let channels =
            dict.entries().iter().map(|l| binary_channel(l, cfg.alpha)).collect::<Result<Vec<_>>>()?;
        let np = class.n_decisions();
        let nd = dict.len();
        let c = c_alpha(cfg.alpha);
        let obs = class
            .models()
            .iter()
            .map(|m| {
                (0..np * nd)
                    .map(|j| raw::rad(c * raw::dot(m.dist(j / nd), dict.get(j % nd).values())))
                    .collect()
            })
            .collect();
        let mut rows = Vec::new();
        let mut lpsi = Vec::new();
        for (psi, set) in info.sets.iter().enumerate() {
            for &m in set {
                rows.push((psi, m));
                lpsi.push(
                    (0..np)
                        .map(|pi| match class.value(m, info.anchors[psi]) {
                            Some(v) => v - class.value(m, pi).expect("reward-based"),
                            None => class.loss(m, pi),
                        })
                        .collect(),
                );
            }
        }
        let log_w = info.prior.iter().map(|w| w.ln()).collect();
        Ok(Self {
            class,
            info,
            cfg,
            seed,
            gamma,
            clip,
            channels,
            rows,
            lpsi,
            obs,
            log_w,
            last_xi: None,
            p_sum: vec![0.0; np],
            rounds: 0,
            gamma_sum: 0.0,
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        let mx = self.log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.log_w.iter().map(|l| (l - mx).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect()
    }

    fn n_cells(&self) -> usize {
        self.class.n_decisions() * self.channels.len()
    }

    /// `Σ_ψ' w(ψ') exp(ξ(ψ';j,o))` for every `(j, o)`.
    fn partition(&self, w: &[f64], xi: &Xi) -> Vec<[f64; 2]> {
        (0..self.n_cells())
            .map(|j| {
                let mut s = [0.0; 2];
                for (psi, wp) in w.iter().enumerate() {
                    for o in 0..2 {
                        s[o] += wp * xi[psi][j][o].exp();
                    }
                }
                s
            })
            .collect()
    }

    /// Exploration coefficient of row `(ψ, m)` at cell `j`:
    /// `-γ Σ_o P_M(o|j) (1 - Σ_ψ' w(ψ') exp(ξ(ψ') - ξ(ψ)))`.
    fn explore_coef(&self, psi: usize, m: usize, j: usize, xi: &Xi, part: &[[f64; 2]]) -> f64 {
        let mut s = 0.0;
        for o in 0..2 {
            s += self.obs[m][j][o] * (1.0 - part[j][o] * (-xi[psi][j][o]).exp());
        }
        -self.gamma * s
    }

    fn objective_rows(&self, w: &[f64], xi: &Xi) -> (Vec<usize>, Vec<Vec<f64>>) {
        let nd = self.channels.len();
        let nj = self.n_cells();
        let part = self.partition(w, xi);
        let coef = self
            .rows
            .iter()
            .zip(&self.lpsi)
            .map(|(&(psi, m), l)| match self.cfg.option {
                ExoOption::Pac => {
                    let mut row = l.clone();
                    row.extend((0..nj).map(|j| self.explore_coef(psi, m, j, xi, &part)));
                    row
                }
                ExoOption::Reg => {
                    (0..nj).map(|j| l[j / nd] + self.explore_coef(psi, m, j, xi, &part)).collect()
                }
            })
            .collect();
        let blocks = match self.cfg.option {
            ExoOption::Pac => vec![self.class.n_decisions(), nj],
            ExoOption::Reg => vec![nj],
        };
        (blocks, coef)
    }

    /// `sup_{(M,ψ): M∈M_ψ} Γ_{w,γ}(p, q, ξ; M, ψ)` by enumeration.
    pub fn gamma_value(&self, w: &[f64], p: &[f64], q: &[f64], xi: &Xi) -> f64 {
        self.row_values(w, p, q, xi).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `ξ(ψ;j,o) = ½ clip_{[-A,A]} ln(P_μ(ψ|j,o)/w(ψ))`.
    fn xi_from_mixture(&self, w: &[f64], mu: &[f64]) -> Xi {
        let npsi = self.info.len();
        let nj = self.n_cells();
        let mut xi = vec![vec![[0.0; 2]; nj]; npsi];
        for j in 0..nj {
            for o in 0..2 {
                let mut post = vec![0.0; npsi];
                for (r, &(psi, m)) in self.rows.iter().enumerate() {
                    post[psi] += mu[r] * self.obs[m][j][o];
                }
                let s: f64 = post.iter().sum();
                if s <= 0.0 {
                    continue;
                }
                for psi in 0..npsi {
                    let ratio = post[psi] / s / w[psi];
                    let lr = if ratio > 0.0 { ratio.ln() } else { f64::NEG_INFINITY };
                    xi[psi][j][o] = 0.5 * lr.clamp(-self.clip, self.clip);
                }
            }
        }
        xi
    }

    /// `min_ξ max_rows Γ` for fixed `(p, q)`: Hedge over rows against
    /// best-responding `ξ` (the clipped posterior of the row mixture), with
    /// the averaged `ξ` returned when it beats every iterate.
    fn xi_step(&self, w: &[f64], p: &[f64], q: &[f64], mu0: &[f64]) -> (Xi, f64) {
        const ITERS: usize = 40;
        let nr = self.rows.len();
        let mut mu: Vec<f64> = mu0.iter().map(|m| 0.5 * m + 0.5 / nr as f64).collect();
        let eta = (8.0 * (nr.max(2) as f64).ln() / ITERS as f64).sqrt() / (1.0 + self.gamma);
        let mut sum: Xi = vec![vec![[0.0; 2]; self.n_cells()]; self.info.len()];
        let mut best: Option<(Xi, f64)> = None;
        for _ in 0..ITERS {
            let xi = self.xi_from_mixture(w, &mu);
            let vals = self.row_values(w, p, q, &xi);
            let v = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for (a, b) in sum.iter_mut().flatten().zip(xi.iter().flatten()) {
                a[0] += b[0];
                a[1] += b[1];
            }
            if best.as_ref().is_none_or(|b| v < b.1) {
                best = Some((xi, v));
            }
            let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for (m, x) in mu.iter_mut().zip(&vals) {
                *m *= (eta * (x - mx)).exp();
            }
            let s: f64 = mu.iter().sum();
            mu.iter_mut().for_each(|m| *m /= s);
        }
        for a in sum.iter_mut().flatten() {
            a[0] /= ITERS as f64;
            a[1] /= ITERS as f64;
        }
        let v = self.gamma_value(w, p, q, &sum);
        let best = best.expect("iterations ran");
        if v < best.1 {
            (sum, v)
        } else {
            best
        }
    }

    fn row_values(&self, w: &[f64], p: &[f64], q: &[f64], xi: &Xi) -> Vec<f64> {
        let part = self.partition(w, xi);
        self.rows
            .iter()
            .zip(&self.lpsi)
            .map(|(&(psi, m), l)| {
                raw::dot(p, l) + (0..q.len()).map(|j| q[j] * self.explore_coef(psi, m, j, xi, &part)).sum::<f64>()
            })
            .collect()
    }

    /// Block-coordinate minimization alternating the `(p, q)` game LP with
    /// [`Self::xi_step`]; keeps the best triple seen. Returns `(p, q, ξ, Γ)`.
    pub fn solve(&self, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Xi, f64)> {
        let np = self.class.n_decisions();
        let nd = self.channels.len();
        let nj = self.n_cells();
        let mut xi: Xi = vec![vec![[0.0; 2]; nj]; self.info.len()];
        let mut best: Option<(Vec<f64>, Vec<f64>, Xi, f64)> = None;
        let mut stale = 0;
        for _ in 0..self.cfg.exo_rounds.max(1) {
            let (blocks, coef) = self.objective_rows(w, &xi);
            let sol = lp::solve_game(&blocks, &coef, &vec![0.0; coef.len()])?;
            let (p, q) = match self.cfg.option {
                ExoOption::Pac => (sol.x[..np].to_vec(), sol.x[np..].to_vec()),
                ExoOption::Reg => (cell_marginal(&sol.x, nd, np), sol.x.clone()),
            };
            let v = self.gamma_value(w, &p, &q, &xi);
            if best.as_ref().is_none_or(|b| v < b.3 - IMPROVE_TOL) {
                best = Some((p.clone(), q.clone(), xi.clone(), v));
                stale = 0;
            } else {
                stale += 1;
                if stale >= 2 {
                    break;
                }
            }
            let (nxi, nv) = self.xi_step(w, &p, &q, &sol.mu);
            if best.as_ref().is_none_or(|b| nv < b.3 - IMPROVE_TOL) {
                best = Some((p, q, nxi.clone(), nv));
                stale = 0;
            }
            xi = nxi;
        }
        Ok(best.expect("at least one round"))
    }

    pub fn gamma_sum(&self) -> f64 {
        self.gamma_sum
    }
}

impl Learner for ExoPlus {
    fn plan(&mut self, t: usize) -> Result<Plan> {
        let w = self.weights();
        let (p, q, xi, v) = self.solve(&w)?;
        let mut rng = stream(self.seed, tag::LEARNER, t as u64);
        let j = sample_index(&mut rng, &q);
        let nd = self.channels.len();
        let np = self.class.n_decisions();
        let played = match self.cfg.option {
            ExoOption::Reg => p.clone(),
            ExoOption::Pac => cell_marginal(&q, nd, np),
        };
        for (a, b) in self.p_sum.iter_mut().zip(&p) {
            *a += b;
        }
        self.rounds += 1;
        self.gamma_sum += v;
        self.last_xi = Some(xi);
        Ok(Plan {
            action: Action::Channel { decision: j / nd, cell: j, channel: self.channels[j % nd].clone() },
            p,
            played,
            cert: Some(v),
        })
    }

    fn observe(&mut self, _t: usize, action: &Action, obs: &Observation) -> Result<()> {
        let Action::Channel { cell, .. } = action else {
            return Err(Error::Protocol("exo_plus expects channel rounds".into()));
        };
        let o = if obs.sign()? > 0.0 { 1 } else { 0 };
        let xi = self.last_xi.take().ok_or_else(|| Error::Protocol("observe before plan".into()))?;
        for (psi, lw) in self.log_w.iter_mut().enumerate() {
            *lw += xi[psi][*cell][o];
        }
        let mx = self.log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.log_w.iter_mut().for_each(|x| *x -= mx);
        Ok(())
    }

    fn output(&self) -> Vec<f64> {
        if self.rounds == 0 {
            let np = self.class.n_decisions();
            return vec![1.0 / np as f64; np];
        }
        self.p_sum.iter().map(|x| x / self.rounds as f64).collect()
    }

    fn stats(&self) -> BTreeMap<String, f64> {
        let mut s = BTreeMap::new();
        s.insert("gamma".into(), self.gamma);
        s.insert("clip".into(), self.clip);
        s.insert("sum_gamma_t".into(), self.gamma_sum);
        s.insert("cert_value".into(), self.gamma_sum);
        s
    }
}

/// `TΔ + Σ_t Γ^t + 2γ(ln(1/w¹(E*_Δ)) + ln(1/δ))`, where `E*_Δ` collects the
/// sets containing every model of `constraint` whose anchor is Δ-optimal
/// for the average realized model. Returns infinity when `E*_Δ` is empty.
pub fn exo_regret_bound(
    class: &ModelClass,
    info: &InfoSetStructure,
    cfg: &LearnerConfig,
    sum_gamma: f64,
    constraint: &[usize],
    realized: &[usize],
) -> f64 {
    let np = class.n_decisions();
    let mut vbar = vec![0.0; np];
    for &m in realized {
        for (pi, v) in vbar.iter_mut().enumerate() {
            *v += class.value(m, pi).unwrap_or(-class.loss(m, pi));
        }
    }
    let best = vbar.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = realized.len().max(1) as f64;
    let mass: f64 = (0..info.len())
        .filter(|&psi| {
            constraint.iter().all(|m| info.sets[psi].contains(m))
                && (best - vbar[info.anchors[psi]]) / n <= cfg.info_delta + 1e-12
        })
        .map(|psi| info.prior[psi])
        .sum();
    if mass <= 0.0 {
        return f64::INFINITY;
    }
    let gamma = cfg.gamma.unwrap_or(0.0);
    cfg.horizon as f64 * cfg.info_delta + sum_gamma + 2.0 * gamma * ((1.0 / mass).ln() + (1.0 / cfg.delta).ln())
}
