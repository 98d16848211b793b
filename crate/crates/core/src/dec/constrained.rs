//! Constrained, quantile and statistical-query DECs.
//!
//! For a fixed exploration distribution `q` the feasible set
//! `{M : E_q D_M ≤ budget}` is explicit and the inner problem over `p` is a
//! small matrix game, memoized by feasible set. The outer search over `q`
//! evaluates (a) the optimal `q` of offset LPs on a geometric `γ` grid and
//! then (b) either every point of a simplex grid or a multi-start projected
//! subgradient walk. Every evaluated `q` yields a valid upper bound.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{offset_dec, project_simplex, simplex_grid, simplex_grid_size, tidy, DecCertificate, DecInstance};
use super::{Divergence, Mode, Variant};
use crate::error::{Error, Result};
use crate::lp;
use crate::models::{Model, ModelClass, QueryModelClass, RandomizedQueryModel};
use crate::prob::raw;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub restarts: usize,
    pub steps: usize,
    pub step_size: f64,
    /// Resolution of the exhaustive grid over `q`.
    pub grid_resolution: usize,
    /// Largest number of cells for which the exhaustive grid is used.
    pub exact_max_cells: usize,
    /// Resolution of the grid over `p` in the quantile inner problem.
    pub p_grid_resolution: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            steps: 500,
            step_size: 0.5,
            grid_resolution: 40,
            exact_max_cells: 4,
            p_grid_resolution: 40,
            seed: 0,
        }
    }
}

/// Inner objective of a constrained DEC.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Inner {
    /// `E_{π∼p} L(M,π)`.
    Expected,
    /// `δ`-quantile loss of `L(M,π)` under `p`.
    Quantile { delta: f64 },
}

/// `sup{Δ ≥ 0 : P_{π∼p}(L(M,π) ≥ Δ) ≥ δ}`.
pub fn quantile_loss(p: &[f64], losses: &[f64], delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Range(format!("delta = {delta} outside (0,1]")));
    }
    Ok(quantile_raw(p, losses, delta))
}

fn quantile_raw(p: &[f64], losses: &[f64], delta: f64) -> f64 {
    let mut support: Vec<(f64, f64)> =
        p.iter().zip(losses).filter(|(w, _)| **w > 0.0).map(|(w, l)| (*l, *w)).collect();
    support.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite losses"));
    let mut cum = 0.0;
    for (l, w) in &support {
        cum += w;
        if cum >= delta - 1e-12 {
            return l.max(0.0);
        }
    }
    0.0
}

/// Inner value for a feasible set and the minimizing `p`.
#[derive(Clone, Debug)]
struct InnerSolution {
    value: f64,
    p: Vec<f64>,
}

struct Engine<'a> {
    inst: &'a DecInstance,
    budget: f64,
    inner: Inner,
    memo: HashMap<Vec<bool>, InnerSolution>,
    p_grid: Option<Vec<Vec<f64>>>,
}

impl<'a> Engine<'a> {
    fn new(inst: &'a DecInstance, budget: f64, inner: Inner, cfg: &'a SearchConfig) -> Self {
        let p_grid = match inner {
            Inner::Quantile { .. } if inst.n_decisions <= 3 => {
                Some(simplex_grid(inst.n_decisions, cfg.p_grid_resolution.max(1)))
            }
            _ => None,
        };
        Self { inst, budget, inner, memo: HashMap::new(), p_grid }
    }

    fn solve_inner(&mut self, feas: &[bool]) -> Result<InnerSolution> {
        if let Some(s) = self.memo.get(feas) {
            return Ok(s.clone());
        }
        let np = self.inst.n_decisions;
        let rows: Vec<&Vec<f64>> =
            (0..self.inst.n_models()).filter(|&m| feas[m]).map(|m| &self.inst.loss[m]).collect();
        let sol = if rows.is_empty() {
            InnerSolution { value: 0.0, p: vec![1.0 / np as f64; np] }
        } else {
            match self.inner {
                Inner::Expected => {
                    let coef: Vec<Vec<f64>> = rows.iter().map(|r| (*r).clone()).collect();
                    let g = lp::solve_game(&[np], &coef, &vec![0.0; coef.len()])?;
                    let mut p = g.x;
                    tidy(&mut p);
                    let value = rows.iter().map(|r| raw::dot(&p, r)).fold(f64::NEG_INFINITY, f64::max);
                    InnerSolution { value, p }
                }
                Inner::Quantile { delta } => {
                    let eval = |p: &[f64]| {
                        rows.iter().map(|r| quantile_raw(p, r, delta)).fold(f64::NEG_INFINITY, f64::max)
                    };
                    let mut cands: Vec<Vec<f64>> = match &self.p_grid {
                        Some(g) => g.clone(),
                        None => {
                            let mut c: Vec<Vec<f64>> = (0..np)
                                .map(|i| {
                                    let mut e = vec![0.0; np];
                                    e[i] = 1.0;
                                    e
                                })
                                .collect();
                            c.push(vec![1.0 / np as f64; np]);
                            c
                        }
                    };
                    let coef: Vec<Vec<f64>> = rows.iter().map(|r| (*r).clone()).collect();
                    let g = lp::solve_game(&[np], &coef, &vec![0.0; coef.len()])?;
                    let mut gp = g.x;
                    tidy(&mut gp);
                    let supp: Vec<usize> = (0..np).filter(|&i| gp[i] > 0.0).collect();
                    let mut unif = vec![0.0; np];
                    supp.iter().for_each(|&i| unif[i] = 1.0 / supp.len() as f64);
                    cands.push(gp);
                    cands.push(unif);
                    let mut best = InnerSolution { value: f64::INFINITY, p: cands[0].clone() };
                    for c in cands {
                        let v = eval(&c);
                        if v < best.value - 1e-12 {
                            best = InnerSolution { value: v, p: c };
                        }
                    }
                    best
                }
            }
        };
        self.memo.insert(feas.to_vec(), sol.clone());
        Ok(sol)
    }

    fn eval(&mut self, q: &[f64]) -> Result<InnerSolution> {
        let feas = self.inst.feasible(q, self.budget);
        self.solve_inner(&feas)
    }

    /// Subgradient of the Lagrangian offset value at `q` with `γ = 1/budget`.
    fn direction(&self, q: &[f64]) -> Result<Vec<f64>> {
        let gamma = 1.0 / self.budget.max(1e-12);
        let inst = self.inst;
        let coef: Vec<Vec<f64>> = inst.loss.clone();
        let offs: Vec<f64> = inst.div.iter().map(|d| -gamma * raw::dot(q, d)).collect();
        let g = lp::solve_game(&[inst.n_decisions], &coef, &offs)?;
        let mut dir = vec![0.0; inst.n_cells()];
        for (m, mu) in g.mu.iter().enumerate() {
            for (j, d) in inst.div[m].iter().enumerate() {
                dir[j] -= gamma * mu * d;
            }
        }
        let scale = dir.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if scale > 0.0 {
            dir.iter_mut().for_each(|v| *v /= scale);
        }
        Ok(dir)
    }
}

struct Best {
    value: f64,
    p: Vec<f64>,
    q: Vec<f64>,
}

fn consider(best: &mut Option<Best>, sol: InnerSolution, q: &[f64]) {
    let better = match best {
        None => true,
        Some(b) => sol.value < b.value - 1e-12,
    };
    if better {
        *best = Some(Best { value: sol.value, p: sol.p, q: q.to_vec() });
    }
}

/// Offset-LP exploration distributions tried first by every search.
fn offset_candidates(inst: &DecInstance, budget: f64) -> Result<Vec<Vec<f64>>> {
    let mut gammas: Vec<f64> = (-4..=12).map(|j| 2f64.powi(j)).collect();
    if budget > 0.0 {
        gammas.push(1.0 / budget);
    }
    let mut out = Vec::with_capacity(gammas.len());
    for g in gammas {
        out.push(offset_dec(inst, g, Variant::Pac)?.q);
    }
    Ok(out)
}

/// Outer search for `min_q` of the constrained objective.
pub fn constrained_search(
    inst: &DecInstance,
    budget: f64,
    inner: Inner,
    cfg: &SearchConfig,
) -> Result<DecCertificate> {
    if inst.n_models() == 0 {
        return Err(Error::EmptyClass);
    }
    if !(budget >= 0.0) {
        return Err(Error::Range(format!("budget {budget} must be non-negative")));
    }
    let nj = inst.n_cells();
    let mut engine = Engine::new(inst, budget, inner, cfg);
    let mut best: Option<Best> = None;
    for q in offset_candidates(inst, budget)? {
        let s = engine.eval(&q)?;
        consider(&mut best, s, &q);
    }
    let exact = nj <= cfg.exact_max_cells && simplex_grid_size(nj, cfg.grid_resolution) <= 5e6;
    if exact {
        for q in simplex_grid(nj, cfg.grid_resolution) {
            let s = engine.eval(&q)?;
            consider(&mut best, s, &q);
        }
    } else {
        for r in 0..cfg.restarts {
            let mut q = if r == 0 {
                vec![1.0 / nj as f64; nj]
            } else {
                let mut g = rng::stream(cfg.seed, rng::tag::SEARCH, r as u64);
                let mut e: Vec<f64> = (0..nj).map(|_| -(1.0 - g.random::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                e.iter_mut().for_each(|v| *v /= s);
                e
            };
            for it in 1..=cfg.steps {
                let s = engine.eval(&q)?;
                consider(&mut best, s, &q);
                let dir = engine.direction(&q)?;
                let eta = cfg.step_size / (it as f64).sqrt();
                let moved: Vec<f64> = q.iter().zip(&dir).map(|(a, d)| a - eta * d).collect();
                q = project_simplex(&moved);
            }
        }
    }
    let best = best.expect("at least one candidate");
    let (value, witness) = recheck_constrained(inst, &best.p, &best.q, budget, inner);
    Ok(DecCertificate {
        kind: match inner {
            Inner::Expected => "constrained-pac".into(),
            Inner::Quantile { .. } => "quantile-pac".into(),
        },
        value,
        p: best.p,
        q: best.q,
        n_dict: inst.n_dict,
        witness_model: witness,
        witness_mixture: vec![],
        mode: if exact { Mode::ExactEnum } else { Mode::HeuristicUpper },
        gamma: None,
        eps: Some(budget.sqrt()),
    })
}

/// Constrained objective at `(p, q)`: value and lowest worst feasible model.
pub fn recheck_constrained(
    inst: &DecInstance,
    p: &[f64],
    q: &[f64],
    budget: f64,
    inner: Inner,
) -> (f64, Option<usize>) {
    match inner {
        Inner::Expected => inst.constrained_objective(p, q, budget),
        Inner::Quantile { delta } => {
            let feas = inst.feasible(q, budget);
            let mut best: (f64, Option<usize>) = (0.0, None);
            for m in 0..inst.n_models() {
                if feas[m] {
                    let v = quantile_raw(p, &inst.loss[m], delta);
                    if best.1.is_none() || v > best.0 {
                        best = (v, Some(m));
                    }
                }
            }
            best
        }
    }
}

/// Constrained private PAC-DEC at radius `ε`.
pub fn constrained_pac_dec_ldp(
    class: &ModelClass,
    reference: &Model,
    eps: f64,
    cfg: &SearchConfig,
) -> Result<DecCertificate> {
    if !(eps >= 0.0) {
        return Err(Error::Range(format!("eps = {eps} must be non-negative")));
    }
    let inst = DecInstance::from_class(class, reference, Divergence::Ldp)?;
    let mut c = constrained_search(&inst, eps * eps, Inner::Expected, cfg)?;
    c.kind = "constrained-pac-ldp".into();
    c.eps = Some(eps);
    Ok(c)
}

/// Quantile private PAC-DEC at radius `ε` and level `δ`.
pub fn quantile_pac_dec(
    class: &ModelClass,
    reference: &Model,
    eps: f64,
    delta: f64,
    cfg: &SearchConfig,
) -> Result<DecCertificate> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Range(format!("delta = {delta} outside (0,1]")));
    }
    let inst = DecInstance::from_class(class, reference, Divergence::Ldp)?;
    let mut c = constrained_search(&inst, eps * eps, Inner::Quantile { delta }, cfg)?;
    c.kind = "quantile-pac-ldp".into();
    c.eps = Some(eps);
    Ok(c)
}

/// Instance whose cells are queries and whose divergence is
/// `P_{v∼ref(j)}(‖M(j) - v‖ > tol)`.
pub fn sq_instance(qclass: &QueryModelClass, reference: &RandomizedQueryModel, tol: f64) -> DecInstance {
    DecInstance {
        loss: qclass.loss.clone(),
        div: qclass.exceed_table(reference, tol),
        n_decisions: qclass.n_decisions(),
        n_dict: 1,
    }
}

/// SQ DEC at radius `ε` and tolerance `τ`. Cell `j` of the certificate's
/// `q` is query `j`.
pub fn sq_dec(
    qclass: &QueryModelClass,
    reference: &RandomizedQueryModel,
    eps: f64,
    tau: f64,
    cfg: &SearchConfig,
) -> Result<DecCertificate> {
    if !(tau >= 0.0) {
        return Err(Error::Range(format!("tau = {tau} must be non-negative")));
    }
    if reference.atoms.len() != qclass.n_queries() {
        return Err(Error::SpaceMismatch("reference covers a different query set".into()));
    }
    let inst = sq_instance(qclass, reference, tau);
    let mut c = constrained_search(&inst, eps * eps, Inner::Expected, cfg)?;
    c.kind = "sq".into();
    c.eps = Some(eps);
    Ok(c)
}

/// Result of a Lagrangian sweep: the offset certificate whose `(p, q)`
/// minimizes the exact constrained objective.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepChoice {
    pub gamma: f64,
    pub constrained_value: f64,
    pub cert: DecCertificate,
}

/// Solves offset LPs for each `γ` and keeps the `(p, q)` with the smallest
/// constrained objective at `budget`; ties go to the smallest `γ`.
pub fn lagrangian_sweep(inst: &DecInstance, budget: f64, gammas: &[f64]) -> Result<SweepChoice> {
    let mut best: Option<SweepChoice> = None;
    for &g in gammas {
        let cert = offset_dec(inst, g, Variant::Pac)?;
        let (v, _) = inst.constrained_objective(&cert.p, &cert.q, budget);
        let better = match &best {
            None => true,
            Some(b) => v < b.constrained_value - 1e-12,
        };
        if better {
            best = Some(SweepChoice { gamma: g, constrained_value: v, cert });
        }
    }
    best.ok_or_else(|| Error::Config("empty gamma sweep".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dec::offset_pac_dec_ldp;
    use crate::models::mab_class;

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile_loss(&[0.0, 1.0], &[0.2, 0.7], 1.0).unwrap(), 0.7);
        assert_eq!(quantile_loss(&[0.0, 1.0], &[0.2, 0.7], 0.3).unwrap(), 0.7);
        assert_eq!(quantile_loss(&[0.5, 0.5], &[0.0, 1.0], 0.5).unwrap(), 1.0);
        assert_eq!(quantile_loss(&[0.5, 0.5], &[0.3, 0.9], 1.0).unwrap(), 0.3);
        assert!(quantile_loss(&[1.0], &[0.0], 0.0).is_err());
    }

    fn two_model() -> ModelClass {
        mab_class(&[vec![0.8, -0.4], vec![-0.6, 0.5]]).unwrap()
    }

    #[test]
    fn vacuous_constraint_is_game_value() {
        let c = two_model();
        let r = c.uniform_reference();
        let cert = constrained_pac_dec_ldp(&c, &r, 10.0, &SearchConfig::default()).unwrap();
        let game = offset_pac_dec_ldp(&c, &r, 0.0).unwrap();
        assert!((cert.value - game.value).abs() < 1e-9);
    }

    #[test]
    fn eps_zero_reference_in_class() {
        let c = two_model();
        let r = c.model(0).clone();
        let cert = constrained_pac_dec_ldp(&c, &r, 0.0, &SearchConfig::default()).unwrap();
        assert!(cert.value.abs() < 1e-12, "{}", cert.value);
    }

    #[test]
    fn heuristic_mode_bounds_hold() {
        let c = mab_class(&[vec![0.8, -0.4, 0.1], vec![-0.6, 0.5, 0.0], vec![0.1, 0.1, 0.6]]).unwrap();
        let r = c.uniform_reference();
        let cfg = SearchConfig { steps: 60, restarts: 2, ..Default::default() };
        let cert = constrained_pac_dec_ldp(&c, &r, 0.3, &cfg).unwrap();
        assert_eq!(cert.mode, Mode::HeuristicUpper);
        let inst = DecInstance::from_class(&c, &r, Divergence::Ldp).unwrap();
        let (v, _) = recheck_constrained(&inst, &cert.p, &cert.q, 0.09, Inner::Expected);
        assert!((v - cert.value).abs() < 1e-9);
        let lower = offset_pac_dec_ldp(&c, &r, 1.0 / 0.09).unwrap().value;
        assert!(lower <= cert.value + 1e-9);
    }

    #[test]
    fn sq_tolerance_above_diameter() {
        let q = QueryModelClass::hypothesis_selection(
            &[vec![0.5, 0.5], vec![0.9, 0.1], vec![0.1, 0.9]],
            &[vec![0], vec![1, 2]],
        )
        .unwrap();
        let r = q.uniform_reference();
        let cert = sq_dec(&q, &r, 0.1, 1.0, &SearchConfig::default()).unwrap();
        // Every model feasible: value of the game with losses [[0,1],[1,0],[1,0]].
        assert!((cert.value - 0.5).abs() < 1e-9);
        let single = QueryModelClass::hypothesis_selection(&[vec![0.5, 0.5]], &[vec![0]]).unwrap();
        let c = sq_dec(&single, &single.uniform_reference(), 0.1, 0.0, &SearchConfig::default()).unwrap();
        assert_eq!(c.value, 0.0);
    }
}
