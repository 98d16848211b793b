//! Named constructions of model classes.

use serde::{Deserialize, Serialize};

use super::{LossSpec, Model, ModelClass, RewardFn};
use crate::error::{Error, Result};
use crate::prob::{raw, FiniteSpace};

fn check_mean(m: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&m) {
        Ok(())
    } else {
        Err(Error::Range(format!("mean {m} outside [-1,1]")))
    }
}

/// Reward `(r+1)/2` on `Z = {-1,+1}` for every decision.
fn sign_reward(n_decisions: usize) -> RewardFn {
    RewardFn { values: vec![vec![0.0; n_decisions], vec![1.0; n_decisions]] }
}

/// Multi-armed bandit: one model per mean vector, rewards `rad(mean)`.
pub fn mab_class(arm_means: &[Vec<f64>]) -> Result<ModelClass> {
    let k = arm_means.first().ok_or(Error::EmptyClass)?.len();
    let mut models = Vec::with_capacity(arm_means.len());
    for (i, means) in arm_means.iter().enumerate() {
        if means.len() != k {
            return Err(Error::SpaceMismatch("mean vectors of different lengths".into()));
        }
        for &m in means {
            check_mean(m)?;
        }
        models.push(Model::new(format!("m{i}"), means.iter().map(|&m| raw::rad(m).to_vec()).collect())?);
    }
    ModelClass::new(
        FiniteSpace::indexed("a", k)?,
        FiniteSpace::signs(),
        models,
        LossSpec::RewardBased { reward: sign_reward(k) },
        vec![],
    )
}

/// `K` models; model `k` has mean 1 on arm `k` and -1 elsewhere.
pub fn mab_canonical(k: usize) -> Result<ModelClass> {
    let means: Vec<Vec<f64>> =
        (0..k).map(|i| (0..k).map(|a| if a == i { 1.0 } else { -1.0 }).collect()).collect();
    mab_class(&means)
}

/// Contextual bandit class with its construction metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContextualBandit {
    pub class: ModelClass,
    pub nx: usize,
    pub na: usize,
    /// `fs[i][x][a]`.
    pub fs: Vec<Vec<Vec<f64>>>,
    pub nus: Vec<Vec<f64>>,
    /// `(ν index, f index)` of each model.
    pub model_params: Vec<(usize, usize)>,
}

impl ContextualBandit {
    /// Action of policy `pi` at context `x`.
    pub fn action(&self, pi: usize, x: usize) -> usize {
        policy_action(pi, x, self.na)
    }

    /// Models whose reward function is `fs[f]`.
    pub fn models_with_f(&self, f: usize) -> Vec<usize> {
        (0..self.model_params.len()).filter(|&m| self.model_params[m].1 == f).collect()
    }

    /// Greedy policy of reward function `f`, lowest action on ties.
    pub fn greedy_policy(&self, f: usize) -> usize {
        let mut pi = 0;
        let mut base = 1;
        for x in 0..self.nx {
            let a = super::argmax(&self.fs[f][x]);
            pi += a * base;
            base *= self.na;
        }
        pi
    }
}

pub fn policy_action(pi: usize, x: usize, na: usize) -> usize {
    (pi / na.pow(x as u32)) % na
}

/// Policies are all maps `X -> A`, indexed in base `|A|` with context 0 as
/// the least significant digit. `Z = X × A × {-1,+1}`.
pub fn contextual_bandit_class(
    nx: usize,
    na: usize,
    fs: &[Vec<Vec<f64>>],
    nus: &[Vec<f64>],
    cap: usize,
) -> Result<ContextualBandit> {
    let n_pol = (na as f64).powi(nx as i32);
    if n_pol > cap as f64 {
        return Err(Error::InstanceTooLarge(format!("|A|^|X| = {n_pol} exceeds cap {cap}")));
    }
    let n_pol = n_pol as usize;
    for f in fs {
        if f.len() != nx || f.iter().any(|r| r.len() != na) {
            return Err(Error::SpaceMismatch("reward function shape".into()));
        }
        for &v in f.iter().flatten() {
            check_mean(v)?;
        }
    }
    let nz = nx * na * 2;
    let mut labels = Vec::with_capacity(nz);
    for x in 0..nx {
        for a in 0..na {
            labels.push(format!("x{x}a{a}-"));
            labels.push(format!("x{x}a{a}+"));
        }
    }
    let mut models = Vec::new();
    let mut params = Vec::new();
    for (i, nu) in nus.iter().enumerate() {
        let nu = crate::prob::normalize_mass(nu.clone())?;
        if nu.len() != nx {
            return Err(Error::SpaceMismatch("context distribution length".into()));
        }
        for (j, f) in fs.iter().enumerate() {
            let dists = (0..n_pol)
                .map(|pi| {
                    let mut d = vec![0.0; nz];
                    for x in 0..nx {
                        let a = policy_action(pi, x, na);
                        let r = raw::rad(f[x][a]);
                        let base = (x * na + a) * 2;
                        d[base] += nu[x] * r[0];
                        d[base + 1] += nu[x] * r[1];
                    }
                    d
                })
                .collect();
            models.push(Model::new(format!("nu{i}_f{j}"), dists)?);
            params.push((i, j));
        }
    }
    let reward = RewardFn { values: (0..nz).map(|z| vec![(z % 2) as f64; n_pol]).collect() };
    let pol_labels = (0..n_pol).map(|pi| {
        let acts: Vec<String> = (0..nx).map(|x| policy_action(pi, x, na).to_string()).collect();
        format!("pi[{}]", acts.join(","))
    });
    let class = ModelClass::new(
        FiniteSpace::new(pol_labels)?,
        FiniteSpace::new(labels)?,
        models,
        LossSpec::RewardBased { reward },
        vec![],
    )?;
    Ok(ContextualBandit { class, nx, na, fs: fs.to_vec(), nus: nus.to_vec(), model_params: params })
}

/// Which decisions a parity class offers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityDecisions {
    /// Every Boolean map `X -> {-1,+1}`.
    All,
    /// Only the parity functions.
    Parities,
}

#[derive(Clone, Debug)]
pub struct ParityInstance {
    pub class: ModelClass,
    /// Covariate law `μ_λ`, reference `y = +1` at `x = 0`, uniform elsewhere.
    pub reference: Model,
    pub d: usize,
    pub lambda: f64,
}

/// `(-1)^{Σ_{i∈S} x_i}` with `S` and `x` given as bit masks.
pub fn parity(s: usize, x: usize) -> f64 {
    if (s & x).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Parity learning under `μ_λ = (1-λ)δ_0 + λ Unif(X \ {0})`. `Z = X × {-1,+1}`
/// with `z = 2x + [y = +1]`. A decision `g` in the `All` family is a bit
/// mask whose bit `x` is set when `g(x) = -1`.
pub fn parity_class(d: usize, lambda: f64, decisions: ParityDecisions, cap: usize) -> Result<ParityInstance> {
    if d < 1 {
        return Err(Error::Range("parity dimension must be at least 1".into()));
    }
    if !(0.0..=0.5).contains(&lambda) {
        return Err(Error::Range(format!("lambda {lambda} outside [0, 1/2]")));
    }
    let nx = 1usize << d;
    let nz = 2 * nx;
    if nz > cap {
        return Err(Error::InstanceTooLarge(format!("|Z| = {nz} exceeds cap {cap}")));
    }
    let mu: Vec<f64> =
        (0..nx).map(|x| if x == 0 { 1.0 - lambda } else { lambda / (nx - 1) as f64 }).collect();
    let funcs: Vec<Vec<f64>> = match decisions {
        ParityDecisions::All => {
            if d >= 6 || (1usize << nx) > cap {
                return Err(Error::InstanceTooLarge(format!("2^(2^{d}) Boolean maps exceed cap {cap}")));
            }
            (0..1usize << nx)
                .map(|g| (0..nx).map(|x| if (g >> x) & 1 == 1 { -1.0 } else { 1.0 }).collect())
                .collect()
        }
        ParityDecisions::Parities => (0..nx).map(|s| (0..nx).map(|x| parity(s, x)).collect()).collect(),
    };
    let np = funcs.len();
    let mut models = Vec::with_capacity(nx);
    let mut table = Vec::with_capacity(nx);
    for s in 0..nx {
        let mut dist = vec![0.0; nz];
        for x in 0..nx {
            let y_plus = parity(s, x) > 0.0;
            dist[2 * x + usize::from(y_plus)] += mu[x];
        }
        models.push(Model::statistical(format!("S{s}"), dist, np)?);
        table.push(
            funcs
                .iter()
                .map(|g| (0..nx).filter(|&x| g[x] != parity(s, x)).map(|x| mu[x]).sum())
                .collect(),
        );
    }
    let mut rdist = vec![0.0; nz];
    rdist[1] = mu[0];
    for x in 1..nx {
        rdist[2 * x] = mu[x] / 2.0;
        rdist[2 * x + 1] = mu[x] / 2.0;
    }
    let reference = Model::statistical("reference", rdist, np)?;
    let labels: Vec<String> = (0..nx).flat_map(|x| [format!("x{x}-"), format!("x{x}+")]).collect();
    let class = ModelClass::new(
        FiniteSpace::indexed("g", np)?,
        FiniteSpace::new(labels)?,
        models,
        LossSpec::MetricBased { table, metric: None },
        vec![],
    )?;
    Ok(ParityInstance { class, reference, d, lambda })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Linear models `(ν, θ)` with `y ∼ rad(⟨x,θ⟩)`; decisions are `θ̂` in the
/// grid and the loss is `E_{x∼ν}|⟨x, θ̂ - θ⟩|`.
pub fn linear_model_class(covariates: &[Vec<f64>], nus: &[Vec<f64>], theta_grid: &[Vec<f64>]) -> Result<ModelClass> {
    for x in covariates {
        if norm2(x) > 1.0 + 1e-12 {
            return Err(Error::Range("covariate outside the unit ball".into()));
        }
    }
    for t in theta_grid {
        if norm2(t) > 1.0 + 1e-12 {
            return Err(Error::Range("parameter outside the unit ball".into()));
        }
    }
    let nx = covariates.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut models = Vec::new();
    let mut table = Vec::new();
    for (i, nu) in nus.iter().enumerate() {
        let nu = crate::prob::normalize_mass(nu.clone())?;
        if nu.len() != nx {
            return Err(Error::SpaceMismatch("covariate distribution length".into()));
        }
        for (j, th) in theta_grid.iter().enumerate() {
            let mut dist = vec![0.0; 2 * nx];
            for x in 0..nx {
                let r = raw::rad(dot(&covariates[x], th).clamp(-1.0, 1.0));
                dist[2 * x] = nu[x] * r[0];
                dist[2 * x + 1] = nu[x] * r[1];
            }
            models.push(Model::statistical(format!("nu{i}_theta{j}"), dist, theta_grid.len())?);
            table.push(
                theta_grid
                    .iter()
                    .map(|hat| {
                        (0..nx)
                            .map(|x| {
                                let diff: Vec<f64> = hat.iter().zip(th).map(|(a, b)| a - b).collect();
                                nu[x] * dot(&covariates[x], &diff).abs()
                            })
                            .sum()
                    })
                    .collect(),
            );
        }
    }
    let labels: Vec<String> = (0..nx).flat_map(|x| [format!("x{x}-"), format!("x{x}+")]).collect();
    ModelClass::new(
        FiniteSpace::indexed("theta", theta_grid.len())?,
        FiniteSpace::new(labels)?,
        models,
        LossSpec::MetricBased { table, metric: None },
        vec![],
    )
}

/// Well-specified regression instance with its metadata.
#[derive(Clone, Debug)]
pub struct Regression {
    pub class: ModelClass,
    pub fs: Vec<Vec<f64>>,
    pub nus: Vec<Vec<f64>>,
    pub model_params: Vec<(usize, usize)>,
}

/// Models `(ν, f)` with `y ∼ rad(f(x))`, decisions `f̂ ∈ F`, reward
/// `1 - (y - f̂(x))²/4`, so that `L = E_x (f̂(x) - f(x))²/4`.
pub fn regression_class(fs: &[Vec<f64>], nus: &[Vec<f64>]) -> Result<Regression> {
    let nx = fs.first().ok_or(Error::EmptyClass)?.len();
    for &v in fs.iter().flatten() {
        check_mean(v)?;
    }
    let nf = fs.len();
    let mut reward = vec![vec![0.0; nf]; 2 * nx];
    for x in 0..nx {
        for (k, f) in fs.iter().enumerate() {
            reward[2 * x][k] = 1.0 - (-1.0 - f[x]).powi(2) / 4.0;
            reward[2 * x + 1][k] = 1.0 - (1.0 - f[x]).powi(2) / 4.0;
        }
    }
    let mut models = Vec::new();
    let mut params = Vec::new();
    for (i, nu) in nus.iter().enumerate() {
        let nu = crate::prob::normalize_mass(nu.clone())?;
        if nu.len() != nx {
            return Err(Error::SpaceMismatch("covariate distribution length".into()));
        }
        for (j, f) in fs.iter().enumerate() {
            let mut dist = vec![0.0; 2 * nx];
            for x in 0..nx {
                let r = raw::rad(f[x]);
                dist[2 * x] = nu[x] * r[0];
                dist[2 * x + 1] = nu[x] * r[1];
            }
            models.push(Model::statistical(format!("nu{i}_f{j}"), dist, nf)?);
            params.push((i, j));
        }
    }
    let labels: Vec<String> = (0..nx).flat_map(|x| [format!("x{x}-"), format!("x{x}+")]).collect();
    let class = ModelClass::new(
        FiniteSpace::indexed("f", nf)?,
        FiniteSpace::new(labels)?,
        models,
        LossSpec::RewardBased { reward: RewardFn::new(reward)? },
        vec![],
    )?;
    Ok(Regression { class, fs: fs.to_vec(), nus: nus.to_vec(), model_params: params })
}

/// Statistical class of distributions; decision `b` names block `b`.
pub fn hypothesis_selection(dists: &[Vec<f64>], blocks: Vec<Vec<usize>>) -> Result<ModelClass> {
    let nz = dists.first().ok_or(Error::EmptyClass)?.len();
    let nb = blocks.len();
    let models = dists
        .iter()
        .enumerate()
        .map(|(i, d)| Model::statistical(format!("D{i}"), d.clone(), nb))
        .collect::<Result<Vec<_>>>()?;
    ModelClass::new(
        FiniteSpace::indexed("block", nb)?,
        FiniteSpace::indexed("z", nz)?,
        models,
        LossSpec::Indicator { blocks },
        vec![],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_mab() {
        let c = mab_canonical(3).unwrap();
        let opts: Vec<usize> = (0..3).map(|m| c.optimal_decision(m)).collect();
        assert_eq!(opts, vec![0, 1, 2]);
        assert!((c.loss(0, 1) - 1.0).abs() < 1e-15);
        let one = mab_canonical(1).unwrap();
        assert_eq!(one.loss(0, 0), 0.0);
        assert!(mab_class(&[vec![1.5]]).is_err());
    }

    #[test]
    fn contextual_counts_and_reduction() {
        let f = vec![vec![vec![0.2, -0.4], vec![0.5, 0.1]]];
        let cb = contextual_bandit_class(2, 2, &f, &[vec![0.5, 0.5]], 4096).unwrap();
        assert_eq!(cb.class.n_decisions(), 4);
        let g = cb.greedy_policy(0);
        assert!(cb.class.loss(0, g).abs() < 1e-15);

        let f1 = vec![vec![vec![0.6, -0.2, 0.1]]];
        let cb1 = contextual_bandit_class(1, 3, &f1, &[vec![1.0]], 4096).unwrap();
        let mab = mab_class(&[vec![0.6, -0.2, 0.1]]).unwrap();
        for pi in 0..3 {
            assert!((cb1.class.loss(0, pi) - mab.loss(0, pi)).abs() < 1e-15);
        }
        let big = vec![vec![vec![0.0; 4]; 7]];
        assert!(matches!(
            contextual_bandit_class(7, 4, &big, &[[1.0; 7].iter().map(|v| v / 7.0).collect()], 4096),
            Err(Error::InstanceTooLarge(_))
        ));
    }

    #[test]
    fn parity_counts() {
        let p = parity_class(2, 0.5, ParityDecisions::All, 4096).unwrap();
        assert_eq!(p.class.len(), 4);
        assert_eq!(p.class.n_decisions(), 16);
        let z = parity_class(2, 0.0, ParityDecisions::Parities, 4096).unwrap();
        for m in 1..4 {
            assert_eq!(z.class.model(m).dists, z.class.model(0).dists);
        }
        assert!(matches!(
            parity_class(4, 0.5, ParityDecisions::All, 4096),
            Err(Error::InstanceTooLarge(_))
        ));
    }

    #[test]
    fn parity_no_shared_good_decision() {
        let lam = 0.5;
        let p = parity_class(3, lam, ParityDecisions::All, 4096).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                if a == b {
                    continue;
                }
                for g in 0..p.class.n_decisions() {
                    assert!(p.class.loss(a, g) > lam / 8.0 || p.class.loss(b, g) > lam / 8.0);
                }
            }
        }
    }

    #[test]
    fn linear_examples() {
        let c = linear_model_class(&[vec![1.0]], &[vec![1.0]], &[vec![0.5], vec![0.0]]).unwrap();
        // Model 0 has θ = 0.5; decision 1 is θ̂ = 0.
        assert!((c.loss(0, 1) - 0.5).abs() < 1e-15);
        assert_eq!(c.loss(0, 0), 0.0);
        let s = 0.5f64.sqrt();
        let two = linear_model_class(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[vec![0.5, 0.5]],
            &[vec![s, 0.0], vec![0.0, s]],
        )
        .unwrap();
        // E|⟨x, θ̂-θ⟩| = ½|s| + ½|s| = s.
        assert!((two.loss(0, 1) - s).abs() < 1e-15);
        assert!(linear_model_class(&[vec![2.0]], &[vec![1.0]], &[vec![0.0]]).is_err());
    }

    #[test]
    fn regression_and_hypotheses() {
        let r = regression_class(&[vec![0.5, -0.5], vec![0.1, 0.2]], &[vec![0.5, 0.5]]).unwrap();
        assert_eq!(r.class.len(), 2);
        let expect = 0.5 * (0.4f64.powi(2) + 0.7f64.powi(2)) / 4.0;
        assert!((r.class.loss(0, 1) - expect).abs() < 1e-12);

        let one = hypothesis_selection(&[vec![0.5, 0.5], vec![0.2, 0.8]], vec![vec![0, 1]]).unwrap();
        assert!(one.loss_table().iter().flatten().all(|v| *v == 0.0));
        let two = hypothesis_selection(&[vec![0.5, 0.5], vec![0.2, 0.8]], vec![vec![0], vec![1]]).unwrap();
        assert_eq!(two.loss_table(), &[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(
            hypothesis_selection(&[vec![1.0]], vec![vec![0], vec![]]),
            Err(Error::InvalidPartition(_))
        ));
    }
}
