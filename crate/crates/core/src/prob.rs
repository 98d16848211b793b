//! Finite probability spaces and divergences.
//!
//! Distributions are plain mass vectors tied to a labelled [`FiniteSpace`].
//! The `raw` submodule holds slice-level versions of every divergence for
//! hot loops that have already checked spaces.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest deviation of a mass vector's sum from 1 that is silently
/// renormalized.
pub const NORMALIZE_TOL: f64 = 1e-9;

/// Ordered set of distinct labels. Indexing is by position.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct FiniteSpace {
    labels: Arc<[String]>,
}

impl FiniteSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidDist("empty space".into()));
        }
        let mut sorted: Vec<&String> = labels.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDist("duplicate labels".into()));
        }
        Ok(Self { labels: labels.into() })
    }

    /// Space `prefix0, prefix1, ...` of size `n`.
    pub fn indexed(prefix: &str, n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| format!("{prefix}{i}")))
    }

    /// The binary outcome space `{-1, +1}`, in that order.
    pub fn signs() -> Self {
        Self::new(["-1", "+1"]).expect("static labels")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn check_same(&self, other: &FiniteSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch(format!(
                "spaces of size {} and {} differ",
                self.len(),
                other.len()
            )))
        }
    }
}

impl PartialEq for FiniteSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.labels, &other.labels) || self.labels == other.labels
    }
}

impl TryFrom<Vec<String>> for FiniteSpace {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FiniteSpace> for Vec<String> {
    fn from(s: FiniteSpace) -> Self {
        s.labels.to_vec()
    }
}

/// Probability vector over a [`FiniteSpace`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteDist {
    space: FiniteSpace,
    mass: Vec<f64>,
}

impl FiniteDist {
    /// Validates and, if the sum is within [`NORMALIZE_TOL`] of 1,
    /// renormalizes.
    pub fn new(space: FiniteSpace, mass: Vec<f64>) -> Result<Self> {
        let mass = normalize_mass(mass)?;
        if mass.len() != space.len() {
            return Err(Error::SpaceMismatch(format!(
                "{} masses for a space of size {}",
                mass.len(),
                space.len()
            )));
        }
        Ok(Self { space, mass })
    }

    pub fn point(space: FiniteSpace, i: usize) -> Self {
        let mut mass = vec![0.0; space.len()];
        mass[i] = 1.0;
        Self { space, mass }
    }

    pub fn uniform(space: FiniteSpace) -> Self {
        let n = space.len();
        Self { space, mass: vec![1.0 / n as f64; n] }
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn get(&self, i: usize) -> f64 {
        self.mass[i]
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `E[f]` for a vector of values indexed like the space.
    pub fn expect(&self, values: &[f64]) -> f64 {
        raw::dot(&self.mass, values)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.mass.len()).filter(|&i| self.mass[i] > 0.0).collect()
    }

    /// Convex combination of distributions on a shared space.
    pub fn mixture(weights: &[f64], dists: &[&FiniteDist]) -> Result<Self> {
        let first = dists.first().ok_or(Error::EmptyClass)?;
        let mut mass = vec![0.0; first.len()];
        for (&w, d) in weights.iter().zip(dists) {
            d.space.check_same(&first.space)?;
            for (m, &x) in mass.iter_mut().zip(&d.mass) {
                *m += w * x;
            }
        }
        Self::new(first.space.clone(), mass)
    }
}

/// Checks non-negativity and renormalizes sums within tolerance.
pub fn normalize_mass(mut mass: Vec<f64>) -> Result<Vec<f64>> {
    if mass.is_empty() {
        return Err(Error::InvalidDist("empty mass vector".into()));
    }
    for m in mass.iter_mut() {
        if !m.is_finite() || *m < -1e-12 {
            return Err(Error::InvalidDist(format!("entry {m} is negative or not finite")));
        }
        if *m < 0.0 {
            *m = 0.0;
        }
    }
    let s: f64 = mass.iter().sum();
    if (s - 1.0).abs() > NORMALIZE_TOL {
        return Err(Error::InvalidDist(format!("mass sums to {s}")));
    }
    for m in mass.iter_mut() {
        *m /= s;
    }
    Ok(mass)
}

/// Function `Z -> [0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarFn {
    space: FiniteSpace,
    values: Vec<f64>,
}

impl ScalarFn {
    pub fn new(space: FiniteSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::SpaceMismatch(format!(
                "{} values for a space of size {}",
                values.len(),
                space.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Range(format!("scalar function value {v} outside [0,1]")));
        }
        Ok(Self { space, values })
    }

    pub fn indicator(space: FiniteSpace, i: usize) -> Self {
        let mut values = vec![0.0; space.len()];
        values[i] = 1.0;
        Self { space, values }
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Non-empty list of scalar functions over one space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LDictionary {
    entries: Vec<ScalarFn>,
}

impl LDictionary {
    pub fn new(entries: Vec<ScalarFn>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::Config("empty dictionary".into()))?;
        for e in &entries {
            e.space.check_same(&first.space)?;
        }
        Ok(Self { entries })
    }

    /// Drops exact duplicates, keeping first occurrences.
    pub fn dedup(entries: Vec<ScalarFn>) -> Result<Self> {
        let mut kept: Vec<ScalarFn> = Vec::with_capacity(entries.len());
        for e in entries {
            if !kept.iter().any(|k| k.values == e.values) {
                kept.push(e);
            }
        }
        Self::new(kept)
    }

    pub fn entries(&self) -> &[ScalarFn] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> &ScalarFn {
        &self.entries[i]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.entries[0].space
    }
}

pub fn hellinger_sq(p: &FiniteDist, q: &FiniteDist) -> Result<f64> {
    p.space.check_same(&q.space)?;
    Ok(raw::hellinger_sq(&p.mass, &q.mass))
}

pub fn tv(p: &FiniteDist, q: &FiniteDist) -> Result<f64> {
    p.space.check_same(&q.space)?;
    Ok(raw::tv(&p.mass, &q.mass))
}

pub fn kl(p: &FiniteDist, q: &FiniteDist) -> Result<f64> {
    p.space.check_same(&q.space)?;
    check_abs_cont(&p.mass, &q.mass)?;
    Ok(raw::kl(&p.mass, &q.mass))
}

pub fn chi_sq(p: &FiniteDist, q: &FiniteDist) -> Result<f64> {
    p.space.check_same(&q.space)?;
    check_abs_cont(&p.mass, &q.mass)?;
    Ok(raw::chi_sq(&p.mass, &q.mass))
}

fn check_abs_cont(p: &[f64], q: &[f64]) -> Result<()> {
    match p.iter().zip(q).position(|(&a, &b)| a > 0.0 && b <= 0.0) {
        Some(i) => Err(Error::AbsoluteContinuity(format!(
            "P has mass {} at index {i} where Q has none",
            p[i]
        ))),
        None => Ok(()),
    }
}

pub fn l_divergence(p: &FiniteDist, q: &FiniteDist, l: &ScalarFn) -> Result<f64> {
    p.space.check_same(&q.space)?;
    p.space.check_same(&l.space)?;
    Ok(raw::l_divergence(&p.mass, &q.mass, &l.values))
}

/// `inf_{P'} D_H²((1-β)P + βP', Q)`.
pub fn huber_hellinger(p: &FiniteDist, q: &FiniteDist, beta: f64) -> Result<f64> {
    p.space.check_same(&q.space)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Range(format!("beta = {beta} outside [0,1]")));
    }
    Ok(raw::huber_hellinger(&p.mass, &q.mass, beta))
}

/// Distribution on `{-1,+1}` with the given mean.
pub fn rad(mean: f64) -> Result<FiniteDist> {
    if !(-1.0..=1.0).contains(&mean) {
        return Err(Error::Range(format!("rad mean {mean} outside [-1,1]")));
    }
    Ok(FiniteDist {
        space: FiniteSpace::signs(),
        mass: raw::rad(mean).to_vec(),
    })
}

pub mod raw {
    //! Slice-level divergences. Callers guarantee equal lengths.

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// `[P(-1), P(+1)]` for mean `m`.
    pub fn rad(m: f64) -> [f64; 2] {
        [(1.0 - m) / 2.0, (1.0 + m) / 2.0]
    }

    pub fn hellinger_sq(p: &[f64], q: &[f64]) -> f64 {
        let s: f64 = p
            .iter()
            .zip(q)
            .map(|(a, b)| {
                let d = a.sqrt() - b.sqrt();
                d * d
            })
            .sum();
        (0.5 * s).clamp(0.0, 1.0)
    }

    pub fn tv(p: &[f64], q: &[f64]) -> f64 {
        0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    pub fn kl(p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| if *b > 0.0 { a * (a / b).ln() } else { f64::INFINITY })
            .sum::<f64>()
            .max(0.0)
    }

    pub fn chi_sq(p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .map(|(a, b)| {
                if *b > 0.0 {
                    (a - b) * (a - b) / b
                } else if *a > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn l_divergence(p: &[f64], q: &[f64], l: &[f64]) -> f64 {
        p.iter().zip(q).zip(l).map(|((a, b), v)| (a - b) * v).sum::<f64>().abs()
    }

    /// Water-filling solution of the β-perturbed Hellinger problem.
    ///
    /// The optimal perturbed first argument is `m_o = max(a_o, s·q_o)` with
    /// `a = (1-β)p` and `s` chosen so that `Σ m = 1`. `s` is bracketed by
    /// bisection and then recomputed exactly on the active set.
    pub fn huber_hellinger(p: &[f64], q: &[f64], beta: f64) -> f64 {
        if beta <= 0.0 {
            return hellinger_sq(p, q);
        }
        if beta >= 1.0 || p == q {
            return 0.0;
        }
        let a: Vec<f64> = p.iter().map(|x| (1.0 - beta) * x).collect();
        let fill = |s: f64| -> f64 { a.iter().zip(q).map(|(ai, qi)| ai.max(s * qi)).sum() };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if fill(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut s = hi;
        // Exact refinement on the active set {o : s q_o > a_o}.
        let mut fixed = 0.0;
        let mut active_q = 0.0;
        for (ai, qi) in a.iter().zip(q) {
            if s * qi > *ai {
                active_q += qi;
            } else {
                fixed += ai;
            }
        }
        if active_q > 0.0 {
            let exact = (1.0 - fixed) / active_q;
            if (exact - s).abs() < 1e-6 {
                s = exact;
            }
        }
        let m: Vec<f64> = a.iter().zip(q).map(|(ai, qi)| ai.max(s * qi)).collect();
        let total: f64 = m.iter().sum();
        let aff: f64 = m.iter().zip(q).map(|(mi, qi)| (mi / total * qi).sqrt()).sum();
        (1.0 - aff).clamp(0.0, 1.0)
    }
}
