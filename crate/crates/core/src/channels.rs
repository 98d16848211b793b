//! α-DP channels, binary channels and the strong data-processing
//! decomposition.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{self, raw, FiniteDist, FiniteSpace, ScalarFn};

/// Row-stochastic kernel `Z -> Δ(O)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    input: FiniteSpace,
    output: FiniteSpace,
    kernel: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(input: FiniteSpace, output: FiniteSpace, kernel: Vec<Vec<f64>>) -> Result<Self> {
        if kernel.len() != input.len() {
            return Err(Error::SpaceMismatch(format!(
                "{} kernel rows for an input space of size {}",
                kernel.len(),
                input.len()
            )));
        }
        let mut rows = Vec::with_capacity(kernel.len());
        for row in kernel {
            if row.len() != output.len() {
                return Err(Error::SpaceMismatch("kernel row length != |O|".into()));
            }
            rows.push(prob::normalize_mass(row)?);
        }
        Ok(Self { input, output, kernel: rows })
    }

    pub fn input(&self) -> &FiniteSpace {
        &self.input
    }

    pub fn output(&self) -> &FiniteSpace {
        &self.output
    }

    pub fn kernel(&self) -> &[Vec<f64>] {
        &self.kernel
    }

    /// `Q(o|z)`.
    pub fn prob(&self, z: usize, o: usize) -> f64 {
        self.kernel[z][o]
    }

    /// Mutable access for fault-injection tests.
    #[doc(hidden)]
    pub fn kernel_mut(&mut self) -> &mut Vec<Vec<f64>> {
        &mut self.kernel
    }
}

/// `c_α = 1 - e^{-α}`.
pub fn c_alpha(alpha: f64) -> f64 {
    1.0 - (-alpha).exp()
}

/// Largest per-outcome log likelihood ratio; `+inf` if a column mixes zero
/// and positive entries.
pub fn dp_level(q: &Channel) -> f64 {
    let mut level: f64 = 0.0;
    for o in 0..q.output.len() {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for row in &q.kernel {
            lo = lo.min(row[o]);
            hi = hi.max(row[o]);
        }
        if hi == 0.0 {
            continue;
        }
        if lo == 0.0 {
            return f64::INFINITY;
        }
        level = level.max(hi.ln() - lo.ln());
    }
    level
}

/// `Q(±1|z) = (1 ± c_α ℓ(z))/2` over `O = {-1,+1}`.
pub fn binary_channel(l: &ScalarFn, alpha: f64) -> Result<Channel> {
    if !(alpha > 0.0) {
        return Err(Error::Range(format!("alpha = {alpha} must be positive")));
    }
    let c = c_alpha(alpha);
    let kernel = l.values().iter().map(|v| raw::rad(c * v).to_vec()).collect();
    Ok(Channel { input: l.space().clone(), output: FiniteSpace::signs(), kernel })
}

/// Channel whose output copies the input.
pub fn identity_channel(space: &FiniteSpace) -> Channel {
    let n = space.len();
    let kernel = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect();
    Channel { input: space.clone(), output: space.clone(), kernel }
}

/// `(Q∘P)(o) = Σ_z P(z) Q(o|z)`.
pub fn apply(q: &Channel, p: &FiniteDist) -> Result<FiniteDist> {
    q.input.check_same(p.space())?;
    FiniteDist::new(q.output.clone(), apply_raw(&q.kernel, p.mass()))
}

pub fn apply_raw(kernel: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    let no = kernel.first().map_or(0, Vec::len);
    let mut out = vec![0.0; no];
    for (row, &pz) in kernel.iter().zip(p) {
        if pz == 0.0 {
            continue;
        }
        for (o, &k) in out.iter_mut().zip(row) {
            *o += pz * k;
        }
    }
    out
}

/// Decomposition `Q(o|z) = floor(o)(1 + (e^α-1) ℓ_o(z))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpiDecomposition {
    /// Output indices kept (columns with positive mass).
    pub outcomes: Vec<usize>,
    /// `floor(o)` for each kept outcome.
    pub floor: Vec<f64>,
    /// Normalized floor, indexed like `outcomes`.
    pub base: Vec<f64>,
    /// `ℓ_o` for each kept outcome.
    pub fns: Vec<ScalarFn>,
    pub alpha: f64,
}

impl SdpiDecomposition {
    /// Reconstructed kernel entry `Q(o|z)`; zero for dropped columns.
    pub fn reconstruct(&self, z: usize, o: usize) -> f64 {
        match self.outcomes.iter().position(|&k| k == o) {
            Some(i) => self.floor[i] * (1.0 + self.alpha.exp_m1() * self.fns[i].values()[z]),
            None => 0.0,
        }
    }
}

pub fn sdpi_decompose(q: &Channel, alpha: f64) -> Result<SdpiDecomposition> {
    let level = dp_level(q);
    if level > alpha + 1e-12 {
        return Err(Error::NotDp { alpha, level });
    }
    let em1 = alpha.exp_m1();
    let mut outcomes = Vec::new();
    let mut floor = Vec::new();
    let mut fns = Vec::new();
    for o in 0..q.output.len() {
        let col: Vec<f64> = q.kernel.iter().map(|r| r[o]).collect();
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        if lo <= 0.0 {
            // dp_level finite implies the whole column is zero.
            continue;
        }
        let vals: Vec<f64> = col.iter().map(|v| ((v / lo - 1.0) / em1).clamp(0.0, 1.0)).collect();
        outcomes.push(o);
        floor.push(lo);
        fns.push(ScalarFn::new(q.input.clone(), vals)?);
    }
    let total: f64 = floor.iter().sum();
    let base = floor.iter().map(|f| f / total).collect();
    Ok(SdpiDecomposition { outcomes, floor, base, fns, alpha })
}

/// Quantities on both sides of the strong data-processing inequalities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpiReport {
    /// `E_{ℓ∼base} D_ℓ²(P1,P2)`.
    pub expected_l_div_sq: f64,
    pub hellinger_sq: f64,
    pub kl: f64,
    pub chi_sq: f64,
    /// `(e^α-1)²`.
    pub factor: f64,
    /// `Σ_o floor(o) D_{ℓ_o}²`, the unnormalized expectation.
    pub floor_weighted_l_div_sq: f64,
    pub alpha: f64,
}

impl SdpiReport {
    /// Lower Hellinger bound with constant `8e^{2α}`.
    pub fn hellinger_lower(&self) -> f64 {
        self.factor / (8.0 * (2.0 * self.alpha).exp()) * self.expected_l_div_sq
    }

    /// Lower Hellinger bound with constant `8e^α` on the floor-weighted sum;
    /// the sharper form of [`Self::hellinger_lower`].
    pub fn hellinger_lower_sharp(&self) -> f64 {
        self.factor / (8.0 * self.alpha.exp()) * self.floor_weighted_l_div_sq
    }

    pub fn hellinger_upper(&self) -> f64 {
        self.factor / 8.0 * self.expected_l_div_sq
    }

    pub fn chi_sq_upper(&self) -> f64 {
        self.factor * self.expected_l_div_sq
    }

    /// Smallest slack over both inequality chains (negative means violated).
    pub fn min_slack(&self) -> f64 {
        [
            self.hellinger_sq - self.hellinger_lower(),
            self.hellinger_sq - self.hellinger_lower_sharp(),
            self.hellinger_upper() - self.hellinger_sq,
            self.chi_sq - self.kl,
            self.chi_sq_upper() - self.chi_sq,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

pub fn sdpi_check(q: &Channel, p1: &FiniteDist, p2: &FiniteDist, alpha: f64) -> Result<SdpiReport> {
    q.input.check_same(p1.space())?;
    q.input.check_same(p2.space())?;
    let dec = sdpi_decompose(q, alpha)?;
    let mut expected = 0.0;
    let mut weighted = 0.0;
    for ((b, f), l) in dec.base.iter().zip(&dec.floor).zip(&dec.fns) {
        let d = raw::l_divergence(p1.mass(), p2.mass(), l.values());
        expected += b * d * d;
        weighted += f * d * d;
    }
    let o1 = apply(q, p1)?;
    let o2 = apply(q, p2)?;
    Ok(SdpiReport {
        expected_l_div_sq: expected,
        hellinger_sq: raw::hellinger_sq(o1.mass(), o2.mass()),
        kl: prob::kl(&o1, &o2)?,
        chi_sq: prob::chi_sq(&o1, &o2)?,
        factor: alpha.exp_m1().powi(2),
        floor_weighted_l_div_sq: weighted,
        alpha,
    })
}

/// Random α-DP channel: component `k` is chosen with weight `w_k` and then
/// either a binary channel over a random `ℓ_k` or a uniform outcome is
/// emitted. The output label records the component. Mixtures of α-DP
/// channels are α-DP, so no rejection is needed.
pub fn random_dp_channel<R: Rng + ?Sized>(
    rng: &mut R,
    input: &FiniteSpace,
    n_binary: usize,
    n_uniform: usize,
    alpha: f64,
) -> Result<Channel> {
    let nz = input.len();
    let c = c_alpha(alpha);
    let comps = n_binary + usize::from(n_uniform > 0);
    let mut w: Vec<f64> = (0..comps).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let mut labels = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for k in 0..n_binary {
        let l: Vec<f64> = (0..nz).map(|_| rng.random::<f64>()).collect();
        labels.push(format!("b{k}-"));
        cols.push(l.iter().map(|v| w[k] * (1.0 - c * v) / 2.0).collect());
        labels.push(format!("b{k}+"));
        cols.push(l.iter().map(|v| w[k] * (1.0 + c * v) / 2.0).collect());
    }
    for u in 0..n_uniform {
        labels.push(format!("u{u}"));
        cols.push(vec![w[n_binary] / n_uniform as f64; nz]);
    }
    let kernel = (0..nz).map(|z| cols.iter().map(|col| col[z]).collect()).collect();
    Channel::new(input.clone(), FiniteSpace::new(labels)?, kernel)
}
