//! Random instances and independent reference computations for tests.
#![allow(dead_code)]

use pridec::models::{LossSpec, Model, ModelClass};
use pridec::prob::FiniteSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dirichlet(1,..,1) draw with every coordinate at least `floor`.
pub fn random_dist(r: &mut impl Rng, n: usize, floor: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    let free = 1.0 - floor * n as f64;
    e.iter().map(|x| floor + free * x / s).collect()
}

/// Class with random observation laws and a random loss table whose rows
/// have minimum zero.
pub fn random_class(r: &mut impl Rng, np: usize, nz: usize, nm: usize) -> ModelClass {
    let models: Vec<Model> = (0..nm)
        .map(|m| Model::new(format!("m{m}"), (0..np).map(|_| random_dist(r, nz, 0.02)).collect()).unwrap())
        .collect();
    let table: Vec<Vec<f64>> = (0..nm)
        .map(|_| {
            let row: Vec<f64> = (0..np).map(|_| r.random::<f64>()).collect();
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            row.iter().map(|v| v - lo).collect()
        })
        .collect();
    ModelClass::new(
        FiniteSpace::indexed("a", np).unwrap(),
        FiniteSpace::indexed("z", nz).unwrap(),
        models,
        LossSpec::MetricBased { table, metric: None },
        vec![],
    )
    .unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 - Σ √(p q)`.
pub fn hellinger_sq(p: &[f64], q: &[f64]) -> f64 {
    1.0 - p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum::<f64>()
}

/// `(E_P ℓ - E_Q ℓ)²`.
pub fn l_div_sq(p: &[f64], q: &[f64], l: &[f64]) -> f64 {
    let d: f64 = p.iter().zip(q).zip(l).map(|((a, b), v)| (a - b) * v).sum();
    d * d
}

/// Points of the simplex in `n` coordinates with step `1/res`.
pub fn grid(n: usize, res: usize) -> Vec<Vec<f64>> {
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, res: usize, out: &mut Vec<Vec<f64>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.iter().map(|&c| c as f64 / res as f64).collect());
            return;
        }
        for k in 0..=left {
            cur[i] = k;
            rec(i + 1, left - k, cur, res, out);
        }
    }
    let mut out = Vec::new();
    rec(0, res, &mut vec![0; n], res, &mut out);
    out
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
