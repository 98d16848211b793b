//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed. Arguments
//! that do not start with `-` filter criteria by id or name substring.

mod common;

use std::process::{Command, ExitCode};
use std::time::Instant;

use common::{dot, grid, hellinger_sq, l_div_sq, median, random_class, random_dist, rng};
use pridec::channels::{binary_channel, c_alpha, dp_level, random_dp_channel, sdpi_check};
use pridec::dec::{
    constrained_search, correlation_matrix, fractional_covering, halfspace_mc, offset_dec, solve_fixed_point_u,
    DecInstance, Divergence, Inner, Mode, SearchConfig, Variant,
};
use pridec::environments::{
    privacy_audit, run_with, AdversaryStrategy, EnvSpec, GqStrategy, RunOptions, RunReport,
};
use pridec::estimators::{EstRecord, Oracle, OracleSpec};
use pridec::learners::{Action, Algorithm, InfoSetStructure, LearnerConfig, LearnerSpec, Problem};
use pridec::models::{
    mab_canonical, mab_class, parity_class, LossSpec, Model, ModelClass, ParityDecisions, QueryModelClass,
};
use pridec::prob::{raw, FiniteDist, FiniteSpace, ScalarFn};
use rand::Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 17] = [
    ("01", "binary channels are alpha-DP", c01),
    ("02", "strong data-processing chains", c02),
    ("03", "beta-perturbed Hellinger vs grid", c03),
    ("04", "offset DEC LPs vs grid", c04),
    ("05", "constrained/offset sandwich", c05),
    ("06", "fractional covering of canonical MAB", c06),
    ("07", "parity correlations", c07),
    ("08", "fixed point U", c08),
    ("09", "half-space dictionary, stated constant", c09),
    ("09b", "half-space dictionary, constant 1/(2 pi)", c09b),
    ("10", "LDP-E2D risk and decay", c10),
    ("11", "brute-force risk bound", c11),
    ("12", "ExO+ achieved-certificate regret bound", c12),
    ("13", "estimation oracle records", c13),
    ("14", "SQ-E2D block recovery", c14),
    ("15", "privacy audit and fault injection", c15),
    ("16", "CSV determinism across thread counts", c16),
];

/// Criteria whose stated threshold does not hold mathematically. They still
/// run and print FAIL, but only fail the process under
/// `PRIDEC_STRICT_ACCEPTANCE=1` or if they unexpectedly pass.
const KNOWN_UNATTAINABLE: [&str; 1] = ["09"];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let strict = std::env::var("PRIDEC_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1");
    let (mut failed, mut known, mut surprise) = (Vec::new(), Vec::new(), Vec::new());
    let total = Instant::now();
    for (id, name, f) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|s| id.contains(s.as_str()) || name.contains(s.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id} {name}: {} ({:.2}s)", o.detail, t0.elapsed().as_secs_f64());
        let listed = KNOWN_UNATTAINABLE.contains(&id);
        match (o.pass, listed) {
            (false, true) => known.push(id),
            (false, false) => failed.push(id),
            (true, true) => surprise.push(id),
            (true, false) => {}
        }
    }
    println!(
        "acceptance: {} failed {:?}, {} known unattainable {:?}, {} unexpected pass {:?} in {:.1}s",
        failed.len(),
        failed,
        known.len(),
        known,
        surprise.len(),
        surprise,
        total.elapsed().as_secs_f64()
    );
    if failed.is_empty() && surprise.is_empty() && (known.is_empty() || !strict) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn c01() -> Outcome {
    let mut r = rng(1);
    let space = FiniteSpace::indexed("z", 6).unwrap();
    let (mut over, mut gap) = (f64::NEG_INFINITY, 0.0f64);
    for alpha in [0.1, 0.5, 1.0, 2.0] {
        for i in 0..100 {
            let mut l: Vec<f64> = (0..6).map(|_| r.random::<f64>()).collect();
            let attains = i % 2 == 0;
            if attains {
                l[i % 6] = 0.0;
                l[(i + 3) % 6] = 1.0;
            }
            let q = binary_channel(&ScalarFn::new(space.clone(), l).unwrap(), alpha).unwrap();
            let level = dp_level(&q);
            over = over.max(level - alpha);
            if attains {
                gap = gap.max((level - alpha).abs());
            }
        }
    }
    outcome(over <= 1e-12 && gap <= 1e-9, format!("max(level-alpha)={over:.2e}, max |level-alpha| when attained={gap:.2e}"))
}

fn c02() -> Outcome {
    let mut r = rng(2);
    let mut worst = f64::INFINITY;
    let mut not_dp = 0;
    for _ in 0..200 {
        let nz = r.random_range(2..=8);
        let nb = r.random_range(1..=3);
        let nu = r.random_range(0..=6 - 2 * nb);
        let alpha = [0.25, 0.5, 1.0, 2.0][r.random_range(0..4)];
        let space = FiniteSpace::indexed("z", nz).unwrap();
        let q = random_dp_channel(&mut r, &space, nb, nu, alpha).unwrap();
        if dp_level(&q) > alpha + 1e-12 {
            not_dp += 1;
            continue;
        }
        let p1 = FiniteDist::new(space.clone(), random_dist(&mut r, nz, 0.0)).unwrap();
        let p2 = FiniteDist::new(space, random_dist(&mut r, nz, 0.0)).unwrap();
        worst = worst.min(sdpi_check(&q, &p1, &p2, alpha).unwrap().min_slack());
    }
    outcome(not_dp == 0 && worst >= -1e-9, format!("min slack {worst:.3e}, channels failing audit {not_dp}/200"))
}

/// `min` over `P'` of `D_H²((1-β)P + βP', Q)`: a 1e-2 grid, then a 1e-4
/// grid on the box of half-width 1e-2 around the coarse minimizer.
fn huber_grid(p: &[f64], q: &[f64], beta: f64) -> f64 {
    let f = |x: f64, y: f64| {
        let z = 1.0 - x - y;
        let m = [(1.0 - beta) * p[0] + beta * x, (1.0 - beta) * p[1] + beta * y, (1.0 - beta) * p[2] + beta * z];
        hellinger_sq(&m, q)
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=100 {
        for j in 0..=(100 - i) {
            let (x, y) = (i as f64 / 100.0, j as f64 / 100.0);
            let v = f(x, y);
            if v < best.0 {
                best = (v, x, y);
            }
        }
    }
    let (cx, cy) = (best.1, best.2);
    let mut fine = best.0;
    for i in -100i32..=100 {
        for j in -100i32..=100 {
            let (x, y) = (cx + i as f64 * 1e-4, cy + j as f64 * 1e-4);
            if x >= 0.0 && y >= 0.0 && x + y <= 1.0 + 1e-12 {
                fine = fine.min(f(x, y.min(1.0 - x)));
            }
        }
    }
    fine
}

fn c03() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = random_dist(&mut r, 3, 0.0);
        let q = random_dist(&mut r, 3, 0.0);
        let beta = r.random::<f64>();
        let v = raw::huber_hellinger(&p, &q, beta);
        worst = worst.max((v - huber_grid(&p, &q, beta)).abs());
    }
    outcome(worst <= 2e-3, format!("max |water-filling - grid| = {worst:.2e} over 50 instances"))
}

/// Loss and divergence tables recomputed from the class.
fn tables(class: &ModelClass, reference: &Model, div: Divergence) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, usize) {
    let np = class.n_decisions();
    let nm = class.len();
    let loss: Vec<Vec<f64>> = (0..nm).map(|m| (0..np).map(|pi| class.loss(m, pi)).collect()).collect();
    let (nd, d) = match div {
        Divergence::Ldp => {
            let dict = class.dictionary();
            let d = (0..nm)
                .map(|m| {
                    (0..np)
                        .flat_map(|pi| {
                            dict.entries()
                                .iter()
                                .map(move |l| l_div_sq(class.model(m).dist(pi), reference.dist(pi), l.values()))
                        })
                        .collect()
                })
                .collect();
            (dict.len(), d)
        }
        Divergence::Hellinger => {
            (1, (0..nm).map(|m| (0..np).map(|pi| hellinger_sq(class.model(m).dist(pi), reference.dist(pi))).collect()).collect())
        }
        // Validated against its own grid oracle in criterion 03.
        Divergence::Huber { beta } => (
            1,
            (0..nm)
                .map(|m| (0..np).map(|pi| raw::huber_hellinger(class.model(m).dist(pi), reference.dist(pi), beta)).collect())
                .collect(),
        ),
    };
    (loss, d, nd)
}

/// Offset DEC by exhaustive search over the 0.05-step grids.
fn offset_grid(loss: &[Vec<f64>], div: &[Vec<f64>], nd: usize, gamma: f64, variant: Variant) -> f64 {
    let np = loss[0].len();
    let nj = div[0].len();
    let qs = grid(nj, 20);
    match variant {
        Variant::Pac => {
            let ps = grid(np, 20);
            qs.par_iter()
                .map(|q| {
                    let c: Vec<f64> = div.iter().map(|d| gamma * dot(q, d)).collect();
                    ps.iter()
                        .map(|p| loss.iter().zip(&c).map(|(l, c)| dot(p, l) - c).fold(f64::NEG_INFINITY, f64::max))
                        .fold(f64::INFINITY, f64::min)
                })
                .reduce(|| f64::INFINITY, f64::min)
        }
        Variant::Reg => qs
            .par_iter()
            .map(|q| {
                (0..loss.len())
                    .map(|m| (0..nj).map(|j| q[j] * (loss[m][j / nd] - gamma * div[m][j])).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .reduce(|| f64::INFINITY, f64::min),
    }
}

/// The 20 instances shared by criteria 04 and 05: shapes keep `|Π|·|dict|`
/// at most 6 so the grids stay exhaustive. The reference is a class member,
/// so every constrained feasible set is non-empty.
fn dec_instances() -> Vec<(ModelClass, Model)> {
    let shapes = [(1, 2), (1, 3), (2, 2), (2, 3), (3, 2)];
    let mut r = rng(4);
    (0..20)
        .map(|i| {
            let (np, nz) = shapes[i % shapes.len()];
            let nm = r.random_range(2..=4);
            let class = random_class(&mut r, np, nz, nm);
            let reference = class.model(i % nm).clone();
            (class, reference)
        })
        .collect()
}

fn c04() -> Outcome {
    let mut worst = 0.0f64;
    let mut below = 0.0f64;
    let mut checks = 0;
    for (i, (class, reference)) in dec_instances().iter().enumerate() {
        let gamma = [0.5, 1.0, 2.0][i % 3];
        let divs = [Divergence::Ldp, Divergence::Hellinger, Divergence::Huber { beta: 0.05 + 0.4 * (i as f64 / 20.0) }];
        for div in divs {
            let inst = DecInstance::from_class(class, reference, div).unwrap();
            let (loss, d, nd) = tables(class, reference, div);
            for variant in [Variant::Pac, Variant::Reg] {
                let lp = offset_dec(&inst, gamma, variant).unwrap().value;
                let g = offset_grid(&loss, &d, nd, gamma, variant);
                worst = worst.max((lp - g).abs());
                below = below.max(lp - g);
                checks += 1;
            }
        }
    }
    // Singletons: the reference is the model itself.
    let mut r = rng(40);
    let mut singleton_max = 0.0f64;
    for _ in 0..10 {
        let np = r.random_range(1..=3);
        let class = random_class(&mut r, np, 3, 1);
        let reference = class.model(0).clone();
        for div in [Divergence::Ldp, Divergence::Hellinger, Divergence::Huber { beta: 0.3 }] {
            let inst = DecInstance::from_class(&class, &reference, div).unwrap();
            for variant in [Variant::Pac, Variant::Reg] {
                singleton_max = singleton_max.max(offset_dec(&inst, 1.0, variant).unwrap().value.abs());
            }
        }
    }
    outcome(
        worst <= 0.02 && below <= 1e-9 && singleton_max == 0.0,
        format!("{checks} LP/grid pairs, max gap {worst:.2e} (LP above grid by {below:.1e}); singleton max |value| {singleton_max:e}"),
    )
}

fn c05() -> Outcome {
    let cfg = SearchConfig { grid_resolution: 20, exact_max_cells: 6, ..SearchConfig::default() };
    let mut worst = f64::INFINITY;
    let mut inexact = 0;
    let mut n = 0;
    for (class, reference) in dec_instances() {
        for div in [Divergence::Ldp, Divergence::Hellinger] {
            let inst = DecInstance::from_class(&class, &reference, div).unwrap();
            for eps in [0.1, 0.3, 0.6] {
                let c = constrained_search(&inst, eps * eps, Inner::Expected, &cfg).unwrap();
                if c.mode != Mode::ExactEnum {
                    inexact += 1;
                }
                let lower = offset_dec(&inst, 1.0 / (eps * eps), Variant::Pac).unwrap().value;
                let upper = [1.0, 4.0, 16.0, 64.0]
                    .iter()
                    .map(|&g| offset_dec(&inst, g, Variant::Pac).unwrap().value + g * eps * eps)
                    .fold(f64::INFINITY, f64::min);
                worst = worst.min(c.value - lower + 1e-6).min(upper + 1e-6 - c.value);
                n += 1;
            }
        }
    }
    outcome(worst >= 0.0 && inexact == 0, format!("{n} constrained values, min sandwich slack {worst:.3e}, non-exact {inexact}"))
}

fn c06() -> Outcome {
    let got: Vec<f64> = (2..=6).map(|k| fractional_covering(&mab_canonical(k).unwrap(), 0.5).unwrap().n_frac).collect();
    let pass = got.iter().zip(2..=6).all(|(v, k)| *v == k as f64);
    outcome(pass, format!("N_frac for K=2..6: {got:?}"))
}

fn c07() -> Outcome {
    let mut worst = 0.0f64;
    for d in [2usize, 3] {
        let lambda = 0.5;
        let inst = parity_class(d, lambda, ParityDecisions::Parities, 4096).unwrap();
        let rho = correlation_matrix(&inst.class, inst.reference.dist(0)).unwrap();
        let off = -lambda / ((1usize << d) as f64 - 1.0);
        for (i, row) in rho.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { lambda } else { off };
                worst = worst.max((v - want).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max deviation from (lambda, -lambda/(2^d-1)) = {worst:.2e}"))
}

fn c08() -> Outcome {
    let mut r = rng(8);
    let (mut res, mut excess) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..20 {
        let d = r.random_range(1..=4);
        let n = r.random_range(1..=6);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
                let norm = dot(&v, &v).sqrt().max(1e-3);
                let scale = r.random::<f64>() * 0.9 + 0.1;
                v.iter().map(|x| x / norm * scale).collect()
            })
            .collect();
        let probs = random_dist(&mut r, n, 0.01);
        let lambda0 = r.random::<f64>() * 0.5 + 0.05;
        let fp = solve_fixed_point_u(&points, &probs, lambda0).unwrap();
        res = res.max(if fp.converged { fp.residual } else { f64::INFINITY });
        excess = excess.max(fp.trace_expect - d as f64);
    }
    let lambda0 = 0.3;
    let s1 = solve_fixed_point_u(&[vec![1.0]], &[1.0], lambda0).unwrap();
    let e1 = (s1.u[0][0] - 1.0 / (1.0 + lambda0)).abs();
    let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    let s2 = solve_fixed_point_u(&pts, &[0.25; 4], lambda0).unwrap();
    let u = 2.0 / (1.0 + 2.0 * lambda0);
    let e2 = (s2.u[0][0] - u).abs().max((s2.u[1][1] - u).abs()).max(s2.u[0][1].abs()).max(s2.u[1][0].abs());
    outcome(
        res <= 1e-8 && excess <= 0.0 && e1 <= 1e-6 && e2 <= 1e-6,
        format!("max residual {res:.1e}, max E|Ux|-d {excess:.3}, closed forms off by {e1:.1e}/{e2:.1e}"),
    )
}

struct HalfspaceCase {
    mean: f64,
    stderr: f64,
    target: f64,
    exact: f64,
}

/// Ten random instances; `exact` is `E_w D_ℓ²` from the angle formula
/// `P(⟨u,w⟩ ≥ 0, ⟨v,w⟩ ≥ 0) = (π - θ)/(2π)`.
fn halfspace_cases() -> Vec<HalfspaceCase> {
    let mut r = rng(9);
    (0..10)
        .map(|i| {
            let nz = r.random_range(2..=6);
            let dim = r.random_range(1..=3);
            let f: Vec<Vec<f64>> = (0..nz)
                .map(|_| {
                    let v: Vec<f64> = (0..dim).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
                    let n = dot(&v, &v).sqrt();
                    if n > 1.0 {
                        v.iter().map(|x| x / n).collect()
                    } else {
                        v
                    }
                })
                .collect();
            let p = random_dist(&mut r, nz, 0.0);
            let q = random_dist(&mut r, nz, 0.0);
            let (mean, stderr) = halfspace_mc(&p, &q, &f, 100_000, 1000 + i).unwrap();
            let diff: Vec<f64> = (0..dim).map(|k| (0..nz).map(|z| (p[z] - q[z]) * f[z][k]).sum()).collect();
            let mut exact = 0.0;
            for a in 0..nz {
                for b in 0..nz {
                    let (na, nb) = (dot(&f[a], &f[a]).sqrt(), dot(&f[b], &f[b]).sqrt());
                    if na == 0.0 || nb == 0.0 {
                        continue;
                    }
                    let theta = (dot(&f[a], &f[b]) / (na * nb)).clamp(-1.0, 1.0).acos();
                    exact += (p[a] - q[a]) * (p[b] - q[b]) * na * nb * (std::f64::consts::PI - theta)
                        / (2.0 * std::f64::consts::PI);
                }
            }
            HalfspaceCase { mean, stderr, target: dot(&diff, &diff), exact }
        })
        .collect()
}

fn c09() -> Outcome {
    let cases = halfspace_cases();
    let ok = cases.iter().filter(|c| c.mean >= c.target - 3.0 * c.stderr).count();
    let worst = cases.iter().map(|c| c.mean / c.target).fold(f64::INFINITY, f64::min);
    let mc_ok = cases.iter().all(|c| (c.mean - c.exact).abs() <= 4.0 * c.stderr + 1e-12);
    outcome(
        ok == cases.len(),
        format!(
            "{ok}/10 instances satisfy mean >= |P[f]-Q[f]|^2 - 3se; min ratio mean/target {worst:.3}; \
             MC agrees with the exact expectation: {mc_ok}"
        ),
    )
}

fn c09b() -> Outcome {
    let cases = halfspace_cases();
    let c = 1.0 / (2.0 * std::f64::consts::PI);
    let ok = cases.iter().filter(|h| h.mean >= c * h.target - 3.0 * h.stderr).count();
    let exact_ok = cases.iter().all(|h| h.exact >= c * h.target - 1e-12);
    outcome(ok == cases.len() && exact_ok, format!("{ok}/10 by Monte Carlo, exact expectation bound holds: {exact_ok}"))
}

fn runs(spec: &LearnerSpec, env: impl Fn(u64) -> EnvSpec + Sync, seeds: u64) -> Vec<RunReport> {
    (0..seeds)
        .into_par_iter()
        .map(|s| run_with(spec, &env(s), s, RunOptions { replay: false, keep_transcript: false }).unwrap())
        .collect()
}

fn e2d_spec(t: usize) -> LearnerSpec {
    let class = mab_class(&[vec![0.8, -0.8], vec![-0.8, 0.8], vec![0.0, 0.9]]).unwrap();
    let mut cfg = LearnerConfig::new(Algorithm::LdpE2d, t, 0.1, 1.0);
    cfg.oracle = OracleSpec::Vovk { constant: 2.0 };
    LearnerSpec { config: cfg, problem: Problem::Class { class }, info: None }
}

fn c10() -> Outcome {
    let mut meds = Vec::new();
    let mut within = Vec::new();
    let mut audits = true;
    for t in [2048, 8192] {
        let reps = runs(&e2d_spec(t), |_| EnvSpec::Stationary { truth: 0 }, 50);
        within.push(reps.iter().filter(|r| r.risk <= r.bound).count());
        audits &= reps.iter().all(|r| r.audit.pass);
        meds.push(median(&mut reps.iter().map(|r| r.risk).collect::<Vec<_>>()));
    }
    let pass = within.iter().all(|&w| w >= 45) && meds[1] <= 0.6 * meds[0] && audits;
    outcome(
        pass,
        format!(
            "risk <= certificate in {}/50 (T=2048) and {}/50 (T=8192); median risk {:.4} -> {:.4} (ratio {:.2}); audits pass: {audits}",
            within[0],
            within[1],
            meds[0],
            meds[1],
            meds[1] / meds[0]
        ),
    )
}

fn brute_spec() -> LearnerSpec {
    let mut cfg = LearnerConfig::new(Algorithm::BruteForceDc, 6000, 0.05, 1.0);
    cfg.info_delta = 0.5;
    LearnerSpec { config: cfg, problem: Problem::Class { class: mab_canonical(3).unwrap() }, info: None }
}

fn c11() -> Outcome {
    let reps = runs(&brute_spec(), |_| EnvSpec::Stationary { truth: 1 }, 50);
    let s = &reps[0].stats;
    let (n, j) = (s["N"], s["J"]);
    let bound = 0.5 + 2.0 / c_alpha(1.0) * (2.0 * (2.0 * n / 0.05).ln() / j).sqrt();
    let ok = reps.iter().filter(|r| r.risk <= bound).count();
    let agree = reps.iter().all(|r| (r.bound - bound).abs() <= 1e-12);
    outcome(ok >= 45 && agree, format!("{ok}/50 within {bound:.4} (N={n}, J={j}); reported bound agrees: {agree}"))
}

fn exo_spec(t: usize) -> LearnerSpec {
    let class = mab_class(&[vec![0.6, -0.2], vec![0.2, -0.6], vec![-0.2, 0.6], vec![-0.6, 0.2]]).unwrap();
    let info = InfoSetStructure::explicit(vec![vec![0, 1], vec![2, 3]], vec![0, 1], None);
    let mut cfg = LearnerConfig::new(Algorithm::ExoPlus, t, 0.1, 1.0);
    cfg.gamma = Some(10.0);
    LearnerSpec { config: cfg, problem: Problem::Class { class }, info: Some(info) }
}

fn exo_env(_: u64) -> EnvSpec {
    EnvSpec::Adversarial { constraint: vec![0, 1], strategy: AdversaryStrategy::Random }
}

fn c12() -> Outcome {
    let t = 500;
    let reps = runs(&exo_spec(t), exo_env, 50);
    // E*_0 is the first set (anchor 0 is optimal for both A1 and A2); prior 1/2.
    let extra = 2.0 * 10.0 * (2f64.ln() + (1.0f64 / 0.1).ln());
    let ok = reps.iter().filter(|r| r.regret <= r.stats["sum_gamma_t"] + extra).count();
    let agree = reps.iter().all(|r| (r.bound - (r.stats["sum_gamma_t"] + extra)).abs() <= 1e-9);
    let mut regrets: Vec<f64> = reps.iter().map(|r| r.regret).collect();
    let mut bounds: Vec<f64> = reps.iter().map(|r| r.bound).collect();
    outcome(
        ok >= 45 && agree,
        format!(
            "{ok}/50 within bound; median regret {:.1} vs median bound {:.1}; reported bound agrees: {agree}",
            median(&mut regrets),
            median(&mut bounds)
        ),
    )
}

/// Cumulative error of one oracle over `n` rounds with uniform cells.
fn est_run(spec: &OracleSpec, class: &ModelClass, truth: usize, n: usize, seed: u64) -> EstRecord {
    let alpha = 1.0;
    let c = c_alpha(alpha);
    let mut r = rng(seed);
    let dict = class.dictionary();
    let nj = class.n_decisions() * dict.len();
    let q = vec![1.0 / nj as f64; nj];
    let mut oracle = Oracle::new(spec, class, n, alpha).unwrap();
    let mut rec = EstRecord::new(Oracle::bound(spec, class, n, 0.1, alpha));
    for _ in 0..n {
        rec.record(class.model(truth), &oracle.predict(), &q, dict);
        let j = r.random_range(0..nj);
        let (pi, l) = (j / dict.len(), dict.get(j % dict.len()).values());
        let dist = class.model(truth).dist(pi);
        let mut u = r.random::<f64>();
        let mut z = dist.len() - 1;
        for (k, w) in dist.iter().enumerate() {
            if u < *w {
                z = k;
                break;
            }
            u -= w;
        }
        let o = if r.random::<f64>() < (1.0 + c * l[z]) / 2.0 { 1.0 } else { -1.0 };
        oracle.step(pi, l, o).unwrap();
    }
    rec
}

fn c13() -> Outcome {
    let mab = mab_class(&[vec![0.5, -0.5], vec![-0.5, 0.5], vec![0.2, 0.2]]).unwrap();
    let stat = ModelClass::new(
        FiniteSpace::indexed("d", 1).unwrap(),
        FiniteSpace::indexed("z", 4).unwrap(),
        vec![
            Model::statistical("a", vec![0.4, 0.3, 0.2, 0.1], 1).unwrap(),
            Model::statistical("b", vec![0.1, 0.2, 0.3, 0.4], 1).unwrap(),
            Model::statistical("c", vec![0.25, 0.25, 0.25, 0.25], 1).unwrap(),
        ],
        LossSpec::MetricBased { table: vec![vec![0.0]; 3], metric: None },
        vec![],
    )
    .unwrap();
    let n = 2000;
    let spec = OracleSpec::Vovk { constant: 20.0 };
    let vovk: Vec<EstRecord> = (0..50u64).into_par_iter().map(|s| est_run(&spec, &mab, (s % 3) as usize, n, s)).collect();
    let spec = OracleSpec::Omd { constant: 20.0 };
    let omd: Vec<EstRecord> = (0..50u64).into_par_iter().map(|s| est_run(&spec, &stat, (s % 3) as usize, n, 500 + s)).collect();
    let v_ok = vovk.iter().filter(|r| r.within_bound()).count();
    let o_ok = omd.iter().filter(|r| r.within_bound()).count();
    let vmax = vovk.iter().map(|r| r.cumulative).fold(0.0, f64::max);
    let omax = omd.iter().map(|r| r.cumulative).fold(0.0, f64::max);
    outcome(
        v_ok >= 48 && o_ok >= 48,
        format!(
            "Vovk {v_ok}/50 (max {vmax:.2} vs {:.2}), OMD {o_ok}/50 (max {omax:.2} vs {:.2}), n={n}",
            vovk[0].bound, omd[0].bound
        ),
    )
}

fn sq_spec() -> LearnerSpec {
    let dists = vec![
        vec![0.7, 0.1, 0.1, 0.1],
        vec![0.6, 0.2, 0.1, 0.1],
        vec![0.1, 0.7, 0.1, 0.1],
        vec![0.2, 0.6, 0.1, 0.1],
        vec![0.1, 0.1, 0.7, 0.1],
        vec![0.1, 0.1, 0.6, 0.2],
        vec![0.1, 0.1, 0.1, 0.7],
        vec![0.1, 0.2, 0.1, 0.6],
    ];
    let blocks = vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]];
    let q = QueryModelClass::hypothesis_selection(&dists, &blocks).unwrap();
    let mut cfg = LearnerConfig::new(Algorithm::SqE2d, 1024, 0.1, 1.0);
    cfg.tau = Some(0.1);
    LearnerSpec { config: cfg, problem: Problem::Query { class: q }, info: None }
}

fn sq_env(s: u64) -> EnvSpec {
    EnvSpec::GqOracle { truth: (s % 8) as usize, tau: 0.1, strategy: GqStrategy::ReferencePull }
}

fn c14() -> Outcome {
    let reps = runs(&sq_spec(), sq_env, 50);
    // Indicator loss: risk is the output mass off the true block.
    let ok = reps.iter().filter(|r| r.risk < 0.5).count();
    outcome(ok >= 45, format!("correct block in {ok}/50 seeds"))
}

fn full(spec: &LearnerSpec, env: &EnvSpec, seed: u64) -> RunReport {
    run_with(spec, env, seed, RunOptions { replay: true, keep_transcript: true }).unwrap()
}

fn c15() -> Outcome {
    let mut cases: Vec<(LearnerSpec, EnvSpec)> = Vec::new();
    cases.push((e2d_spec(256), EnvSpec::Stationary { truth: 2 }));
    let mut b = brute_spec();
    b.config.horizon = 600;
    cases.push((b, EnvSpec::Stationary { truth: 0 }));
    cases.push((exo_spec(60), exo_env(0)));
    let mut q = sq_spec();
    q.config.horizon = 256;
    cases.push((q, sq_env(3)));
    let reports: Vec<RunReport> = cases
        .par_iter()
        .flat_map(|(spec, env)| (0..5u64).into_par_iter().map(move |s| full(spec, env, s)))
        .collect();
    let clean = reports.iter().filter(|r| r.audit.pass).count();

    // Fault 1: a channel at round 7 is swapped for a 2-DP one.
    let base = full(&e2d_spec(64), &EnvSpec::Stationary { truth: 0 }, 11);
    let mut t1 = base.transcript.clone().unwrap();
    let Action::Channel { channel, .. } = &mut t1.rounds[7].action else { panic!("E2D round 7 is a channel round") };
    let signs = FiniteSpace::signs();
    *channel = binary_channel(&ScalarFn::new(signs, vec![0.0, 1.0]).unwrap(), 2.0).unwrap();
    let r1 = privacy_audit(&t1, 1.0);
    let f1 = r1.first_failure_round() == Some(7) && r1.failures[0].kind == "dp_level";

    // Fault 2: the recorded decision of round 11 is altered.
    let mut t2 = base.transcript.unwrap();
    let Action::Channel { decision, .. } = &mut t2.rounds[11].action else { panic!("E2D round 11 is a channel round") };
    *decision = 1 - *decision;
    let r2 = privacy_audit(&t2, 1.0);
    let f2 = r2.first_failure_round() == Some(11) && r2.failures[0].kind == "replay";
    outcome(
        clean == reports.len() && f1 && f2,
        format!(
            "{clean}/{} learner transcripts pass; channel fault caught at {:?}, replay fault caught at {:?}",
            reports.len(),
            r1.first_failure_round(),
            r2.first_failure_round()
        ),
    )
}

fn run_cli(config: &std::path::Path, threads: usize, out: &std::path::Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_pridec"))
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("PRIDEC_THREADS", threads.to_string())
        .status()
        .expect("spawn pridec");
    assert!(status.success(), "pridec run failed on {}", config.display());
    std::fs::read(out).unwrap()
}

fn c16() -> Outcome {
    let dir = std::env::temp_dir().join(format!("pridec-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let configs = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut names = Vec::new();
    let mut same = true;
    for name in ["brute_mab.json", "huber_e2d.json", "sq_hypothesis.json", "exo_hybrid.json"] {
        let cfg = configs.join(name);
        let outs: Vec<Vec<u8>> = [1, 8, 1, 8]
            .iter()
            .enumerate()
            .map(|(i, &n)| run_cli(&cfg, n, &dir.join(format!("{name}.{i}.csv"))))
            .collect();
        same &= outs.windows(2).all(|w| w[0] == w[1]) && !outs[0].is_empty();
        names.push(name);
    }
    let _ = std::fs::remove_dir_all(&dir);
    outcome(same, format!("byte-identical CSV over PRIDEC_THREADS 1,8,1,8 for {names:?}"))
}
