//! Dense two-phase simplex with Bland's rule, plus a min-max game helper
//! over products of simplices.

use crate::error::{Error, Result};

/// Feasibility and optimality tolerance.
pub const TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// `minimize c·x` subject to `rows[i]·x (cmp) rhs[i]`, `x_j ≥ 0` unless
/// `free[j]`.
#[derive(Clone, Debug, Default)]
pub struct Lp {
    pub c: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub cmp: Vec<Cmp>,
    pub rhs: Vec<f64>,
    pub free: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Final reduced cost of each inequality row's slack (0 for equality
    /// rows); for a `≤` row of a minimization this is minus its dual price.
    pub slack_costs: Vec<f64>,
}

impl Lp {
    pub fn new(n: usize) -> Self {
        Self { c: vec![0.0; n], free: vec![false; n], ..Default::default() }
    }

    pub fn add(&mut self, row: Vec<f64>, cmp: Cmp, rhs: f64) {
        debug_assert_eq!(row.len(), self.c.len());
        self.rows.push(row);
        self.cmp.push(cmp);
        self.rhs.push(rhs);
    }

    pub fn minimize(&self) -> Result<LpSolution> {
        let n = self.c.len();
        // Split free variables into positive and negative parts.
        let mut map: Vec<(usize, Option<usize>)> = Vec::with_capacity(n);
        let mut ns = 0;
        for j in 0..n {
            if self.free[j] {
                map.push((ns, Some(ns + 1)));
                ns += 2;
            } else {
                map.push((ns, None));
                ns += 1;
            }
        }
        let m = self.rows.len();
        let n_slack = self.cmp.iter().filter(|c| **c != Cmp::Eq).count();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut needs_art = Vec::with_capacity(m);
        let mut slack_col = vec![None; m];
        let mut next_slack = ns;
        for i in 0..m {
            let mut r = vec![0.0; ns + n_slack];
            for j in 0..n {
                let (a, b) = map[j];
                r[a] = self.rows[i][j];
                if let Some(b) = b {
                    r[b] = -self.rows[i][j];
                }
            }
            let mut b = self.rhs[i];
            let mut sign_slack = match self.cmp[i] {
                Cmp::Le => 1.0,
                Cmp::Ge => -1.0,
                Cmp::Eq => 0.0,
            };
            if sign_slack != 0.0 {
                slack_col[i] = Some(next_slack);
                next_slack += 1;
            }
            if b < 0.0 {
                r.iter_mut().for_each(|v| *v = -*v);
                b = -b;
                sign_slack = -sign_slack;
            }
            if let Some(s) = slack_col[i] {
                r[s] = sign_slack;
            }
            needs_art.push(sign_slack <= 0.0);
            rows.push(r);
            rhs.push(b);
        }
        let n_art = needs_art.iter().filter(|x| **x).count();
        let ncols = ns + n_slack + n_art;
        let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut basis = vec![0; m];
        let mut next_art = ns + n_slack;
        for i in 0..m {
            let mut r = rows[i].clone();
            r.resize(ncols + 1, 0.0);
            if needs_art[i] {
                r[next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            } else {
                basis[i] = slack_col[i].expect("slack");
            }
            r[ncols] = rhs[i];
            tab.push(r);
        }
        let art_start = ns + n_slack;

        // Phase 1.
        if n_art > 0 {
            let mut obj = vec![0.0; ncols + 1];
            for j in art_start..ncols {
                obj[j] = 1.0;
            }
            for i in 0..m {
                if basis[i] >= art_start {
                    for j in 0..=ncols {
                        obj[j] -= tab[i][j];
                    }
                }
            }
            run_simplex(&mut tab, &mut basis, &mut obj, ncols)?;
            if -obj[ncols] > 1e-7 {
                return Err(Error::Infeasible(format!("phase-1 residual {}", -obj[ncols])));
            }
            // Drive artificial variables out of the basis.
            let mut i = 0;
            while i < tab.len() {
                if basis[i] >= art_start {
                    let col = (0..art_start).find(|&j| tab[i][j].abs() > 1e-9);
                    match col {
                        Some(j) => pivot(&mut tab, &mut basis, None, i, j, ncols),
                        None => {
                            tab.remove(i);
                            basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
            for r in tab.iter_mut() {
                for v in r[art_start..ncols].iter_mut() {
                    *v = 0.0;
                }
            }
        }

        // Phase 2.
        let mut obj = vec![0.0; ncols + 1];
        for j in 0..n {
            let (a, b) = map[j];
            obj[a] = self.c[j];
            if let Some(b) = b {
                obj[b] = -self.c[j];
            }
        }
        for i in 0..tab.len() {
            let cb = obj[basis[i]];
            if cb != 0.0 {
                for j in 0..=ncols {
                    obj[j] -= cb * tab[i][j];
                }
            }
        }
        run_simplex(&mut tab, &mut basis, &mut obj, art_start)?;
        let mut xs = vec![0.0; ncols];
        for (i, &b) in basis.iter().enumerate() {
            xs[b] = tab[i][ncols];
        }
        let x: Vec<f64> = (0..n)
            .map(|j| {
                let (a, b) = map[j];
                xs[a] - b.map_or(0.0, |b| xs[b])
            })
            .collect();
        let value = self.c.iter().zip(&x).map(|(c, x)| c * x).sum();
        let slack_costs = slack_col.iter().map(|s| s.map_or(0.0, |s| obj[s])).collect();
        Ok(LpSolution { x, value, slack_costs })
    }
}

fn pivot(
    tab: &mut [Vec<f64>],
    basis: &mut [usize],
    obj: Option<&mut Vec<f64>>,
    r: usize,
    c: usize,
    ncols: usize,
) {
    let pv = tab[r][c];
    for v in tab[r].iter_mut() {
        *v /= pv;
    }
    let prow = tab[r].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i != r {
            let f = row[c];
            if f != 0.0 {
                for j in 0..=ncols {
                    row[j] -= f * prow[j];
                }
                row[c] = 0.0;
            }
        }
    }
    if let Some(obj) = obj {
        let f = obj[c];
        if f != 0.0 {
            for j in 0..=ncols {
                obj[j] -= f * prow[j];
            }
            obj[c] = 0.0;
        }
    }
    basis[r] = c;
}

/// Bland's rule on columns `< allowed`.
fn run_simplex(
    tab: &mut [Vec<f64>],
    basis: &mut [usize],
    obj: &mut Vec<f64>,
    allowed: usize,
) -> Result<()> {
    let ncols = obj.len() - 1;
    for _ in 0..100_000 {
        let Some(e) = (0..allowed).find(|&j| obj[j] < -TOL) else {
            return Ok(());
        };
        // Minimum ratio, then the largest pivot among near-ties so that
        // degenerate steps never divide by a tiny element.
        let mut min_ratio = f64::INFINITY;
        for row in tab.iter() {
            let a = row[e];
            if a > PIVOT_TOL {
                min_ratio = min_ratio.min(row[ncols].max(0.0) / a);
            }
        }
        let mut leave: Option<(usize, f64)> = None;
        for (i, row) in tab.iter().enumerate() {
            let a = row[e];
            if a > PIVOT_TOL && row[ncols].max(0.0) / a <= min_ratio + 1e-12 {
                leave = match leave {
                    Some((li, la)) if a < la - 1e-12 || (a <= la + 1e-12 && basis[li] < basis[i]) => Some((li, la)),
                    _ => Some((i, a)),
                };
            }
        }
        let Some((r, _)) = leave else {
            // Roundoff on a recession direction, such as the mirror column
            // of a split free variable.
            if obj[e] > -1e-6 {
                obj[e] = 0.0;
                continue;
            }
            return Err(Error::Infeasible(format!("unbounded linear program (reduced cost {})", obj[e])));
        };
        pivot(tab, basis, Some(obj), r, e, ncols);
    }
    Err(Error::NonConvergence { iterations: 100_000, residual: f64::NAN })
}

/// Solution of `min_{x ∈ Π_b Δ(blocks[b])} max_r (coef[r]·x + offset[r])`.
#[derive(Clone, Debug)]
pub struct GameSolution {
    /// Objective re-evaluated at `x`.
    pub value: f64,
    /// Concatenated block distributions.
    pub x: Vec<f64>,
    /// Optimal mixture over rows from the dual program.
    pub mu: Vec<f64>,
}

/// Evaluates `max_r (coef[r]·x + offset[r])`, returning the value and the
/// lowest maximizing row.
pub fn game_value(coef: &[Vec<f64>], offset: &[f64], x: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (r, (c, o)) in coef.iter().zip(offset).enumerate() {
        let v: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + o;
        if v > best.0 {
            best = (v, r);
        }
    }
    best
}

/// Solves the primal for `x` and reads the row mixture `μ` off the slack
/// reduced costs of the final tableau.
pub fn solve_game(blocks: &[usize], coef: &[Vec<f64>], offset: &[f64]) -> Result<GameSolution> {
    let n: usize = blocks.iter().sum();
    let nr = coef.len();
    if nr == 0 {
        return Err(Error::EmptyClass);
    }
    // Both x and μ are invariant under positive scaling and under a common
    // shift of the payoffs. Scale to unit magnitude, then shift so that the
    // value is non-negative and t needs no sign split.
    let scale = coef.iter().flatten().chain(offset).fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    // Entries below 1e-9 of the scale invite near-singular pivots; the value
    // is re-evaluated on the original payoffs below.
    let snap = |v: f64| if v.abs() < 1e-9 { 0.0 } else { v };
    let scaled: Vec<Vec<f64>> = coef.iter().map(|r| r.iter().map(|v| snap(v / scale)).collect()).collect();
    let floor = scaled
        .iter()
        .zip(offset)
        .map(|(r, o)| {
            let mut start = 0;
            let mut lo = o / scale;
            for &b in blocks {
                lo += r[start..start + b].iter().cloned().fold(f64::INFINITY, f64::min);
                start += b;
            }
            lo
        })
        .fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = offset.iter().map(|o| o / scale - floor).collect();

    let mut lp = Lp::new(n + 1);
    lp.c[n] = 1.0;
    for (c, o) in scaled.iter().zip(&shifted) {
        let mut row = c.clone();
        row.push(-1.0);
        lp.add(row, Cmp::Le, -o);
    }
    let mut start = 0;
    for &b in blocks {
        let mut row = vec![0.0; n + 1];
        row[start..start + b].iter_mut().for_each(|v| *v = 1.0);
        lp.add(row, Cmp::Eq, 1.0);
        start += b;
    }
    let sol = lp.minimize()?;
    let mut x = sol.x[..n].to_vec();
    clean_blocks(&mut x, blocks);
    let mut mu: Vec<f64> = sol.slack_costs[..nr].iter().map(|v| v.max(0.0)).collect();
    if mu.iter().sum::<f64>() <= 0.0 {
        let (_, r) = game_value(coef, offset, &x);
        mu[r] = 1.0;
    }
    clean_blocks(&mut mu, &[nr]);

    let (value, _) = game_value(coef, offset, &x);
    Ok(GameSolution { value, x, mu })
}

/// Clamps tiny negatives and renormalizes each block.
pub fn clean_blocks(x: &mut [f64], blocks: &[usize]) {
    let mut start = 0;
    for &b in blocks {
        let seg = &mut x[start..start + b];
        seg.iter_mut().for_each(|v| {
            if *v < 0.0 {
                *v = 0.0
            }
        });
        let s: f64 = seg.iter().sum();
        if s > 0.0 {
            seg.iter_mut().for_each(|v| *v /= s);
        } else {
            seg.iter_mut().for_each(|v| *v = 1.0 / b as f64);
        }
        start += b;
    }
}
