//! The PSD matrix `U` solving `E[U x xᵀ U / ‖Ux‖] + λ₀ U = I`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedPointResult {
    /// Row-major `d × d` matrix.
    pub u: Vec<Vec<f64>>,
    pub lambda0: f64,
    /// Frobenius norm of `E[U x xᵀ U/‖Ux‖] + λ₀U - I`.
    pub residual: f64,
    /// `E‖Ux‖`.
    pub trace_expect: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FixedPointResult {
    /// Turns a non-converged result into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence { iterations: self.iterations, residual: self.residual })
        }
    }
}

pub const FIXED_POINT_TOL: f64 = 1e-8;
pub const FIXED_POINT_MAX_ITER: usize = 100_000;

/// Damped iteration `U ← ½U + ½h(A(U))` with `A(U) = E[x xᵀ/‖Ux‖]` and
/// `h(a) = 2/(λ₀ + √(λ₀² + 4a))` applied spectrally; a fixed point solves
/// `U A U + λ₀ U = I`. Returns the best iterate, flagged, if the residual
/// never reaches [`FIXED_POINT_TOL`].
pub fn solve_fixed_point_u(points: &[Vec<f64>], probs: &[f64], lambda0: f64) -> Result<FixedPointResult> {
    if !(lambda0 > 0.0) {
        return Err(Error::Range(format!("lambda0 = {lambda0} must be positive")));
    }
    let probs = crate::prob::normalize_mass(probs.to_vec())?;
    let d = points.first().ok_or_else(|| Error::Config("no support points".into()))?.len();
    if points.len() != probs.len() || points.iter().any(|x| x.len() != d) {
        return Err(Error::SpaceMismatch("points and weights disagree".into()));
    }
    let xs: Vec<DVector<f64>> = points.iter().map(|x| DVector::from_vec(x.clone())).collect();
    if xs.iter().any(|x| x.norm() == 0.0) {
        return Err(Error::Range("support points must be nonzero".into()));
    }
    let eye = DMatrix::<f64>::identity(d, d);
    let a_of = |u: &DMatrix<f64>| -> DMatrix<f64> {
        let mut a = DMatrix::<f64>::zeros(d, d);
        for (x, w) in xs.iter().zip(&probs) {
            if *w > 0.0 {
                a += x * x.transpose() * (*w / (u * x).norm());
            }
        }
        a
    };
    let residual_of = |u: &DMatrix<f64>| -> f64 {
        let a = a_of(u);
        (u * &a * u + u * lambda0 - &eye).norm()
    };
    let mut u = eye.clone() / (1.0 + lambda0);
    let mut best = (residual_of(&u), u.clone(), 0);
    let mut iterations = 0;
    while iterations < FIXED_POINT_MAX_ITER && best.0 > FIXED_POINT_TOL {
        iterations += 1;
        let a = a_of(&u);
        let eig = SymmetricEigen::new((&a + a.transpose()) * 0.5);
        let h = eig.eigenvalues.map(|ev| 2.0 / (lambda0 + (lambda0 * lambda0 + 4.0 * ev.max(0.0)).sqrt()));
        let hu = &eig.eigenvectors * DMatrix::from_diagonal(&h) * eig.eigenvectors.transpose();
        u = (&u + hu) * 0.5;
        u = (&u + u.transpose()) * 0.5;
        let r = residual_of(&u);
        if r < best.0 {
            best = (r, u.clone(), iterations);
        }
    }
    let (residual, u, _) = best;
    let trace_expect = xs.iter().zip(&probs).map(|(x, w)| w * (&u * x).norm()).sum();
    Ok(FixedPointResult {
        u: (0..d).map(|i| (0..d).map(|j| u[(i, j)]).collect()).collect(),
        lambda0,
        residual,
        trace_expect,
        iterations,
        converged: residual <= FIXED_POINT_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_closed_form() {
        let r = solve_fixed_point_u(&[vec![1.0]], &[1.0], 0.7).unwrap();
        assert!(r.converged);
        assert!((r.u[0][0] - 1.0 / 1.7).abs() < 1e-8);
    }

    #[test]
    fn symmetric_closed_form() {
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let r = solve_fixed_point_u(&pts, &[0.25; 4], 0.3).unwrap();
        let want = 2.0 / (1.0 + 2.0 * 0.3);
        assert!((r.u[0][0] - want).abs() < 1e-8 && r.u[0][1].abs() < 1e-8);
        assert!(r.trace_expect <= 2.0 + 1e-9);
    }

    #[test]
    fn rejects_zero_point() {
        assert!(solve_fixed_point_u(&[vec![0.0]], &[1.0], 1.0).is_err());
    }
}
