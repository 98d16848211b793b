//! Local DEC and TV modulus of continuity by enumeration.

use crate::error::{Error, Result};
use crate::models::{LossSpec, ModelClass};
use crate::prob::raw;

fn tv_sup(class: &ModelClass, a: usize, b: usize) -> f64 {
    (0..class.n_decisions())
        .map(|pi| raw::tv(class.model(a).dist(pi), class.model(b).dist(pi)))
        .fold(0.0, f64::max)
}

fn neighbours(class: &ModelClass, m0: usize, eps: f64) -> Result<Vec<usize>> {
    if m0 >= class.len() {
        return Err(Error::NotFound(format!("model index {m0}")));
    }
    Ok((0..class.len()).filter(|&m1| tv_sup(class, m1, m0) <= eps + 1e-12).collect())
}

/// `max_{M1 : sup_π TV(M1(π), M0(π)) ≤ ε} min_π [L(M1,π) + L(M0,π)]`.
pub fn local_dec(class: &ModelClass, m0: usize, eps: f64) -> Result<f64> {
    let mut best: f64 = 0.0;
    for m1 in neighbours(class, m0, eps)? {
        let v = (0..class.n_decisions())
            .map(|pi| class.loss(m1, pi) + class.loss(m0, pi))
            .fold(f64::INFINITY, f64::min);
        best = best.max(v);
    }
    Ok(best)
}

/// `max ρ(π_{M1}, π_{M0})` over the same neighbourhood. The decision metric
/// comes from a metric-based loss, or from decision labels that parse as
/// numbers.
pub fn tv_modulus(class: &ModelClass, m0: usize, eps: f64) -> Result<f64> {
    let metric: Box<dyn Fn(usize, usize) -> f64> = match class.loss_spec() {
        LossSpec::MetricBased { metric: Some(rho), .. } => {
            let rho = rho.clone();
            Box::new(move |a, b| rho[a][b])
        }
        _ => {
            let vals: Option<Vec<f64>> =
                class.decisions().labels().iter().map(|l| l.parse::<f64>().ok()).collect();
            let vals = vals.ok_or_else(|| {
                Error::Config("tv_modulus needs a decision metric or numeric decision labels".into())
            })?;
            Box::new(move |a, b| (vals[a] - vals[b]).abs())
        }
    };
    let p0 = class.optimal_decision(m0);
    Ok(neighbours(class, m0, eps)?
        .into_iter()
        .map(|m1| metric(class.optimal_decision(m1), p0))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Model;
    use crate::prob::FiniteSpace;

    /// Functional estimation with two models whose functionals differ by `g`.
    fn two_point(g: f64, shift: f64) -> ModelClass {
        let dec = FiniteSpace::new(["0", &g.to_string()]).unwrap();
        let obs = FiniteSpace::indexed("z", 2).unwrap();
        let m0 = Model::statistical("m0", vec![0.5, 0.5], 2).unwrap();
        let m1 = Model::statistical("m1", vec![0.5 + shift, 0.5 - shift], 2).unwrap();
        let loss = LossSpec::MetricBased {
            table: vec![vec![0.0, g], vec![g, 0.0]],
            metric: Some(vec![vec![0.0, g], vec![g, 0.0]]),
        };
        ModelClass::new(dec, obs, vec![m0, m1], loss, vec![]).unwrap()
    }

    #[test]
    fn local_examples() {
        let c = two_point(0.3, 0.1);
        assert!((local_dec(&c, 0, 0.1).unwrap() - 0.3).abs() < 1e-15);
        assert!((tv_modulus(&c, 0, 0.1).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(local_dec(&c, 0, 0.0).unwrap(), 0.0);
        assert_eq!(tv_modulus(&c, 0, 0.05).unwrap(), 0.0);
        let single = c.subclass(&[0]).unwrap();
        assert_eq!(local_dec(&single, 0, 1.0).unwrap(), 0.0);
        assert!(matches!(local_dec(&c, 5, 0.1), Err(Error::NotFound(_))));
    }
}
