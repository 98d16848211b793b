//! Offset DECs as linear programs over products of simplices.

use super::{tidy, DecCertificate, DecInstance, Divergence, Mode, Variant};
use crate::error::{Error, Result};
use crate::lp;
use crate::models::{Model, ModelClass};

/// Solves `min_{p,q} max_M (E_p L_M - γ E_q D_M)`; in the `Reg` variant `p`
/// is the decision marginal of `q`.
pub fn offset_dec(inst: &DecInstance, gamma: f64, variant: Variant) -> Result<DecCertificate> {
    if !(gamma >= 0.0) {
        return Err(Error::Range(format!("gamma = {gamma} must be non-negative")));
    }
    if inst.n_models() == 0 {
        return Err(Error::EmptyClass);
    }
    let np = inst.n_decisions;
    let nj = inst.n_cells();
    let (blocks, coef): (Vec<usize>, Vec<Vec<f64>>) = match variant {
        Variant::Pac => (
            vec![np, nj],
            (0..inst.n_models())
                .map(|m| {
                    let mut row = inst.loss[m].clone();
                    row.extend(inst.div[m].iter().map(|d| -gamma * d));
                    row
                })
                .collect(),
        ),
        Variant::Reg => (
            vec![nj],
            (0..inst.n_models())
                .map(|m| {
                    (0..nj).map(|j| inst.loss[m][inst.cell_decision(j)] - gamma * inst.div[m][j]).collect()
                })
                .collect(),
        ),
    };
    let offs = vec![0.0; inst.n_models()];
    let sol = lp::solve_game(&blocks, &coef, &offs)?;
    let (p, q) = match variant {
        Variant::Pac => {
            let mut p = sol.x[..np].to_vec();
            let mut q = sol.x[np..].to_vec();
            tidy(&mut p);
            tidy(&mut q);
            (p, q)
        }
        Variant::Reg => {
            let mut q = sol.x.clone();
            tidy(&mut q);
            (inst.marginal(&q), q)
        }
    };
    let (value, witness) = inst.offset_objective(&p, &q, gamma);
    Ok(DecCertificate {
        kind: format!("offset-{}", if variant == Variant::Pac { "pac" } else { "reg" }),
        value,
        p,
        q,
        n_dict: inst.n_dict,
        witness_model: Some(witness),
        witness_mixture: sol.mu,
        mode: Mode::ExactLp,
        gamma: Some(gamma),
        eps: None,
    })
}

/// Offset private PAC-DEC over the class dictionary.
pub fn offset_pac_dec_ldp(class: &ModelClass, reference: &Model, gamma: f64) -> Result<DecCertificate> {
    let inst = DecInstance::from_class(class, reference, Divergence::Ldp)?;
    let mut c = offset_dec(&inst, gamma, Variant::Pac)?;
    c.kind = "offset-pac-ldp".into();
    Ok(c)
}

/// Offset private regret-DEC over the class dictionary.
pub fn offset_regret_dec_ldp(class: &ModelClass, reference: &Model, gamma: f64) -> Result<DecCertificate> {
    let inst = DecInstance::from_class(class, reference, Divergence::Ldp)?;
    let mut c = offset_dec(&inst, gamma, Variant::Reg)?;
    c.kind = "offset-reg-ldp".into();
    Ok(c)
}

/// Offset DEC with squared Hellinger divergence, exploration over `Π`.
pub fn offset_dec_hellinger(
    class: &ModelClass,
    reference: &Model,
    gamma: f64,
    variant: Variant,
) -> Result<DecCertificate> {
    let inst = DecInstance::from_class(class, reference, Divergence::Hellinger)?;
    let mut c = offset_dec(&inst, gamma, variant)?;
    c.kind = format!("{}-hellinger", c.kind);
    Ok(c)
}

/// Robust offset DEC: β-perturbed Hellinger in place of Hellinger.
pub fn robust_offset_dec(
    class: &ModelClass,
    reference: &Model,
    gamma: f64,
    beta: f64,
    variant: Variant,
) -> Result<DecCertificate> {
    let inst = DecInstance::from_class(class, reference, Divergence::Huber { beta })?;
    let mut c = offset_dec(&inst, gamma, variant)?;
    c.kind = format!("{}-robust", c.kind);
    Ok(c)
}

/// Re-evaluates an offset certificate's objective.
pub fn recheck_offset(inst: &DecInstance, cert: &DecCertificate) -> f64 {
    inst.offset_objective(&cert.p, &cert.q, cert.gamma.unwrap_or(0.0)).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::mab_class;

    #[test]
    fn singleton_is_zero() {
        let c = mab_class(&[vec![0.3, -0.2, 0.5]]).unwrap();
        let r = c.model(0).clone();
        for g in [0.0, 1.0, 10.0] {
            let cert = offset_pac_dec_ldp(&c, &r, g).unwrap();
            assert_eq!(cert.value, 0.0);
            assert_eq!(cert.p, vec![0.0, 0.0, 1.0]);
            assert_eq!(offset_regret_dec_ldp(&c, &r, g).unwrap().value, 0.0);
            assert_eq!(offset_dec_hellinger(&c, &r, g, Variant::Reg).unwrap().value, 0.0);
        }
    }

    #[test]
    fn gamma_zero_is_matrix_game() {
        // Losses [[0,1],[1,0]]: the game value is 1/2 for any divergence.
        let c = mab_class(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let r = c.uniform_reference();
        let a = offset_pac_dec_ldp(&c, &r, 0.0).unwrap();
        let b = offset_dec_hellinger(&c, &r, 0.0, Variant::Pac).unwrap();
        assert!((a.value - 0.5).abs() < 1e-12);
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn certificates_recheck() {
        let c = mab_class(&[vec![0.8, -0.3], vec![-0.1, 0.6], vec![0.2, 0.2]]).unwrap();
        let r = c.uniform_reference();
        let inst = DecInstance::from_class(&c, &r, Divergence::Ldp).unwrap();
        for v in [Variant::Pac, Variant::Reg] {
            let cert = offset_dec(&inst, 3.0, v).unwrap();
            assert!((recheck_offset(&inst, &cert) - cert.value).abs() < 1e-9);
        }
    }

    #[test]
    fn robust_edges() {
        let c = mab_class(&[vec![0.8, -0.3], vec![-0.1, 0.6]]).unwrap();
        let r = c.uniform_reference();
        let h = offset_dec_hellinger(&c, &r, 2.0, Variant::Pac).unwrap();
        let r0 = robust_offset_dec(&c, &r, 2.0, 0.0, Variant::Pac).unwrap();
        assert!((h.value - r0.value).abs() < 1e-9);
        let r1 = robust_offset_dec(&c, &r, 2.0, 1.0, Variant::Pac).unwrap();
        let game = offset_dec_hellinger(&c, &r, 0.0, Variant::Pac).unwrap();
        assert!((r1.value - game.value).abs() < 1e-9);
    }
}
