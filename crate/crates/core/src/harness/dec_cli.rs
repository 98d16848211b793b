//! The `dec` subcommand: one certificate per invocation, as JSON.

use serde::Deserialize;
use serde_json::{json, Value};

use super::{HarnessError, InstanceSpec};
use crate::dec::{
    constrained_pac_dec_ldp, fractional_covering, local_dec, min_correlation, offset_pac_dec_ldp,
    offset_regret_dec_ldp, quantile_pac_dec, robust_offset_dec, solve_fixed_point_u, sq_dec, SearchConfig, Variant,
};
use crate::learners::Problem;
use crate::models::{Model, ModelClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum DecKind {
    OffsetPacLdp,
    OffsetRegLdp,
    ConstrainedPacLdp,
    Quantile,
    Local,
    Sq,
    RobustOffset,
    Nfrac,
    Mincorr,
    Fixedpoint,
}

/// Numeric parameters shared by the kinds.
#[derive(Clone, Debug, Default)]
pub struct DecParams {
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub tau: Option<f64>,
    pub beta: Option<f64>,
    pub lambda0: Option<f64>,
    /// Reference model index; the uniform mixture when absent.
    pub reference: Option<usize>,
    pub subset_cap: Option<usize>,
}

/// Input of the `fixedpoint` kind.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointInput {
    pub points: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

fn need(v: Option<f64>, flag: &str) -> Result<f64, HarnessError> {
    v.ok_or_else(|| HarnessError::Validation(format!("--{flag} is required for this kind")))
}

fn reference(class: &ModelClass, idx: Option<usize>) -> Result<Model, HarnessError> {
    match idx {
        None => Ok(class.uniform_reference()),
        Some(i) if i < class.len() => Ok(class.model(i).clone()),
        Some(i) => Err(HarnessError::Validation(format!("--reference {i} out of range"))),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("certificate serializes")
}

/// Evaluates one DEC quantity on the instance text.
pub fn run_dec(kind: DecKind, instance_json: &str, prm: &DecParams) -> Result<Value, HarnessError> {
    if kind == DecKind::Fixedpoint {
        let inp: FixedPointInput = super::parse_json(instance_json)?;
        let res = solve_fixed_point_u(&inp.points, &inp.probs, prm.lambda0.unwrap_or(1e-3))?;
        return Ok(to_value(&res));
    }
    let spec: InstanceSpec = super::parse_json(instance_json)?;
    let inst = spec.build().map_err(|e| HarnessError::Validation(format!("instance: {e}")))?;
    let search = SearchConfig::default();
    if kind == DecKind::Sq {
        let Problem::Query { class } = &inst.problem else {
            return Err(HarnessError::Validation("instance: sq needs a query class".into()));
        };
        let cert = sq_dec(class, &class.uniform_reference(), need(prm.eps, "eps")?, need(prm.tau, "tau")?, &search)?;
        return Ok(to_value(&cert));
    }
    let class = inst.problem.model_class().map_err(|e| HarnessError::Validation(format!("instance: {e}")))?;
    let out = match kind {
        DecKind::OffsetPacLdp => {
            to_value(&offset_pac_dec_ldp(class, &reference(class, prm.reference)?, need(prm.gamma, "gamma")?)?)
        }
        DecKind::OffsetRegLdp => {
            to_value(&offset_regret_dec_ldp(class, &reference(class, prm.reference)?, need(prm.gamma, "gamma")?)?)
        }
        DecKind::ConstrainedPacLdp => to_value(&constrained_pac_dec_ldp(
            class,
            &reference(class, prm.reference)?,
            need(prm.eps, "eps")?,
            &search,
        )?),
        DecKind::Quantile => to_value(&quantile_pac_dec(
            class,
            &reference(class, prm.reference)?,
            need(prm.eps, "eps")?,
            need(prm.delta, "delta")?,
            &search,
        )?),
        DecKind::Local => {
            let m0 = prm.reference.unwrap_or(0);
            if m0 >= class.len() {
                return Err(HarnessError::Validation(format!("--reference {m0} out of range")));
            }
            let eps = need(prm.eps, "eps")?;
            json!({ "kind": "local", "reference": m0, "eps": eps, "value": local_dec(class, m0, eps)? })
        }
        DecKind::RobustOffset => to_value(&robust_offset_dec(
            class,
            &reference(class, prm.reference)?,
            need(prm.gamma, "gamma")?,
            prm.beta.unwrap_or(0.0),
            Variant::Pac,
        )?),
        DecKind::Nfrac => to_value(&fractional_covering(class, need(prm.delta, "delta")?)?),
        DecKind::Mincorr => {
            if !class.is_statistical() {
                return Err(HarnessError::Validation("instance: mincorr needs a statistical class".into()));
            }
            let r = reference(class, prm.reference)?;
            to_value(&min_correlation(class, need(prm.delta, "delta")?, &[r.dist(0).to_vec()], prm.subset_cap.unwrap_or(8))?)
        }
        DecKind::Sq | DecKind::Fixedpoint => unreachable!("handled above"),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nfrac_on_canonical_mab() {
        let v = run_dec(
            DecKind::Nfrac,
            r#"{"builder":"mab_canonical","arms":3}"#,
            &DecParams { delta: Some(0.5), ..Default::default() },
        )
        .unwrap();
        assert_eq!(v["n_frac"].as_f64(), Some(3.0));
    }

    #[test]
    fn missing_parameter_is_validation() {
        let e = run_dec(DecKind::OffsetPacLdp, r#"{"builder":"mab_canonical","arms":2}"#, &DecParams::default())
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = run_dec(DecKind::Nfrac, r#"{"builder":"mab_canonical","arms":"x"}"#, &DecParams::default())
            .unwrap_err();
        assert!(e.to_string().contains("arms"), "{e}");
    }
}
