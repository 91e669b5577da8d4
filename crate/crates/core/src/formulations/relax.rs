use super::ModelArtifacts;
use crate::error::{Error, Result};
use crate::milp::{conditional_rows, IntegerProgram, LinExpr, Relation};

/// Makes service optional on `leasable` fields: their uniqueness rows become
/// `Σ_k δ_l^k ≤ 1`. Degree rows stay `= 2δ_l^k`, so an unserved field has no
/// incident legs and a served one is still visited. The crop count `γ` may
/// then drop to zero.
pub fn relax_service(
    model: &mut IntegerProgram,
    artifacts: &mut ModelArtifacts,
    leasable: &[usize],
) -> Result<()> {
    if let Some(&bad) = leasable.iter().find(|&&l| l >= artifacts.num_fields) {
        return Err(Error::Validation(format!("unknown field id {bad}")));
    }
    if leasable.is_empty() {
        return Ok(());
    }
    for &l in leasable {
        model.set_relation(artifacts.uniqueness_rows[l], Relation::Le)?;
        artifacts.relaxed_fields.insert(l);
    }
    if let Some(gamma) = artifacts.gamma {
        let ub = model.variable(gamma).ub;
        model.set_bounds(gamma, 0.0, ub)?;
        if let (Some(p), Some(xi)) = (artifacts.p.clone(), artifacts.xi.clone()) {
            for s in 0..p.len() {
                let rows = artifacts.p_rows[s].clone();
                conditional_rows(
                    model,
                    p[s],
                    xi[s],
                    &LinExpr::from(gamma),
                    0.0,
                    ub,
                    Some(&rows),
                )?;
            }
        }
    }
    Ok(())
}
