use crate::error::Result;
use crate::instance::Instance;
use crate::milp::{IntegerProgram, LinExpr, Relation, VarId};

/// Columns of the pure assignment model.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentArtifacts {
    /// `δ_l^k` as `[k][l]`.
    pub delta: Vec<Vec<VarId>>,
}

impl AssignmentArtifacts {
    pub fn assignment(&self, values: &[f64]) -> Vec<Option<usize>> {
        let l_count = self.delta.first().map_or(0, |d| d.len());
        (0..l_count)
            .map(|l| (0..self.delta.len()).find(|&k| values[self.delta[k][l].0] > 0.5))
            .collect()
    }
}

/// Revenue-maximizing crop choice per field, ignoring all travel.
pub fn build_assignment_baseline(inst: &Instance) -> Result<(IntegerProgram, AssignmentArtifacts)> {
    let mut m = IntegerProgram::new();
    let delta: Vec<Vec<VarId>> = (0..inst.num_crops())
        .map(|k| {
            (0..inst.num_fields())
                .map(|l| {
                    let v = m.add_binary(format!("delta_f{l}_k{k}"));
                    m.set_objective_coeff(v, -inst.fields[l].revenue_eur[k]);
                    v
                })
                .collect()
        })
        .collect();
    for l in 0..inst.num_fields() {
        let e = LinExpr::sum(delta.iter().map(|row| row[l]));
        m.add_constraint_in("uniqueness", &e, Relation::Eq, 1.0)?;
    }
    Ok((m, AssignmentArtifacts { delta }))
}
