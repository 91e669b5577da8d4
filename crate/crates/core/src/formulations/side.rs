use serde::{Deserialize, Serialize};

use super::{has_directed_legs, ModelArtifacts};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::milp::{add_binary_and, IntegerProgram, LinExpr, Relation};

/// `Σ_l g_l^k δ_l^k ≤ G^k` for the listed crops (never the last one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diversification {
    /// `g_l^k` as `[l][k]`.
    pub weights: Vec<Vec<f64>>,
    /// `(k, G^k)` pairs.
    pub bounds: Vec<(usize, f64)>,
}

/// Travel time along used edges plus harvest time of served fields must fit
/// each crop's harvest window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConstraint {
    /// `h_ij^k` as `[k][i][j]`.
    pub field_field_h: Vec<Vec<Vec<f64>>>,
    /// `h_dj^k` as `[k][d][j]` over the instance depots.
    pub depot_field_h: Vec<Vec<Vec<f64>>>,
    /// `T_win^k`.
    pub window_h: Vec<f64>,
    /// `T_l^{harv,k}` as `[l][k]`.
    pub harvest_h: Vec<Vec<f64>>,
}

/// Fields `c`, `a`, `b` of one crop, harvested as `c → a → b` when all three get that crop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityTriple {
    pub crop: usize,
    pub c: usize,
    pub a: usize,
    pub b: usize,
}

impl PriorityTriple {
    /// Field pairs that need directed arc columns.
    pub fn pairs(&self) -> [(usize, usize, usize); 2] {
        [(self.crop, self.c, self.a), (self.crop, self.a, self.b)]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgronomicConstraints {
    /// Forbidden `(field, crop)` combinations.
    #[serde(default)]
    pub rotation_forbidden: Vec<(usize, usize)>,
    #[serde(default)]
    pub diversification: Option<Diversification>,
    #[serde(default)]
    pub time: Option<TimeConstraint>,
    #[serde(default)]
    pub priority: Vec<PriorityTriple>,
}

impl AgronomicConstraints {
    pub fn is_empty(&self) -> bool {
        self.rotation_forbidden.is_empty()
            && self.diversification.is_none()
            && self.time.is_none()
            && self.priority.is_empty()
    }

    pub fn asymmetric_pairs(&self) -> Vec<(usize, usize, usize)> {
        self.priority.iter().flat_map(|t| t.pairs()).collect()
    }
}

fn shape(what: &str) -> Error {
    Error::Shape(format!("{what} has the wrong dimensions"))
}

/// Appends the requested side constraints. Row groups are `rotation`,
/// `diversification`, `time` and `priority`.
pub fn add_agronomic_constraints(
    model: &mut IntegerProgram,
    artifacts: &ModelArtifacts,
    inst: &Instance,
    rules: &AgronomicConstraints,
) -> Result<()> {
    let (k_count, l_count) = (artifacts.num_crops, artifacts.num_fields);
    for &(l, k) in &rules.rotation_forbidden {
        if l >= l_count || k >= k_count {
            return Err(Error::Validation(format!(
                "rotation pair ({l}, {k}) out of range"
            )));
        }
        model.add_constraint_in(
            "rotation",
            &LinExpr::from(artifacts.delta[k][l]),
            Relation::Eq,
            0.0,
        )?;
    }

    if let Some(div) = &rules.diversification {
        if div.weights.len() != l_count || div.weights.iter().any(|w| w.len() != k_count) {
            return Err(shape("diversification weights"));
        }
        for &(k, bound) in &div.bounds {
            if k + 1 >= k_count {
                return Err(Error::Validation(format!(
                    "diversification bound on crop {k}; only crops 0..{} may be bounded",
                    k_count.saturating_sub(1)
                )));
            }
            if !(bound >= 0.0) {
                return Err(Error::Validation(format!(
                    "negative diversification bound for crop {k}"
                )));
            }
            let mut e = LinExpr::new();
            for l in 0..l_count {
                let g = div.weights[l][k];
                if !(g >= 0.0) {
                    return Err(Error::Validation(format!(
                        "negative weight for field {l}, crop {k}"
                    )));
                }
                e.add_term(artifacts.delta[k][l], g);
            }
            model.add_constraint_in("diversification", &e, Relation::Le, bound)?;
        }
    }

    if let Some(t) = &rules.time {
        let d_count = inst.num_depots();
        if t.window_h.len() != k_count
            || t.harvest_h.len() != l_count
            || t.harvest_h.iter().any(|h| h.len() != k_count)
            || t.field_field_h.len() != k_count
            || t.field_field_h
                .iter()
                .any(|m| m.len() != l_count || m.iter().any(|r| r.len() != l_count))
            || t.depot_field_h.len() != k_count
            || t.depot_field_h
                .iter()
                .any(|m| m.len() != d_count || m.iter().any(|r| r.len() != l_count))
        {
            return Err(shape("time constraint data"));
        }
        for k in 0..k_count {
            let mut e = LinExpr::new();
            for (s, slot) in artifacts.depot_slots.iter().enumerate() {
                for j in 0..l_count {
                    // The virtual depot's harvesters arrive when the slowest one does.
                    let h = match slot {
                        Some(d) => t.depot_field_h[k][*d][j],
                        None => inst
                            .depots
                            .iter()
                            .enumerate()
                            .filter(|(_, dep)| dep.harvesters[k] > 0)
                            .map(|(d, _)| t.depot_field_h[k][d][j])
                            .fold(0.0, f64::max),
                    };
                    e.add_term(artifacts.x_out[k][s][j], h);
                    if let Some(x_in) = &artifacts.x_in {
                        e.add_term(x_in[k][s][j], h);
                    }
                }
            }
            for i in 0..l_count {
                for j in (i + 1)..l_count {
                    e.add_expr(&artifacts.edge_expr(k, i, j), t.field_field_h[k][i][j]);
                }
                e.add_term(artifacts.delta[k][i], t.harvest_h[i][k]);
            }
            model.add_constraint_in("time", &e, Relation::Le, t.window_h[k])?;
        }
    }

    if !rules.priority.is_empty() && has_directed_legs(artifacts.variant) {
        return Err(Error::Validation(format!(
            "priority constraints are not supported for IP-{}",
            artifacts.variant
        )));
    }
    for t in &rules.priority {
        if t.crop >= k_count || t.c >= l_count || t.a >= l_count || t.b >= l_count {
            return Err(Error::Validation(format!(
                "priority triple {t:?} out of range"
            )));
        }
        if t.c == t.a || t.a == t.b || t.c == t.b {
            return Err(Error::Validation(format!(
                "priority triple {t:?} repeats a field"
            )));
        }
        for (k, from, to) in t.pairs() {
            let arc = artifacts.arc(k, from, to).ok_or_else(|| {
                Error::Model(format!(
                    "priority needs directed arcs for crop {k}, fields ({from}, {to}); \
                     build the model with these pairs in asymmetric_pairs"
                ))
            })?;
            let before = model.num_constraints();
            add_binary_and(model, artifacts.delta[k][from], artifacts.delta[k][to], arc)?;
            for r in before..model.num_constraints() {
                model.set_group(crate::milp::ConstraintId(r), "priority");
            }
        }
    }
    Ok(())
}
