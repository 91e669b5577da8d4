//! The eight crop-assignment-plus-routing integer programs.
//!
//! | n | depot handling | depot legs | crops |
//! |---|----------------|------------|-------|
//! | 1 | one designated depot | `x_dj ∈ {0,1,2}`, cost `c_dj` | free |
//! | 2 | virtual depot (harvesters assemble from their homes) | `x_dj ∈ {0,1,2}`, cost `c^{kmin}` | free |
//! | 3 | basis depot chosen by the model | `x_dj ∈ {0,1,2}`, cost `c_dj` | free |
//! | 4 | basis depot chosen by the model | directed `x_dj`, `x_jd`, first/last crop at aggregated cost | free |
//! | 5–8 | as 1–4 | as 1–4 | every crop used |
//!
//! Subtour elimination rows are not part of the built model; see [`solve_with_secs`].

mod baseline;
mod relax;
mod sec;
mod side;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::instance::{CostModel, Instance};
use crate::milp::{
    add_and_of_exprs, add_conditional_value, add_reified_leq, ConstraintId, IntegerProgram,
    LinExpr, Relation, VarId, DEFAULT_EPSILON,
};

pub use baseline::{build_assignment_baseline, AssignmentArtifacts};
pub use relax::relax_service;
pub use sec::{extract_tours, separate_subtours, solve_with_secs, SecCut, SecOutcome};
pub use side::{
    add_agronomic_constraints, AgronomicConstraints, Diversification, PriorityTriple,
    TimeConstraint,
};

pub fn check_variant(n: u8) -> Result<()> {
    if (1..=8).contains(&n) {
        Ok(())
    } else {
        Err(Error::Validation(format!("IP variant {n} is not in 1..=8")))
    }
}

/// Separate directed out- and in-legs with aggregated first/last crop legs.
pub fn has_directed_legs(n: u8) -> bool {
    n == 4 || n == 8
}

/// Every crop must be planted on at least one field.
pub fn enforces_all_crops(n: u8) -> bool {
    n >= 5
}

/// All depot legs use the aggregated assembly cost.
pub fn uses_virtual_depot(n: u8) -> bool {
    n == 2 || n == 6
}

pub fn uses_designated_depot(n: u8) -> bool {
    n == 1 || n == 5
}

pub fn chooses_depot(n: u8) -> bool {
    matches!(n, 3 | 4 | 7 | 8)
}

/// Number of columns of the built model (without priority arcs).
pub fn count_variables(n: u8, k: usize, d: usize, l: usize) -> Result<usize> {
    check_variant(n)?;
    let edges = k * l * l.saturating_sub(1) / 2;
    let kl = k * l;
    let kdl = k * d * l;
    Ok(match n {
        1 | 2 => kl + edges + kl + 1,
        3 => kdl + edges + kl + 1 + 2 * d,
        4 => 2 * kdl + edges + kl + 1 + 2 * d + 3 * k + 2 * kdl,
        5 | 6 => kl + edges + kl,
        7 => kdl + edges + kl + d,
        8 => 2 * kdl + edges + kl + d,
        _ => unreachable!(),
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildOptions {
    /// Depot used by variants 1 and 5; may be omitted when there is one depot.
    pub depot: Option<usize>,
    /// `(crop, i, j)` field pairs that get two directed arc columns instead of
    /// one edge column; required for priority constraints.
    pub asymmetric_pairs: Vec<(usize, usize, usize)>,
}

/// Column(s) representing the field-field connection `i < j` of one crop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeVar {
    Undirected(VarId),
    /// `forward` is the arc `i → j`, `backward` the arc `j → i`.
    Arcs {
        forward: VarId,
        backward: VarId,
    },
}

/// Column maps from model symbols to [`IntegerProgram`] columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifacts {
    pub variant: u8,
    pub num_crops: usize,
    pub num_fields: usize,
    /// Instance depot per depot slot of the model; `None` for the virtual depot.
    pub depot_slots: Vec<Option<usize>>,
    edges: Vec<Vec<Option<EdgeVar>>>,
    /// `x_dj^k` as `[k][slot][j]`.
    pub x_out: Vec<Vec<Vec<VarId>>>,
    /// `x_jd^k` as `[k][slot][j]` (variants 4 and 8).
    pub x_in: Option<Vec<Vec<Vec<VarId>>>>,
    /// `δ_l^k` as `[k][l]`.
    pub delta: Vec<Vec<VarId>>,
    pub xi: Option<Vec<VarId>>,
    pub p: Option<Vec<VarId>>,
    pub gamma: Option<VarId>,
    pub alpha: Option<Vec<VarId>>,
    pub alpha_first: Option<Vec<VarId>>,
    pub beta_last: Option<Vec<VarId>>,
    pub v: Option<Vec<Vec<Vec<VarId>>>>,
    pub w: Option<Vec<Vec<Vec<VarId>>>>,
    /// Field degree rows `[k][l]`.
    pub degree_rows: Vec<Vec<ConstraintId>>,
    /// Uniqueness rows per field.
    pub uniqueness_rows: Vec<ConstraintId>,
    /// Rows linearizing `p^d = γ ξ^d`, four per depot slot.
    pub p_rows: Vec<Vec<ConstraintId>>,
    /// Per-crop `Σ_l δ_l^k ≥ 1` rows (variants 5–8).
    pub crop_used_rows: Vec<ConstraintId>,
    pub sec_pool: Vec<SecCut>,
    /// Fields whose service is optional (leasing relaxation).
    pub relaxed_fields: BTreeSet<usize>,
}

impl ModelArtifacts {
    pub fn num_slots(&self) -> usize {
        self.depot_slots.len()
    }

    pub fn edge(&self, crop: usize, i: usize, j: usize) -> Option<EdgeVar> {
        if i == j {
            return None;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges[crop][a * self.num_fields + b]
    }

    /// Usage of the connection `{i, j}` as an expression (one column, or the sum of two arcs).
    pub fn edge_expr(&self, crop: usize, i: usize, j: usize) -> LinExpr {
        match self.edge(crop, i, j) {
            Some(EdgeVar::Undirected(v)) => LinExpr::from(v),
            Some(EdgeVar::Arcs { forward, backward }) => LinExpr::from(forward).term(backward, 1.0),
            None => LinExpr::new(),
        }
    }

    pub fn edge_value(&self, crop: usize, i: usize, j: usize, values: &[f64]) -> f64 {
        self.edge_expr(crop, i, j).evaluate(values)
    }

    /// Directed arc column `from → to`, when the pair was built asymmetric.
    pub fn arc(&self, crop: usize, from: usize, to: usize) -> Option<VarId> {
        match self.edge(crop, from, to)? {
            EdgeVar::Undirected(_) => None,
            EdgeVar::Arcs { forward, backward } => Some(if from < to { forward } else { backward }),
        }
    }

    /// Depot slot chosen by the solution (`argmax ξ`), or slot 0 when the model has no choice.
    pub fn chosen_slot(&self, values: &[f64]) -> usize {
        match &self.xi {
            Some(xi) => xi
                .iter()
                .enumerate()
                .find(|(_, v)| values[v.0] > 0.5)
                .map(|(s, _)| s)
                .unwrap_or(0),
            None => 0,
        }
    }

    /// Crop served on each field (`None` when unserved).
    pub fn assignment(&self, values: &[f64]) -> Vec<Option<usize>> {
        (0..self.num_fields)
            .map(|l| (0..self.num_crops).find(|&k| values[self.delta[k][l].0] > 0.5))
            .collect()
    }
}

/// Builds IP-`n` over `inst` with costs `costs` (the two must have matching dimensions).
pub fn build_ip(
    n: u8,
    inst: &Instance,
    costs: &CostModel,
    options: &BuildOptions,
) -> Result<(IntegerProgram, ModelArtifacts)> {
    check_variant(n)?;
    let k_count = inst.num_crops();
    let l_count = inst.num_fields();
    let d_count = inst.num_depots();
    if k_count == 0 {
        return Err(Error::Validation("at least one crop is required".into()));
    }
    if d_count == 0 {
        return Err(Error::Validation("at least one depot is required".into()));
    }
    if costs.num_crops() != k_count
        || costs.num_fields() != l_count
        || costs.num_depots() != d_count
    {
        return Err(Error::Shape(
            "cost model does not match the instance".into(),
        ));
    }
    let depot_slots: Vec<Option<usize>> = if uses_designated_depot(n) {
        let d = match options.depot {
            Some(d) => d,
            None if d_count == 1 => 0,
            None => {
                return Err(Error::Validation(format!(
                    "IP-{n} needs a designated depot when there are {d_count} depots"
                )))
            }
        };
        if d >= d_count {
            return Err(Error::Validation(format!("unknown depot {d}")));
        }
        vec![Some(d)]
    } else if uses_virtual_depot(n) {
        vec![None]
    } else {
        (0..d_count).map(Some).collect()
    };
    let asym: BTreeSet<(usize, usize, usize)> = options
        .asymmetric_pairs
        .iter()
        .map(|&(k, i, j)| (k, i.min(j), i.max(j)))
        .collect();
    for &(k, i, j) in &asym {
        if k >= k_count || j >= l_count || i == j {
            return Err(Error::Validation(format!(
                "invalid asymmetric pair ({k}, {i}, {j})"
            )));
        }
    }

    let directed = has_directed_legs(n);
    let slots = depot_slots.len();
    let kf = k_count as f64;
    let mut m = IntegerProgram::new();

    // Depot out-legs.
    let leg_ub = if directed { 1 } else { 2 };
    let mut x_out = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut per_slot = Vec::with_capacity(slots);
        for slot in &depot_slots {
            let mut row = Vec::with_capacity(l_count);
            for j in 0..l_count {
                let name = match slot {
                    Some(d) => format!("x_d{d}_f{j}_k{k}"),
                    None => format!("x_dv_f{j}_k{k}"),
                };
                let v = m.add_integer(name, 0, leg_ub)?;
                let cost = match slot {
                    None => costs.first_leg(k, j),
                    Some(_) if n == 8 && k == 0 => costs.first_leg(k, j),
                    Some(d) => costs.depot_to_field(k, *d, j),
                };
                m.set_objective_coeff(v, cost);
                row.push(v);
            }
            per_slot.push(row);
        }
        x_out.push(per_slot);
    }

    // Field-field edges.
    let mut edges = vec![vec![None; l_count * l_count]; k_count];
    for k in 0..k_count {
        for i in 0..l_count {
            for j in (i + 1)..l_count {
                let cost = costs.field(k, i, j);
                let e = if asym.contains(&(k, i, j)) {
                    let forward = m.add_binary(format!("a_f{i}_f{j}_k{k}"));
                    let backward = m.add_binary(format!("a_f{j}_f{i}_k{k}"));
                    m.set_objective_coeff(forward, cost);
                    m.set_objective_coeff(backward, cost);
                    EdgeVar::Arcs { forward, backward }
                } else {
                    let v = m.add_binary(format!("x_f{i}_f{j}_k{k}"));
                    m.set_objective_coeff(v, cost);
                    EdgeVar::Undirected(v)
                };
                edges[k][i * l_count + j] = Some(e);
            }
        }
    }

    // Assignment.
    let mut delta = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let row: Vec<VarId> = (0..l_count)
            .map(|l| {
                let v = m.add_binary(format!("delta_f{l}_k{k}"));
                m.set_objective_coeff(v, -inst.fields[l].revenue_eur[k]);
                v
            })
            .collect();
        delta.push(row);
    }

    let gamma = if enforces_all_crops(n) {
        m.add_objective_constant(inst.crops.fixed_cost_eur * kf);
        None
    } else {
        let g = m.add_integer("gamma", 1, k_count as i64)?;
        m.set_objective_coeff(g, inst.crops.fixed_cost_eur);
        Some(g)
    };

    if uses_designated_depot(n) {
        let d = depot_slots[0].expect("designated depot");
        m.add_objective_constant(inst.depots[d].maintenance_eur);
    }
    if uses_virtual_depot(n) {
        let hosting: f64 = inst
            .depots
            .iter()
            .filter(|d| d.harvesters.iter().any(|&h| h > 0))
            .map(|d| d.maintenance_eur)
            .sum();
        m.add_objective_constant(hosting);
    }

    let xi = if chooses_depot(n) {
        Some(
            (0..slots)
                .map(|s| {
                    let d = depot_slots[s].expect("real depot");
                    let v = m.add_binary(format!("xi_d{d}"));
                    m.set_objective_coeff(v, inst.depots[d].maintenance_eur);
                    v
                })
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };

    let p = if n == 3 || n == 4 {
        Some(
            (0..slots)
                .map(|s| {
                    m.add_integer(format!("p_d{}", depot_slots[s].unwrap()), 0, k_count as i64)
                })
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let (alpha, alpha_first, beta_last) = if n == 4 {
        let a: Vec<VarId> = (0..k_count)
            .map(|k| m.add_binary(format!("alpha_k{k}")))
            .collect();
        let af: Vec<VarId> = (0..k_count)
            .map(|k| m.add_binary(format!("alphafirst_k{k}")))
            .collect();
        let bl: Vec<VarId> = (0..k_count)
            .map(|k| m.add_binary(format!("betalast_k{k}")))
            .collect();
        (Some(a), Some(af), Some(bl))
    } else {
        (None, None, None)
    };

    let x_in = if directed {
        let mut all = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let mut per_slot = Vec::with_capacity(slots);
            for slot in &depot_slots {
                let d = slot.expect("real depot");
                let row: Vec<VarId> = (0..l_count)
                    .map(|j| {
                        let v = m.add_binary(format!("x_f{j}_d{d}_k{k}"));
                        let cost = if n == 8 && k == k_count - 1 {
                            costs.last_leg(k, j)
                        } else {
                            costs.field_to_depot(k, j, d)
                        };
                        m.set_objective_coeff(v, cost);
                        v
                    })
                    .collect();
                per_slot.push(row);
            }
            all.push(per_slot);
        }
        Some(all)
    } else {
        None
    };

    let (v, w) = if n == 4 {
        let mut vv = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let mut per_slot = Vec::with_capacity(slots);
            for slot in &depot_slots {
                let d = slot.unwrap();
                let row: Vec<VarId> = (0..l_count)
                    .map(|j| {
                        let var = m.add_binary(format!("v_d{d}_f{j}_k{k}"));
                        m.set_objective_coeff(
                            var,
                            costs.first_leg(k, j) - costs.depot_to_field(k, d, j),
                        );
                        var
                    })
                    .collect();
                per_slot.push(row);
            }
            vv.push(per_slot);
        }
        let mut ww = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let mut per_slot = Vec::with_capacity(slots);
            for slot in &depot_slots {
                let d = slot.unwrap();
                let row: Vec<VarId> = (0..l_count)
                    .map(|j| {
                        let var = m.add_binary(format!("w_f{j}_d{d}_k{k}"));
                        m.set_objective_coeff(
                            var,
                            costs.last_leg(k, j) - costs.field_to_depot(k, j, d),
                        );
                        var
                    })
                    .collect();
                per_slot.push(row);
            }
            ww.push(per_slot);
        }
        (Some(vv), Some(ww))
    } else {
        (None, None)
    };

    let mut artifacts = ModelArtifacts {
        variant: n,
        num_crops: k_count,
        num_fields: l_count,
        depot_slots,
        edges,
        x_out,
        x_in,
        delta,
        xi,
        p,
        gamma,
        alpha,
        alpha_first,
        beta_last,
        v,
        w,
        degree_rows: Vec::new(),
        uniqueness_rows: Vec::new(),
        p_rows: Vec::new(),
        crop_used_rows: Vec::new(),
        sec_pool: Vec::new(),
        relaxed_fields: BTreeSet::new(),
    };

    add_core_rows(&mut m, &mut artifacts)?;
    Ok((m, artifacts))
}

fn add_core_rows(m: &mut IntegerProgram, a: &mut ModelArtifacts) -> Result<()> {
    let n = a.variant;
    let (k_count, l_count, slots) = (a.num_crops, a.num_fields, a.num_slots());

    // Field degree: every served field has two incident legs in its crop tour.
    for k in 0..k_count {
        let mut rows = Vec::with_capacity(l_count);
        for l in 0..l_count {
            let mut e = LinExpr::new();
            for s in 0..slots {
                e.add_term(a.x_out[k][s][l], 1.0);
                if let Some(x_in) = &a.x_in {
                    e.add_term(x_in[k][s][l], 1.0);
                }
            }
            for j in 0..l_count {
                if j != l {
                    e.add_expr(&a.edge_expr(k, l, j), 1.0);
                }
            }
            e.add_term(a.delta[k][l], -2.0);
            rows.push(m.add_constraint_in("degree", &e, Relation::Eq, 0.0)?);
        }
        a.degree_rows.push(rows);
    }

    for l in 0..l_count {
        let e = LinExpr::sum((0..k_count).map(|k| a.delta[k][l]));
        a.uniqueness_rows
            .push(m.add_constraint_in("uniqueness", &e, Relation::Eq, 1.0)?);
    }

    // Arc pairs carry one connection at most.
    for k in 0..k_count {
        for i in 0..l_count {
            for j in (i + 1)..l_count {
                if let Some(EdgeVar::Arcs { forward, backward }) = a.edge(k, i, j) {
                    m.add_constraint_in(
                        "arc",
                        &LinExpr::from(forward).term(backward, 1.0),
                        Relation::Le,
                        1.0,
                    )?;
                }
            }
        }
    }

    let all_out = |a: &ModelArtifacts, s: usize| -> LinExpr {
        let mut e = LinExpr::new();
        for k in 0..k_count {
            for l in 0..l_count {
                e.add_term(a.x_out[k][s][l], 1.0);
            }
        }
        e
    };

    match n {
        1 | 2 => {
            let mut e = all_out(a, 0);
            e.add_term(a.gamma.unwrap(), -2.0);
            m.add_constraint_in("depot", &e, Relation::Eq, 0.0)?;
        }
        3 | 4 => {
            let p = a.p.clone().unwrap();
            let xi = a.xi.clone().unwrap();
            let gamma = a.gamma.unwrap();
            for s in 0..slots {
                let mut e = all_out(a, s);
                if let Some(x_in) = &a.x_in {
                    for k in 0..k_count {
                        for l in 0..l_count {
                            e.add_term(x_in[k][s][l], 1.0);
                        }
                    }
                }
                e.add_term(p[s], -2.0);
                m.add_constraint_in("depot", &e, Relation::Eq, 0.0)?;
            }
            m.add_constraint_in(
                "depot",
                &LinExpr::sum(xi.iter().copied()),
                Relation::Eq,
                1.0,
            )?;
            for s in 0..slots {
                let rows = add_conditional_value(m, p[s], xi[s], &LinExpr::from(gamma))?;
                for r in &rows {
                    m.set_group(*r, "depot");
                }
                a.p_rows.push(rows);
            }
            if n == 4 {
                add_first_last_rows(m, a)?;
            }
        }
        5 | 6 => {
            for k in 0..k_count {
                let e = LinExpr::sum((0..l_count).map(|l| a.x_out[k][0][l]));
                m.add_constraint_in("depot", &e, Relation::Eq, 2.0)?;
            }
        }
        7 | 8 => {
            let xi = a.xi.clone().unwrap();
            let rhs_scale = if n == 7 { 2.0 } else { 1.0 };
            for s in 0..slots {
                for k in 0..k_count {
                    let mut e = LinExpr::sum((0..l_count).map(|l| a.x_out[k][s][l]));
                    e.add_term(xi[s], -rhs_scale);
                    m.add_constraint_in("depot", &e, Relation::Eq, 0.0)?;
                    if let Some(x_in) = &a.x_in {
                        let mut e = LinExpr::sum((0..l_count).map(|l| x_in[k][s][l]));
                        e.add_term(xi[s], -1.0);
                        m.add_constraint_in("depot", &e, Relation::Eq, 0.0)?;
                    }
                }
            }
            m.add_constraint_in(
                "depot",
                &LinExpr::sum(xi.iter().copied()),
                Relation::Eq,
                1.0,
            )?;
        }
        _ => unreachable!(),
    }

    if enforces_all_crops(n) {
        for k in 0..k_count {
            let e = LinExpr::sum(a.delta[k].iter().copied());
            a.crop_used_rows
                .push(m.add_constraint_in("crops", &e, Relation::Ge, 1.0)?);
        }
    }
    Ok(())
}

/// Active-crop indicators, first/last active crop and the products `v`, `w`.
fn add_first_last_rows(m: &mut IntegerProgram, a: &mut ModelArtifacts) -> Result<()> {
    let (k_count, l_count, slots) = (a.num_crops, a.num_fields, a.num_slots());
    let alpha = a.alpha.clone().unwrap();
    let af = a.alpha_first.clone().unwrap();
    let bl = a.beta_last.clone().unwrap();
    let xi = a.xi.clone().unwrap();
    let x_in = a.x_in.clone().unwrap();
    let v = a.v.clone().unwrap();
    let w = a.w.clone().unwrap();

    m.add_constraint_in(
        "order",
        &LinExpr::sum(af.iter().copied()),
        Relation::Eq,
        1.0,
    )?;
    m.add_constraint_in(
        "order",
        &LinExpr::sum(bl.iter().copied()),
        Relation::Eq,
        1.0,
    )?;
    m.add_constraint_in(
        "order",
        &LinExpr::from(af[0]).term(alpha[0], -1.0),
        Relation::Eq,
        0.0,
    )?;
    m.add_constraint_in(
        "order",
        &LinExpr::from(bl[k_count - 1]).term(alpha[k_count - 1], -1.0),
        Relation::Eq,
        0.0,
    )?;
    let mut sum_v = LinExpr::new();
    let mut sum_w = LinExpr::new();
    for k in 0..k_count {
        for s in 0..slots {
            for l in 0..l_count {
                sum_v.add_term(v[k][s][l], 1.0);
                sum_w.add_term(w[k][s][l], 1.0);
            }
        }
    }
    m.add_constraint_in("order", &sum_v, Relation::Eq, 1.0)?;
    m.add_constraint_in("order", &sum_w, Relation::Eq, 1.0)?;
    for s in 0..slots {
        for k in 0..k_count {
            let mut e = LinExpr::sum((0..l_count).map(|l| a.x_out[k][s][l]));
            e.add_term(xi[s], -1.0);
            m.add_constraint_in("depot", &e, Relation::Eq, 0.0)?;
            let mut e = LinExpr::sum((0..l_count).map(|l| x_in[k][s][l]));
            e.add_term(xi[s], -1.0);
            m.add_constraint_in("depot", &e, Relation::Eq, 0.0)?;
        }
    }
    for k in 0..k_count {
        let mut f = LinExpr::constant(1.0);
        for l in 0..l_count {
            f.add_term(a.delta[k][l], -1.0);
        }
        add_reified_leq(m, alpha[k], &f, DEFAULT_EPSILON)?;
    }
    for k in 1..k_count {
        let mut none_before = LinExpr::constant(1.0);
        for &t in &af[..k] {
            none_before.add_term(t, -1.0);
        }
        add_and_of_exprs(m, &LinExpr::from(alpha[k]), &none_before, af[k])?;
    }
    for k in (0..k_count.saturating_sub(1)).rev() {
        let mut none_after = LinExpr::constant(1.0);
        for &t in &bl[k + 1..] {
            none_after.add_term(t, -1.0);
        }
        add_and_of_exprs(m, &LinExpr::from(alpha[k]), &none_after, bl[k])?;
    }
    for k in 0..k_count {
        for s in 0..slots {
            for l in 0..l_count {
                add_and_of_exprs(
                    m,
                    &LinExpr::from(af[k]),
                    &LinExpr::from(a.x_out[k][s][l]),
                    v[k][s][l],
                )?;
                add_and_of_exprs(
                    m,
                    &LinExpr::from(bl[k]),
                    &LinExpr::from(x_in[k][s][l]),
                    w[k][s][l],
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
