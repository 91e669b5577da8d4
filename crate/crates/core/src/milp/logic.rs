//! Linearizations of logical statements over bounded integer expressions.

use super::model::{ConstraintId, IntegerProgram, LinExpr, Relation, VarId};
use crate::error::{Error, Result};

/// Strictness margin for `f > 0` on integer-valued expressions.
pub const DEFAULT_EPSILON: f64 = 0.5;

fn require_binary(model: &IntegerProgram, v: VarId) -> Result<()> {
    if v.0 >= model.num_vars() {
        return Err(Error::Model(format!("unknown variable {}", v.0)));
    }
    if !model.variable(v).is_binary() {
        return Err(Error::Model(format!(
            "{} must be a binary variable",
            model.variable(v).name
        )));
    }
    Ok(())
}

/// `b = 1  ⇔  f ≤ 0`, via `f ≤ f_max(1 − b)` and `f ≥ ε + (f_min − ε) b`.
pub fn add_reified_leq(
    model: &mut IntegerProgram,
    b: VarId,
    f: &LinExpr,
    epsilon: f64,
) -> Result<Vec<ConstraintId>> {
    require_binary(model, b)?;
    if !(epsilon > 0.0) {
        return Err(Error::Model(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let (fmin, fmax) = model.expr_bounds(f)?;
    let mut upper = f.clone();
    upper.add_term(b, fmax);
    let r1 = model.add_constraint_in("logic", &upper, Relation::Le, fmax)?;
    let mut lower = f.clone();
    lower.add_term(b, -(fmin - epsilon));
    let r2 = model.add_constraint_in("logic", &lower, Relation::Ge, epsilon)?;
    Ok(vec![r1, r2])
}

/// `b3 = b1 · b2` for binaries.
pub fn add_binary_and(
    model: &mut IntegerProgram,
    b1: VarId,
    b2: VarId,
    b3: VarId,
) -> Result<Vec<ConstraintId>> {
    require_binary(model, b1)?;
    require_binary(model, b2)?;
    require_binary(model, b3)?;
    add_and_of_exprs(model, &LinExpr::from(b1), &LinExpr::from(b2), b3)
}

/// Like [`add_binary_and`] but with operands that are affine expressions taking
/// only the values 0 and 1 on feasible points (for example `1 − α`).
pub(crate) fn add_and_of_exprs(
    model: &mut IntegerProgram,
    e1: &LinExpr,
    e2: &LinExpr,
    b3: VarId,
) -> Result<Vec<ConstraintId>> {
    require_binary(model, b3)?;
    let mut both = e1.clone();
    both.add_expr(e2, 1.0);
    both.add_term(b3, -1.0);
    let r1 = model.add_constraint_in("logic", &both, Relation::Le, 1.0)?;
    let mut first = LinExpr::from(b3);
    first.add_expr(e1, -1.0);
    let r2 = model.add_constraint_in("logic", &first, Relation::Le, 0.0)?;
    let mut second = LinExpr::from(b3);
    second.add_expr(e2, -1.0);
    let r3 = model.add_constraint_in("logic", &second, Relation::Le, 0.0)?;
    Ok(vec![r1, r2, r3])
}

/// `y = f` if `b = 1` and `y = 0` otherwise.
///
/// Rows, in order: `y ≤ f_max b`, `y ≥ f_min b`, `y ≤ f − f_min(1 − b)`,
/// `y ≥ f − f_max(1 − b)`.
pub fn add_conditional_value(
    model: &mut IntegerProgram,
    y: VarId,
    b: VarId,
    f: &LinExpr,
) -> Result<Vec<ConstraintId>> {
    require_binary(model, b)?;
    if y.0 >= model.num_vars() {
        return Err(Error::Model(format!("unknown variable {}", y.0)));
    }
    let (fmin, fmax) = model.expr_bounds(f)?;
    conditional_rows(model, y, b, f, fmin, fmax, None)
}

/// Writes the four conditional-value rows with explicit bounds, either
/// appending them or overwriting `existing`.
pub(crate) fn conditional_rows(
    model: &mut IntegerProgram,
    y: VarId,
    b: VarId,
    f: &LinExpr,
    fmin: f64,
    fmax: f64,
    existing: Option<&[ConstraintId]>,
) -> Result<Vec<ConstraintId>> {
    let rows = [
        (LinExpr::from(y).term(b, -fmax), Relation::Le, 0.0),
        (LinExpr::from(y).term(b, -fmin), Relation::Ge, 0.0),
        {
            // y − f − f_min b ≤ −f_min
            let mut e = LinExpr::from(y);
            e.add_expr(f, -1.0);
            e.add_term(b, -fmin);
            (e, Relation::Le, -fmin)
        },
        {
            let mut e = LinExpr::from(y);
            e.add_expr(f, -1.0);
            e.add_term(b, -fmax);
            (e, Relation::Ge, -fmax)
        },
    ];
    let mut ids = Vec::with_capacity(4);
    for (i, (expr, rel, rhs)) in rows.into_iter().enumerate() {
        match existing {
            Some(old) => {
                model.replace_constraint(old[i], &expr, rel, rhs)?;
                ids.push(old[i]);
            }
            None => ids.push(model.add_constraint_in("logic", &expr, rel, rhs)?),
        }
    }
    Ok(ids)
}
