use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Column index in an [`IntegerProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Row index in an [`IntegerProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub integer: bool,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        self.integer && self.lb >= 0.0 && self.ub <= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// Affine expression `Σ a_i x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    /// Builder form of [`LinExpr::add_term`].
    pub fn term(mut self, var: VarId, coeff: f64) -> Self {
        self.terms.push((var, coeff));
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_term(&mut self, var: VarId, coeff: f64) {
        self.terms.push((var, coeff));
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
    }

    pub fn sum<I: IntoIterator<Item = VarId>>(vars: I) -> Self {
        LinExpr {
            terms: vars.into_iter().map(|v| (v, 1.0)).collect(),
            constant: 0.0,
        }
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }

    /// Merges duplicate columns and drops zero coefficients.
    pub fn normalized(&self) -> LinExpr {
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *merged.entry(v).or_insert(0.0) += c;
        }
        LinExpr {
            terms: merged.into_iter().filter(|&(_, c)| c != 0.0).collect(),
            constant: self.constant,
        }
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::new().term(v, 1.0)
    }
}

/// `terms relation rhs`, with all constants moved to the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    /// Label of the constraint family (degree, uniqueness, sec, rotation, ...).
    pub group: String,
}

impl Constraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Bounded mixed-integer linear program, always minimized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegerProgram {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
    objective_constant: f64,
}

impl IntegerProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lb: f64,
        ub: f64,
        integer: bool,
    ) -> Result<VarId> {
        let name = name.into();
        if !lb.is_finite() || !ub.is_finite() || lb > ub {
            return Err(Error::Model(format!(
                "variable {name} needs finite bounds with lb <= ub, got [{lb}, {ub}]"
            )));
        }
        self.variables.push(Variable {
            name,
            lb,
            ub,
            integer,
        });
        self.objective.push(0.0);
        Ok(VarId(self.variables.len() - 1))
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, true)
            .expect("binary bounds are valid")
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lb: i64, ub: i64) -> Result<VarId> {
        self.add_var(name, lb as f64, ub as f64, true)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> Result<VarId> {
        self.add_var(name, lb, ub, false)
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: ConstraintId) -> &Constraint {
        &self.constraints[id.0]
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn set_objective_constant(&mut self, c: f64) {
        self.objective_constant = c;
    }

    pub fn add_objective_constant(&mut self, c: f64) {
        self.objective_constant += c;
    }

    pub fn set_objective_coeff(&mut self, v: VarId, c: f64) {
        self.objective[v.0] = c;
    }

    pub fn add_objective_coeff(&mut self, v: VarId, c: f64) {
        self.objective[v.0] += c;
    }

    pub fn set_bounds(&mut self, v: VarId, lb: f64, ub: f64) -> Result<()> {
        if v.0 >= self.variables.len() {
            return Err(Error::Model(format!("unknown variable {}", v.0)));
        }
        if !lb.is_finite() || !ub.is_finite() || lb > ub {
            return Err(Error::Model(format!(
                "invalid bounds [{lb}, {ub}] for {}",
                self.variables[v.0].name
            )));
        }
        self.variables[v.0].lb = lb;
        self.variables[v.0].ub = ub;
        Ok(())
    }

    /// Pins `v` to a single value.
    pub fn fix(&mut self, v: VarId, value: f64) -> Result<()> {
        self.set_bounds(v, value, value)
    }

    fn check_expr(&self, expr: &LinExpr) -> Result<()> {
        if let Some(&(v, _)) = expr.terms.iter().find(|(v, _)| v.0 >= self.variables.len()) {
            return Err(Error::Model(format!("column {} out of range", v.0)));
        }
        if expr.terms.iter().any(|(_, c)| !c.is_finite()) || !expr.constant.is_finite() {
            return Err(Error::Model("non-finite coefficient".into()));
        }
        Ok(())
    }

    fn make_row(
        &self,
        group: &str,
        expr: &LinExpr,
        relation: Relation,
        rhs: f64,
    ) -> Result<Constraint> {
        self.check_expr(expr)?;
        if !rhs.is_finite() {
            return Err(Error::Model("non-finite right-hand side".into()));
        }
        let norm = expr.normalized();
        Ok(Constraint {
            terms: norm.terms,
            relation,
            rhs: rhs - norm.constant,
            group: group.to_string(),
        })
    }

    pub fn add_constraint(
        &mut self,
        expr: &LinExpr,
        relation: Relation,
        rhs: f64,
    ) -> Result<ConstraintId> {
        self.add_constraint_in("general", expr, relation, rhs)
    }

    pub fn add_constraint_in(
        &mut self,
        group: &str,
        expr: &LinExpr,
        relation: Relation,
        rhs: f64,
    ) -> Result<ConstraintId> {
        let row = self.make_row(group, expr, relation, rhs)?;
        self.constraints.push(row);
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    /// Overwrites row `id`, keeping its group.
    pub fn replace_constraint(
        &mut self,
        id: ConstraintId,
        expr: &LinExpr,
        relation: Relation,
        rhs: f64,
    ) -> Result<()> {
        let group = self
            .constraints
            .get(id.0)
            .ok_or_else(|| Error::Model(format!("unknown row {}", id.0)))?
            .group
            .clone();
        self.constraints[id.0] = self.make_row(&group, expr, relation, rhs)?;
        Ok(())
    }

    /// Copy of the model without the rows of `group` (row ids are not preserved).
    pub fn without_group(&self, group: &str) -> IntegerProgram {
        let mut copy = self.clone();
        copy.constraints.retain(|c| c.group != group);
        copy
    }

    pub fn set_group(&mut self, id: ConstraintId, group: &str) {
        self.constraints[id.0].group = group.to_string();
    }

    pub fn set_relation(&mut self, id: ConstraintId, relation: Relation) -> Result<()> {
        let row = self
            .constraints
            .get_mut(id.0)
            .ok_or_else(|| Error::Model(format!("unknown row {}", id.0)))?;
        row.relation = relation;
        Ok(())
    }

    /// Interval-arithmetic range of `expr` over the variable bounds.
    pub fn expr_bounds(&self, expr: &LinExpr) -> Result<(f64, f64)> {
        self.check_expr(expr)?;
        let mut lo = expr.constant;
        let mut hi = expr.constant;
        for &(v, c) in &expr.terms {
            let var = &self.variables[v.0];
            if c >= 0.0 {
                lo += c * var.lb;
                hi += c * var.ub;
            } else {
                lo += c * var.ub;
                hi += c * var.lb;
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Model("expression has unbounded range".into()));
        }
        Ok((lo, hi))
    }

    pub fn count_relation(&self, relation: Relation) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.relation == relation)
            .count()
    }

    pub fn count_group(&self, group: &str) -> usize {
        self.constraints.iter().filter(|c| c.group == group).count()
    }

    pub fn evaluate_objective(&self, values: &[f64]) -> f64 {
        self.objective_constant
            + self
                .objective
                .iter()
                .zip(values)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }

    /// Rows violated by more than `tol`, plus bound and integrality checks.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if values.len() != self.variables.len() {
            out.push(format!(
                "{} values for {} variables",
                values.len(),
                self.variables.len()
            ));
            return out;
        }
        for (var, &x) in self.variables.iter().zip(values) {
            if x < var.lb - tol || x > var.ub + tol {
                out.push(format!(
                    "{} = {x} outside [{}, {}]",
                    var.name, var.lb, var.ub
                ));
            }
            if var.integer && (x - x.round()).abs() > tol {
                out.push(format!("{} = {x} is fractional", var.name));
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            let v = row.violation(values);
            if v > tol {
                out.push(format!("row {i} ({}) violated by {v}", row.group));
            }
        }
        out
    }

    pub fn is_feasible(&self, values: &[f64], tol: f64) -> bool {
        self.violations(values, tol).is_empty()
    }

    /// CPLEX-LP text of the model. Column names are sanitized to the
    /// format's identifier alphabet; rows are named `r<index>`.
    pub fn to_lp_format(&self) -> String {
        let names: Vec<String> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| lp_name(&v.name, i))
            .collect();
        let mut s = String::new();
        let _ = writeln!(s, "\\ objective constant {}", self.objective_constant);
        let _ = writeln!(s, "Minimize");
        let obj: Vec<(VarId, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (VarId(i), *c))
            .collect();
        let _ = writeln!(s, " obj: {}", lp_terms(&obj, &names));
        let _ = writeln!(s, "Subject To");
        for (i, row) in self.constraints.iter().enumerate() {
            let op = match row.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(
                s,
                " r{i}: {} {op} {}",
                lp_terms(&row.terms, &names),
                row.rhs
            );
        }
        let _ = writeln!(s, "Bounds");
        for (var, name) in self.variables.iter().zip(&names) {
            if var.lb == var.ub {
                let _ = writeln!(s, " {name} = {}", var.lb);
            } else {
                let _ = writeln!(s, " {} <= {name} <= {}", var.lb, var.ub);
            }
        }
        let ints: Vec<&str> = self
            .variables
            .iter()
            .zip(&names)
            .filter(|(v, _)| v.integer)
            .map(|(_, n)| n.as_str())
            .collect();
        if !ints.is_empty() {
            let _ = writeln!(s, "General");
            for chunk in ints.chunks(8) {
                let _ = writeln!(s, " {}", chunk.join(" "));
            }
        }
        let _ = writeln!(s, "End");
        s
    }
}

fn lp_name(name: &str, index: usize) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() || cleaned.starts_with(|c: char| c.is_ascii_digit()) {
        format!("v{index}_{cleaned}")
    } else {
        cleaned
    }
}

fn lp_terms(terms: &[(VarId, f64)], names: &[String]) -> String {
    if terms.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, &(v, c)) in terms.iter().enumerate() {
        let sign = if c < 0.0 { "-" } else { "+" };
        if i == 0 && c >= 0.0 {
            let _ = write!(out, "{} {}", c, names[v.0]);
        } else {
            let _ = write!(out, " {sign} {} {}", c.abs(), names[v.0]);
        }
    }
    out
}
