use std::time::{Duration, Instant};

use super::ModelArtifacts;
use crate::error::{Error, Result};
use crate::milp::{
    solve, IntegerProgram, LinExpr, Relation, Solution, SolveLimits, Status, INTEGRALITY_TOLERANCE,
};

/// Subtour elimination cut `Σ_{i<j ∈ S} x_ij^k ≤ |S| − 1` over field set `S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecCut {
    pub crop: usize,
    pub fields: Vec<usize>,
}

impl SecCut {
    pub fn expr(&self, artifacts: &ModelArtifacts) -> LinExpr {
        let mut e = LinExpr::new();
        for (idx, &i) in self.fields.iter().enumerate() {
            for &j in &self.fields[idx + 1..] {
                e.add_expr(&artifacts.edge_expr(self.crop, i, j), 1.0);
            }
        }
        e
    }

    pub fn rhs(&self) -> f64 {
        self.fields.len() as f64 - 1.0
    }

    pub fn is_violated(&self, artifacts: &ModelArtifacts, values: &[f64]) -> bool {
        self.expr(artifacts).evaluate(values) > self.rhs() + 1e-6
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecOutcome {
    pub solution: Solution,
    /// Solves performed, the initial cut-free solve included.
    pub iterations: usize,
    pub converged: bool,
    /// Inequality rows before any cut was added.
    pub initial_inequalities: usize,
    /// Inequality rows of the last model solved.
    pub final_inequalities: usize,
    /// Objective of every solve, in order.
    pub objective_history: Vec<f64>,
    pub elapsed: Duration,
}

fn leg_count(
    artifacts: &ModelArtifacts,
    crop: usize,
    field: usize,
    values: &[f64],
) -> (usize, usize) {
    let mut out = 0usize;
    let mut inn = 0usize;
    for s in 0..artifacts.num_slots() {
        out += values[artifacts.x_out[crop][s][field].0].round().max(0.0) as usize;
        if let Some(x_in) = &artifacts.x_in {
            inn += values[x_in[crop][s][field].0].round().max(0.0) as usize;
        }
    }
    (out, inn)
}

fn served(artifacts: &ModelArtifacts, crop: usize, values: &[f64]) -> Vec<bool> {
    (0..artifacts.num_fields)
        .map(|l| values[artifacts.delta[crop][l].0] > 0.5)
        .collect()
}

fn neighbours(artifacts: &ModelArtifacts, crop: usize, values: &[f64]) -> Vec<Vec<usize>> {
    let l = artifacts.num_fields;
    let mut adj = vec![Vec::new(); l];
    for i in 0..l {
        for j in (i + 1)..l {
            if artifacts.edge_value(crop, i, j, values) > 0.5 {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// Connected components of served fields per crop that have no depot leg.
pub fn separate_subtours(
    model: &IntegerProgram,
    artifacts: &ModelArtifacts,
    values: &[f64],
) -> Result<Vec<SecCut>> {
    if values.len() != model.num_vars() {
        return Err(Error::Shape(format!(
            "{} values for {} columns",
            values.len(),
            model.num_vars()
        )));
    }
    for (var, &x) in model.variables().iter().zip(values) {
        if var.integer && (x - x.round()).abs() > INTEGRALITY_TOLERANCE {
            return Err(Error::Validation(format!(
                "separation needs an integral point, {} = {x}",
                var.name
            )));
        }
    }
    let mut cuts = Vec::new();
    for k in 0..artifacts.num_crops {
        let on = served(artifacts, k, values);
        let adj = neighbours(artifacts, k, values);
        let mut seen = vec![false; artifacts.num_fields];
        for start in 0..artifacts.num_fields {
            if seen[start] || !on[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            let anchored = comp.iter().any(|&f| {
                let (o, i) = leg_count(artifacts, k, f, values);
                o + i > 0
            });
            if !anchored {
                comp.sort_unstable();
                cuts.push(SecCut {
                    crop: k,
                    fields: comp,
                });
            }
        }
    }
    Ok(cuts)
}

/// Solve, separate, add cuts, repeat until no subtour remains or `max_iter`
/// solves have been spent.
pub fn solve_with_secs(
    model: &mut IntegerProgram,
    artifacts: &mut ModelArtifacts,
    max_iter: usize,
    limits: &SolveLimits,
) -> Result<SecOutcome> {
    let started = Instant::now();
    let ineq = |m: &IntegerProgram| m.count_relation(Relation::Le) + m.count_relation(Relation::Ge);
    let initial_inequalities = ineq(model);
    let mut outcome = SecOutcome {
        solution: Solution {
            status: Status::IterationLimit,
            values: Vec::new(),
            objective: f64::INFINITY,
            best_bound: f64::NEG_INFINITY,
            nodes: 0,
        },
        iterations: 0,
        converged: false,
        initial_inequalities,
        final_inequalities: initial_inequalities,
        objective_history: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for iteration in 1..=max_iter {
        let sol = solve(model, limits)?;
        outcome.iterations = iteration;
        outcome.final_inequalities = ineq(model);
        match sol.status {
            Status::Infeasible => {
                return Err(Error::Infeasible(format!(
                    "IP-{} has no feasible point",
                    artifacts.variant
                )))
            }
            Status::Unbounded => return Err(Error::Solver("model is unbounded".into())),
            Status::IterationLimit => {
                outcome.solution = sol;
                outcome.elapsed = started.elapsed();
                return Ok(outcome);
            }
            Status::Optimal => {}
        }
        outcome.objective_history.push(sol.objective);
        let cuts = separate_subtours(model, artifacts, &sol.values)?;
        outcome.solution = sol;
        if cuts.is_empty() {
            outcome.converged = true;
            break;
        }
        log::debug!("SEC iteration {iteration}: {} cuts", cuts.len());
        for cut in cuts {
            model.add_constraint_in("sec", &cut.expr(artifacts), Relation::Le, cut.rhs())?;
            artifacts.sec_pool.push(cut);
        }
    }
    outcome.elapsed = started.elapsed();
    Ok(outcome)
}

/// Ordered field sequence per crop read from an integral solution.
///
/// Depot-anchored walks come first (started from the field holding a depot
/// out-leg, lowest index first); any leftover subtours of a non-converged
/// solution are appended so that every served field appears exactly once.
/// Walks over directed priority arcs are oriented along the arcs.
pub fn extract_tours(artifacts: &ModelArtifacts, values: &[f64]) -> Vec<Vec<usize>> {
    let l = artifacts.num_fields;
    let directed = artifacts.x_in.is_some();
    let mut tours = Vec::with_capacity(artifacts.num_crops);
    for k in 0..artifacts.num_crops {
        let on = served(artifacts, k, values);
        let adj = neighbours(artifacts, k, values);
        let legs: Vec<(usize, usize)> =
            (0..l).map(|f| leg_count(artifacts, k, f, values)).collect();
        let mut seen = vec![false; l];
        let mut order = Vec::new();
        let walk_from = |start: usize, seen: &mut Vec<bool>, order: &mut Vec<usize>| {
            let mut cur = start;
            seen[cur] = true;
            order.push(cur);
            while let Some(&next) = adj[cur].iter().find(|&&n| !seen[n]) {
                seen[next] = true;
                order.push(next);
                cur = next;
            }
        };
        for f in 0..l {
            if on[f] && !seen[f] && legs[f].0 > 0 {
                walk_from(f, &mut seen, &mut order);
            }
        }
        for f in 0..l {
            if on[f] && !seen[f] {
                walk_from(f, &mut seen, &mut order);
            }
        }
        if !directed {
            orient_along_arcs(artifacts, k, values, &mut order);
        }
        tours.push(order);
    }
    tours
}

fn orient_along_arcs(artifacts: &ModelArtifacts, crop: usize, values: &[f64], order: &mut [usize]) {
    let mut agree = 0i32;
    let mut disagree = 0i32;
    for pair in order.windows(2) {
        if let (Some(fw), Some(bw)) = (
            artifacts.arc(crop, pair[0], pair[1]),
            artifacts.arc(crop, pair[1], pair[0]),
        ) {
            if values[fw.0] > 0.5 {
                agree += 1;
            } else if values[bw.0] > 0.5 {
                disagree += 1;
            }
        }
    }
    if disagree > agree {
        order.reverse();
    }
}
