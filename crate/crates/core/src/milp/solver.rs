//! Reference branch-and-bound backend.
//!
//! Every node solves the LP relaxation with `microlp` (all columns declared
//! continuous). Children are warm-started from the parent's optimal basis by
//! adding the branching bound as a row, or by fixing the column when the bound
//! collapses its domain. Open nodes are explored best-bound first, FIFO among
//! equal bounds; branching picks the most fractional integer column, lowest
//! index on ties. A rounding dive from the root and from every
//! `DIVE_INTERVAL`-th node seeds incumbents; it never changes the proven optimum.
//! Open nodes keep their warm-start LP only while the queue is short.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::model::{IntegerProgram, Relation};
use crate::error::{Error, Result};

pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;
const DIVE_INTERVAL: usize = 200;
const MAX_WARM_OPEN_NODES: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// A node or time limit stopped the search; values hold the best incumbent if any.
    IterationLimit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveLimits {
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// One value per column; empty when no integer-feasible point is known.
    pub values: Vec<f64>,
    /// Objective including the model's constant; `+∞` without an incumbent.
    pub objective: f64,
    /// Lowest bound among unexplored nodes (equals `objective` when optimal).
    pub best_bound: f64,
    /// LP relaxations solved.
    pub nodes: usize,
}

impl Solution {
    pub fn has_values(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, v: super::VarId) -> f64 {
        self.values[v.0]
    }
}

/// One evaluated branch-and-bound node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// LP relaxation objective, including the model constant.
    pub bound: f64,
    pub integral: bool,
}

struct OpenNode {
    bound: f64,
    seq: u64,
    id: usize,
    depth: usize,
    branch_var: usize,
    branch_value: f64,
    bounds: Vec<(f64, f64)>,
    lp: Option<microlp::Solution>,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    // BinaryHeap pops the maximum: lowest bound first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum LpResult {
    Optimal(microlp::Solution),
    Infeasible,
    Unbounded,
}

fn prune_tolerance(incumbent: f64) -> f64 {
    1e-9 * incumbent.abs().max(1.0) + 1e-7
}

fn cmp_op(r: Relation) -> ComparisonOp {
    match r {
        Relation::Le => ComparisonOp::Le,
        Relation::Eq => ComparisonOp::Eq,
        Relation::Ge => ComparisonOp::Ge,
    }
}

fn lp_status(
    outcome: std::result::Result<microlp::SolveOutcome, microlp::Error>,
) -> Result<LpResult> {
    match outcome {
        Ok(microlp::SolveOutcome::Solution(s)) => Ok(LpResult::Optimal(s)),
        Ok(microlp::SolveOutcome::Interrupted(_)) => {
            Err(Error::Solver("LP solve interrupted".into()))
        }
        Err(microlp::Error::Infeasible) => Ok(LpResult::Infeasible),
        Err(microlp::Error::Unbounded) => Ok(LpResult::Unbounded),
        Err(e) => Err(Error::Solver(e.to_string())),
    }
}

/// Fresh LP over `bounds`; `Ok(None)` when an empty row is already violated.
fn build_lp(
    model: &IntegerProgram,
    bounds: &[(f64, f64)],
) -> Option<(Problem, Vec<microlp::Variable>)> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<microlp::Variable> = bounds
        .iter()
        .zip(model.objective())
        .map(|(&(lo, hi), &c)| lp.add_var(c, (lo, hi)))
        .collect();
    for row in model.constraints() {
        if row.terms.is_empty() {
            let ok = match row.relation {
                Relation::Le => 0.0 <= row.rhs + 1e-9,
                Relation::Ge => 0.0 >= row.rhs - 1e-9,
                Relation::Eq => row.rhs.abs() <= 1e-9,
            };
            if !ok {
                return None;
            }
            continue;
        }
        let expr: Vec<(microlp::Variable, f64)> =
            row.terms.iter().map(|&(v, c)| (vars[v.0], c)).collect();
        lp.add_constraint(expr.as_slice(), cmp_op(row.relation), row.rhs);
    }
    Some((lp, vars))
}

fn solve_fresh(
    model: &IntegerProgram,
    bounds: &[(f64, f64)],
) -> Result<(LpResult, Vec<microlp::Variable>)> {
    match build_lp(model, bounds) {
        None => Ok((LpResult::Infeasible, Vec::new())),
        Some((lp, vars)) => Ok((lp_status(lp.solve())?, vars)),
    }
}

/// Most fractional integer column, lowest index on ties.
fn pick_branch(model: &IntegerProgram, values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, var) in model.variables().iter().enumerate() {
        if !var.integer {
            continue;
        }
        let x = values[i];
        let frac = x - x.floor();
        let dist = frac.min(1.0 - frac);
        if dist > INTEGRALITY_TOLERANCE && best.is_none_or(|(_, _, d)| dist > d) {
            best = Some((i, x, dist));
        }
    }
    best.map(|(i, x, _)| (i, x))
}

fn lp_values(lp: &microlp::Solution, vars: &[microlp::Variable]) -> Vec<f64> {
    vars.iter().map(|&v| lp.var_value_raw(v)).collect()
}

fn rounded(model: &IntegerProgram, values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .zip(model.variables())
        .map(|(&x, v)| if v.integer { x.round() } else { x })
        .collect()
}

/// Fixes the most fractional column to its nearest integer (the other side on
/// failure) until the LP turns integral; returns the rounded point if it does.
fn dive(
    model: &IntegerProgram,
    vars: &[microlp::Variable],
    start: &microlp::Solution,
) -> Option<Vec<f64>> {
    let mut lp = start.clone();
    let mut values = lp_values(&lp, vars);
    for _ in 0..model.num_vars() {
        let Some((j, x)) = pick_branch(model, &values) else {
            return Some(rounded(model, &values));
        };
        let near = x.round();
        let far = if near > x { x.floor() } else { x.ceil() };
        let (lo, hi) = (model.variables()[j].lb, model.variables()[j].ub);
        let mut next = None;
        for target in [near, far] {
            if target < lo || target > hi {
                continue;
            }
            if let Ok(microlp::SolveOutcome::Solution(s)) = lp.clone().fix_var(vars[j], target) {
                next = Some(s);
                break;
            }
        }
        lp = next?;
        values = lp_values(&lp, vars);
    }
    None
}

/// Optimum of the LP relaxation (integrality dropped); `values` are raw LP values.
pub fn solve_relaxation(model: &IntegerProgram) -> Result<Solution> {
    let bounds: Vec<(f64, f64)> = model.variables().iter().map(|v| (v.lb, v.ub)).collect();
    let (res, vars) = solve_fresh(model, &bounds)?;
    let (status, values, objective) = match res {
        LpResult::Infeasible => (Status::Infeasible, Vec::new(), f64::INFINITY),
        LpResult::Unbounded => (Status::Unbounded, Vec::new(), f64::NEG_INFINITY),
        LpResult::Optimal(s) => {
            let values = lp_values(&s, &vars);
            (
                Status::Optimal,
                values,
                s.objective() + model.objective_constant(),
            )
        }
    };
    Ok(Solution {
        status,
        values,
        objective,
        best_bound: objective,
        nodes: 1,
    })
}

/// Solves `model` to proven optimality unless a limit intervenes.
pub fn solve(model: &IntegerProgram, limits: &SolveLimits) -> Result<Solution> {
    run(model, limits, None)
}

/// As [`solve`], additionally returning every evaluated node.
pub fn solve_traced(
    model: &IntegerProgram,
    limits: &SolveLimits,
) -> Result<(Solution, Vec<NodeRecord>)> {
    let mut trace = Vec::new();
    let sol = run(model, limits, Some(&mut trace))?;
    Ok((sol, trace))
}

fn run(
    model: &IntegerProgram,
    limits: &SolveLimits,
    mut trace: Option<&mut Vec<NodeRecord>>,
) -> Result<Solution> {
    let started = Instant::now();
    let constant = model.objective_constant();
    let root_bounds: Vec<(f64, f64)> = model.variables().iter().map(|v| (v.lb, v.ub)).collect();
    let infeasible = |nodes| Solution {
        status: Status::Infeasible,
        values: Vec::new(),
        objective: f64::INFINITY,
        best_bound: f64::INFINITY,
        nodes,
    };

    if model.num_vars() == 0 {
        return Ok(match build_lp(model, &root_bounds) {
            None => infeasible(0),
            Some(_) => Solution {
                status: Status::Optimal,
                values: Vec::new(),
                objective: constant,
                best_bound: constant,
                nodes: 0,
            },
        });
    }

    let (root, vars) = solve_fresh(model, &root_bounds)?;
    let mut nodes = 1usize;
    let root_lp = match root {
        LpResult::Infeasible => return Ok(infeasible(nodes)),
        LpResult::Unbounded => {
            return Ok(Solution {
                status: Status::Unbounded,
                values: Vec::new(),
                objective: f64::NEG_INFINITY,
                best_bound: f64::NEG_INFINITY,
                nodes,
            })
        }
        LpResult::Optimal(s) => s,
    };

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut next_id = 1usize;

    let root_values = lp_values(&root_lp, &vars);
    let root_bound = root_lp.objective() + constant;
    let root_branch = pick_branch(model, &root_values);
    if let Some(t) = trace.as_deref_mut() {
        t.push(NodeRecord {
            id: 0,
            parent: None,
            depth: 0,
            bound: root_bound,
            integral: root_branch.is_none(),
        });
    }
    match root_branch {
        None => {
            let vals = rounded(model, &root_values);
            let obj = model.evaluate_objective(&vals);
            incumbent = Some((obj, vals));
        }
        Some((j, x)) => {
            if let Some(vals) = dive(model, &vars, &root_lp).filter(|v| model.is_feasible(v, 1e-6))
            {
                incumbent = Some((model.evaluate_objective(&vals), vals));
            }
            heap.push(OpenNode {
                bound: root_bound,
                seq,
                id: 0,
                depth: 0,
                branch_var: j,
                branch_value: x,
                bounds: root_bounds,
                lp: Some(root_lp),
            });
        }
    }
    let mut expanded = 0usize;

    let mut hit_limit = false;
    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - prune_tolerance(*inc) {
                // Best-first: every remaining node is at least as bad.
                heap.clear();
                break;
            }
        }
        let over_nodes = limits.node_limit.is_some_and(|n| nodes >= n);
        let over_time = limits.time_limit.is_some_and(|t| started.elapsed() >= t);
        if over_nodes || over_time {
            heap.push(node);
            hit_limit = true;
            break;
        }

        let j = node.branch_var;
        let x = node.branch_value;
        let (lo, hi) = node.bounds[j];
        let down = (lo, x.floor());
        let up = (x.ceil(), hi);
        let node_lp = match node.lp {
            Some(lp) => lp,
            None => match solve_fresh(model, &node.bounds)?.0 {
                LpResult::Optimal(s) => s,
                _ => return Err(Error::Solver("open node LP no longer solvable".into())),
            },
        };
        expanded += 1;
        if expanded % DIVE_INTERVAL == 0 {
            if let Some(vals) = dive(model, &vars, &node_lp).filter(|v| model.is_feasible(v, 1e-6))
            {
                let obj = model.evaluate_objective(&vals);
                if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                    incumbent = Some((obj, vals));
                }
            }
        }
        let mut parent_lp = Some(node_lp);
        for (child_idx, child_range) in [down, up].into_iter().enumerate() {
            let mut bounds = node.bounds.clone();
            bounds[j] = child_range;
            let lp = if child_idx == 0 {
                parent_lp.clone().expect("parent LP present")
            } else {
                parent_lp.take().expect("parent LP present")
            };
            let var = vars[j];
            let warm = if child_range.0 == child_range.1 {
                lp.fix_var(var, child_range.0)
            } else if child_idx == 0 {
                lp.add_constraint(&[(var, 1.0)][..], ComparisonOp::Le, child_range.1)
            } else {
                lp.add_constraint(&[(var, 1.0)][..], ComparisonOp::Ge, child_range.0)
            };
            nodes += 1;
            let result = match lp_status(warm) {
                Ok(r) => r,
                Err(_) => {
                    // Warm start failed numerically; rebuild this node from scratch.
                    log::debug!(
                        "warm-started LP failed at depth {}, re-solving cold",
                        node.depth + 1
                    );
                    solve_fresh(model, &bounds)?.0
                }
            };
            let child_lp = match result {
                LpResult::Infeasible => continue,
                LpResult::Unbounded => {
                    return Err(Error::Solver("bounded LP reported unbounded".into()));
                }
                LpResult::Optimal(s) => s,
            };
            let values = lp_values(&child_lp, &vars);
            let bound = child_lp.objective() + constant;
            let branch = pick_branch(model, &values);
            let id = next_id;
            next_id += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(NodeRecord {
                    id,
                    parent: Some(node.id),
                    depth: node.depth + 1,
                    bound,
                    integral: branch.is_none(),
                });
            }
            if let Some((inc, _)) = &incumbent {
                if bound >= inc - prune_tolerance(*inc) {
                    continue;
                }
            }
            match branch {
                None => {
                    let vals = rounded(model, &values);
                    let obj = model.evaluate_objective(&vals);
                    if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                        incumbent = Some((obj, vals));
                    }
                }
                Some((bj, bx)) => {
                    seq += 1;
                    heap.push(OpenNode {
                        bound,
                        seq,
                        id,
                        depth: node.depth + 1,
                        branch_var: bj,
                        branch_value: bx,
                        bounds,
                        lp: (heap.len() < MAX_WARM_OPEN_NODES).then_some(child_lp),
                    });
                }
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    Ok(match (hit_limit, incumbent) {
        (true, inc) => {
            let (objective, values) = inc.unwrap_or((f64::INFINITY, Vec::new()));
            Solution {
                status: Status::IterationLimit,
                best_bound: open_bound.min(objective),
                values,
                objective,
                nodes,
            }
        }
        (false, Some((objective, values))) => Solution {
            status: Status::Optimal,
            values,
            objective,
            best_bound: objective,
            nodes,
        },
        (false, None) => infeasible(nodes),
    })
}
