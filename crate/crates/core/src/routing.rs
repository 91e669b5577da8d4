//! Open-path TSP between fixed endpoints and the expansion of cluster
//! sequences into field sequences.
//!
//! No local search runs after stitching.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::milp::{solve, IntegerProgram, LinExpr, Relation, SolveLimits, Status, VarId};

/// Cap on separation rounds of one open-path solve.
pub const MAX_TSP_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct OpenTour {
    /// Vertex order from start to end.
    pub order: Vec<usize>,
    pub length: f64,
    /// IP solves spent (0 when the path was forced).
    pub iterations: usize,
    pub elapsed: Duration,
}

fn check_matrix(costs: &[Vec<f64>]) -> Result<()> {
    let n = costs.len();
    for (i, row) in costs.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Shape(format!(
                "cost row {i} has {} entries for {n} vertices",
                row.len()
            )));
        }
        for (j, &c) in row.iter().enumerate() {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::Validation(format!(
                    "cost ({i}, {j}) = {c} is not a non-negative number"
                )));
            }
            if (c - costs[j][i]).abs() > 1e-9 * c.abs().max(1.0) {
                return Err(Error::Validation(format!(
                    "costs ({i}, {j}) and ({j}, {i}) differ"
                )));
            }
        }
    }
    Ok(())
}

pub fn path_length(costs: &[Vec<f64>], order: &[usize]) -> f64 {
    order.windows(2).map(|w| costs[w[0]][w[1]]).sum()
}

/// Shortest Hamiltonian path from `start` to `end` over a symmetric matrix,
/// solved exactly as an integer program with lazily separated subtour cuts.
pub fn solve_open_tsp(costs: &[Vec<f64>], start: usize, end: usize) -> Result<OpenTour> {
    let started = Instant::now();
    check_matrix(costs)?;
    let n = costs.len();
    if n == 0 {
        return Err(Error::Validation("open path over zero vertices".into()));
    }
    if start >= n || end >= n {
        return Err(Error::Validation(format!(
            "endpoint out of range for {n} vertices"
        )));
    }
    if n == 1 {
        return Ok(OpenTour {
            order: vec![0],
            length: 0.0,
            iterations: 0,
            elapsed: started.elapsed(),
        });
    }
    if start == end {
        return Err(Error::Validation(
            "start and end must differ for two or more vertices".into(),
        ));
    }
    if n <= 3 {
        let mut order = vec![start];
        order.extend((0..n).filter(|&v| v != start && v != end));
        order.push(end);
        return Ok(OpenTour {
            length: path_length(costs, &order),
            order,
            iterations: 0,
            elapsed: started.elapsed(),
        });
    }

    let mut m = IntegerProgram::new();
    let mut x = vec![vec![None::<VarId>; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = m.add_binary(format!("x_{i}_{j}"));
            m.set_objective_coeff(v, costs[i][j]);
            x[i][j] = Some(v);
            x[j][i] = Some(v);
        }
    }
    for i in 0..n {
        let e = LinExpr::sum((0..n).filter_map(|j| x[i][j]));
        let deg = if i == start || i == end { 1.0 } else { 2.0 };
        m.add_constraint_in("degree", &e, Relation::Eq, deg)?;
    }

    for iteration in 1..=MAX_TSP_ITERATIONS {
        let sol = solve(&m, &SolveLimits::default())?;
        if sol.status != Status::Optimal {
            return Err(Error::Solver(format!(
                "open path solve ended with {:?}",
                sol.status
            )));
        }
        let on = |i: usize, j: usize| x[i][j].is_some_and(|v| sol.values[v.0] > 0.5);
        // Walk from the start; every vertex left over lies on a cycle.
        let mut seen = vec![false; n];
        let mut order = vec![start];
        seen[start] = true;
        let mut cur = start;
        while let Some(next) = (0..n).find(|&j| !seen[j] && on(cur, j)) {
            seen[next] = true;
            order.push(next);
            cur = next;
        }
        if order.len() == n {
            return Ok(OpenTour {
                length: path_length(costs, &order),
                order,
                iterations: iteration,
                elapsed: started.elapsed(),
            });
        }
        let mut added = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut idx = 0;
            while idx < comp.len() {
                let u = comp[idx];
                for v in 0..n {
                    if !seen[v] && on(u, v) {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
                idx += 1;
            }
            let mut e = LinExpr::new();
            for (a, &i) in comp.iter().enumerate() {
                for &j in &comp[a + 1..] {
                    e.add_term(x[i][j].unwrap(), 1.0);
                }
            }
            m.add_constraint_in("sec", &e, Relation::Le, comp.len() as f64 - 1.0)?;
            added += 1;
        }
        log::trace!("open path iteration {iteration}: {added} cuts");
    }
    Err(Error::Solver(format!(
        "open path did not converge within {MAX_TSP_ITERATIONS} iterations"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Flipped,
}

/// Field sequence of one crop expanded from its cluster sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchedTour {
    pub fields: Vec<usize>,
    /// Entry leg, field path including inter-cluster links, and exit leg.
    pub length: f64,
    pub tsp_iterations: usize,
    pub tsp_elapsed: Duration,
}

/// Cost inputs for stitching one crop.
pub struct StitchCosts<'a> {
    /// Field-to-field cost.
    pub field: &'a dyn Fn(usize, usize) -> f64,
    /// Depot-to-field cost of the first leg.
    pub entry: &'a dyn Fn(usize) -> f64,
    /// Field-to-depot cost of the last leg.
    pub exit: &'a dyn Fn(usize) -> f64,
}

fn argmin_by(
    candidates: impl Iterator<Item = usize>,
    cost: impl Fn(usize) -> f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for c in candidates {
        let v = cost(c);
        if best.is_none_or(|(b, bv)| v < bv || (v == bv && c < b)) {
            best = Some((c, v));
        }
    }
    best.map(|(c, _)| c)
}

/// Expands `cluster_seq` (taken in the given direction) into a field
/// sequence: entry and exit of the whole tour are the fields nearest to the
/// depot, consecutive clusters are joined through their closest field pair,
/// and each cluster is traversed by an exact open path.
pub fn stitch_crop_tour(
    cluster_seq: &[usize],
    direction: Direction,
    members: &[Vec<usize>],
    costs: &StitchCosts<'_>,
) -> Result<StitchedTour> {
    if cluster_seq.is_empty() {
        return Err(Error::Validation("empty cluster sequence".into()));
    }
    if let Some(&bad) = cluster_seq
        .iter()
        .find(|&&z| z >= members.len() || members[z].is_empty())
    {
        return Err(Error::Validation(format!(
            "cluster {bad} is unknown or empty"
        )));
    }
    let mut seq = cluster_seq.to_vec();
    if direction == Direction::Flipped {
        seq.reverse();
    }
    let t_count = seq.len();
    let mut entry = vec![0usize; t_count];
    let mut exit = vec![0usize; t_count];
    entry[0] = argmin_by(members[seq[0]].iter().copied(), |j| (costs.entry)(j)).unwrap();
    exit[t_count - 1] = argmin_by(members[seq[t_count - 1]].iter().copied(), |j| {
        (costs.exit)(j)
    })
    .unwrap();
    for t in 0..t_count - 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for &e in &members[seq[t]] {
            for &s in &members[seq[t + 1]] {
                let c = (costs.field)(e, s);
                if best.is_none_or(|(be, bs, bc)| c < bc || (c == bc && (e, s) < (be, bs))) {
                    best = Some((e, s, c));
                }
            }
        }
        let (e, s, _) = best.unwrap();
        exit[t] = e;
        entry[t + 1] = s;
    }
    for t in 0..t_count {
        let m = &members[seq[t]];
        if m.len() >= 2 && entry[t] == exit[t] {
            let downstream = |j: usize| {
                if t + 1 < t_count {
                    (costs.field)(j, entry[t + 1])
                } else {
                    (costs.exit)(j)
                }
            };
            exit[t] = argmin_by(m.iter().copied().filter(|&j| j != entry[t]), downstream).unwrap();
        }
    }

    let mut fields = Vec::new();
    let mut length = (costs.entry)(entry[0]);
    let mut tsp_iterations = 0;
    let mut tsp_elapsed = Duration::ZERO;
    for t in 0..t_count {
        let m = &members[seq[t]];
        let path: Vec<usize> = if m.len() == 1 {
            vec![m[0]]
        } else {
            let local: Vec<Vec<f64>> = m
                .iter()
                .map(|&i| {
                    m.iter()
                        .map(|&j| if i == j { 0.0 } else { (costs.field)(i, j) })
                        .collect()
                })
                .collect();
            let s = m.iter().position(|&j| j == entry[t]).unwrap();
            let e = m.iter().position(|&j| j == exit[t]).unwrap();
            let tour = solve_open_tsp(&local, s, e)?;
            tsp_iterations += tour.iterations;
            tsp_elapsed += tour.elapsed;
            tour.order.iter().map(|&i| m[i]).collect()
        };
        if let Some(&prev) = fields.last() {
            length += (costs.field)(prev, path[0]);
        }
        length += path
            .windows(2)
            .map(|w| (costs.field)(w[0], w[1]))
            .sum::<f64>();
        fields.extend(path);
    }
    length += (costs.exit)(*fields.last().unwrap());
    Ok(StitchedTour {
        fields,
        length,
        tsp_iterations,
        tsp_elapsed,
    })
}

/// The shorter of the two stitched tours; forward on ties.
pub fn pick_direction(forward: StitchedTour, flipped: StitchedTour) -> (StitchedTour, Direction) {
    if flipped.length < forward.length {
        (flipped, Direction::Flipped)
    } else {
        (forward, Direction::Forward)
    }
}
