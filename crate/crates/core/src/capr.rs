//! Crop assignment plus routing: cluster the fields, solve IP-n on the
//! clusters, expand the cluster sequences into field tours and account the
//! profit at field level.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::{aggregate, kmeans, Clustering};
use crate::error::{Error, Result};
use crate::formulations::{
    add_agronomic_constraints, build_ip, check_variant, chooses_depot, extract_tours,
    has_directed_legs, relax_service, solve_with_secs, uses_virtual_depot, AgronomicConstraints,
    BuildOptions, Diversification,
};
use crate::harness::RunMetrics;
use crate::instance::{CostModel, Instance};
use crate::milp::{solve, IntegerProgram, Relation, SolveLimits, Status};
use crate::routing::{pick_direction, stitch_crop_tour, Direction, StitchCosts};

pub const DEFAULT_MAX_SEC_ITERATIONS: usize = 200;

const SIDE_GROUPS: [&str; 4] = ["rotation", "diversification", "time", "priority"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOptions {
    /// Depot of variants 1 and 5 when the instance has several.
    pub depot: Option<usize>,
    pub max_sec_iterations: usize,
    pub limits: SolveLimits,
    pub constraints: AgronomicConstraints,
    /// Fields that may be left unserved.
    pub leasable: Vec<usize>,
    /// Explicit cluster per field, replacing k-means.
    pub clusters: Option<Vec<usize>>,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            depot: None,
            max_sec_iterations: DEFAULT_MAX_SEC_ITERATIONS,
            limits: SolveLimits::default(),
            constraints: AgronomicConstraints::default(),
            leasable: Vec::new(),
            clusters: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropTour {
    pub crop: usize,
    pub fields: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarvestPlan {
    pub variant: u8,
    pub k_tilde: usize,
    /// Basis depot; `None` when harvesters leave from their home depots.
    pub depot: Option<usize>,
    pub active_crops: Vec<usize>,
    /// Crop per field, `None` when unserved.
    pub assignment: Vec<Option<usize>>,
    /// One tour per active crop, in crop order.
    pub tours: Vec<CropTour>,
    pub profit_eur: f64,
    pub converged: bool,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentEntry {
    pub field: usize,
    pub crop: Option<usize>,
}

/// Plan exchange format. Tours are keyed by crop index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanJson {
    pub method: String,
    pub k_tilde: usize,
    pub depot: Option<usize>,
    pub active_crops: Vec<usize>,
    pub assignment: Vec<AssignmentEntry>,
    pub tours: BTreeMap<String, Vec<usize>>,
    pub profit_eur: f64,
    pub converged: bool,
    pub metrics: RunMetrics,
}

impl HarvestPlan {
    pub fn method(&self) -> String {
        format!("CApR-{}", self.variant)
    }

    pub fn to_json(&self) -> PlanJson {
        PlanJson {
            method: self.method(),
            k_tilde: self.k_tilde,
            depot: self.depot,
            active_crops: self.active_crops.clone(),
            assignment: self
                .assignment
                .iter()
                .enumerate()
                .map(|(field, &crop)| AssignmentEntry { field, crop })
                .collect(),
            tours: self
                .tours
                .iter()
                .map(|t| (t.crop.to_string(), t.fields.clone()))
                .collect(),
            profit_eur: self.profit_eur,
            converged: self.converged,
            metrics: self.metrics.clone(),
        }
    }

    pub fn from_json(json: &PlanJson) -> Result<Self> {
        let variant: u8 = json
            .method
            .strip_prefix("CApR-")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::Validation(format!("unknown method {:?}", json.method)))?;
        check_variant(variant)?;
        let mut assignment = vec![None; json.assignment.len()];
        for e in &json.assignment {
            let slot = assignment
                .get_mut(e.field)
                .ok_or_else(|| Error::Validation(format!("assignment names field {}", e.field)))?;
            *slot = e.crop;
        }
        let mut tours = json
            .tours
            .iter()
            .map(|(k, fields)| {
                let crop = k.parse().map_err(|_| {
                    Error::Validation(format!("tour key {k:?} is not a crop index"))
                })?;
                Ok(CropTour {
                    crop,
                    fields: fields.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        tours.sort_by_key(|t| t.crop);
        Ok(HarvestPlan {
            variant,
            k_tilde: json.k_tilde,
            depot: json.depot,
            active_crops: json.active_crops.clone(),
            assignment,
            tours,
            profit_eur: json.profit_eur,
            converged: json.converged,
            metrics: json.metrics.clone(),
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json())?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(text)?)
    }
}

/// Depot legs of one crop tour as charged by variant `n`.
struct Legs {
    aggregated_entry: bool,
    aggregated_exit: bool,
}

fn legs(n: u8, crop: usize, active: &[usize]) -> Legs {
    if uses_virtual_depot(n) {
        Legs {
            aggregated_entry: true,
            aggregated_exit: true,
        }
    } else if has_directed_legs(n) {
        Legs {
            aggregated_entry: active.first() == Some(&crop),
            aggregated_exit: active.last() == Some(&crop),
        }
    } else {
        Legs {
            aggregated_entry: false,
            aggregated_exit: false,
        }
    }
}

fn entry_cost(
    costs: &CostModel,
    legs: &Legs,
    depot: Option<usize>,
    crop: usize,
    j: usize,
) -> Result<f64> {
    match (legs.aggregated_entry, depot) {
        (true, _) => Ok(costs.first_leg(crop, j)),
        (false, Some(d)) => Ok(costs.depot_to_field(crop, d, j)),
        (false, None) => Err(Error::Integrity("plan has no basis depot".into())),
    }
}

fn exit_cost(
    costs: &CostModel,
    legs: &Legs,
    depot: Option<usize>,
    crop: usize,
    j: usize,
) -> Result<f64> {
    match (legs.aggregated_exit, depot) {
        (true, _) => Ok(costs.last_leg(crop, j)),
        (false, Some(d)) => Ok(costs.field_to_depot(crop, j, d)),
        (false, None) => Err(Error::Integrity("plan has no basis depot".into())),
    }
}

fn maintenance(inst: &Instance, n: u8, depot: Option<usize>) -> f64 {
    if uses_virtual_depot(n) {
        inst.depots
            .iter()
            .filter(|d| d.harvesters.iter().any(|&h| h > 0))
            .map(|d| d.maintenance_eur)
            .sum()
    } else {
        depot.map_or(0.0, |d| inst.depots[d].maintenance_eur)
    }
}

/// Recomputes the profit of `plan` from the instance alone.
pub fn evaluate_profit(plan: &HarvestPlan, inst: &Instance) -> Result<f64> {
    check_variant(plan.variant)?;
    let (k_count, l_count) = (inst.num_crops(), inst.num_fields());
    if plan.assignment.len() != l_count {
        return Err(Error::Integrity(format!(
            "plan assigns {} fields, instance has {l_count}",
            plan.assignment.len()
        )));
    }
    if let Some(d) = plan.depot {
        if d >= inst.num_depots() {
            return Err(Error::Integrity(format!("unknown depot {d}")));
        }
    }
    let active: BTreeSet<usize> = plan.assignment.iter().flatten().copied().collect();
    if let Some(&k) = active.iter().find(|&&k| k >= k_count) {
        return Err(Error::Integrity(format!("unknown crop {k}")));
    }
    let active: Vec<usize> = active.into_iter().collect();
    if plan.active_crops != active {
        return Err(Error::Integrity(
            "active crops do not match the assignment".into(),
        ));
    }
    let toured: Vec<usize> = plan.tours.iter().map(|t| t.crop).collect();
    if toured != active {
        return Err(Error::Integrity(
            "tours must cover the active crops in crop order".into(),
        ));
    }
    let costs = CostModel::from_instance(inst)?;
    let mut profit = 0.0;
    for (l, crop) in plan.assignment.iter().enumerate() {
        if let Some(k) = crop {
            profit += inst.fields[l].revenue_eur[*k];
        }
    }
    for tour in &plan.tours {
        let mut expect: Vec<usize> = (0..l_count)
            .filter(|&l| plan.assignment[l] == Some(tour.crop))
            .collect();
        let mut got = tour.fields.clone();
        got.sort_unstable();
        expect.sort_unstable();
        if got != expect {
            return Err(Error::Integrity(format!(
                "tour of crop {} does not visit exactly its assigned fields",
                tour.crop
            )));
        }
        let lg = legs(plan.variant, tour.crop, &active);
        let k = tour.crop;
        profit -= entry_cost(&costs, &lg, plan.depot, k, tour.fields[0])?;
        profit -= tour
            .fields
            .windows(2)
            .map(|w| costs.field(k, w[0], w[1]))
            .sum::<f64>();
        profit -= exit_cost(&costs, &lg, plan.depot, k, *tour.fields.last().unwrap())?;
    }
    profit -= maintenance(inst, plan.variant, plan.depot);
    profit -= inst.crops.fixed_cost_eur * active.len() as f64;
    Ok(profit)
}

fn is_identity(c: &Clustering) -> bool {
    c.assignment.iter().enumerate().all(|(l, &z)| l == z) && c.k() == c.assignment.len()
}

/// Restates field-level side constraints on clusters: a forbidden pair
/// forbids the whole cluster, diversification weights add up. Time and
/// priority rows need one cluster per field.
fn cluster_constraints(
    rules: &AgronomicConstraints,
    c: &Clustering,
    l_count: usize,
) -> Result<AgronomicConstraints> {
    if is_identity(c) {
        return Ok(rules.clone());
    }
    if rules.time.is_some() || !rules.priority.is_empty() {
        return Err(Error::Validation(
            "time and priority constraints need one cluster per field".into(),
        ));
    }
    let mut rotation: Vec<(usize, usize)> = Vec::new();
    for &(l, k) in &rules.rotation_forbidden {
        if l >= l_count {
            return Err(Error::Validation(format!(
                "rotation pair ({l}, {k}) out of range"
            )));
        }
        let pair = (c.assignment[l], k);
        if !rotation.contains(&pair) {
            rotation.push(pair);
        }
    }
    let diversification = match &rules.diversification {
        Some(div) => {
            if div.weights.len() != l_count {
                return Err(Error::Shape("diversification weights".into()));
            }
            let k_count = div.weights.first().map_or(0, Vec::len);
            let weights = c
                .members
                .iter()
                .map(|m| {
                    (0..k_count)
                        .map(|k| m.iter().map(|&l| div.weights[l][k]).sum())
                        .collect()
                })
                .collect();
            Some(Diversification {
                weights,
                bounds: div.bounds.clone(),
            })
        }
        None => None,
    };
    Ok(AgronomicConstraints {
        rotation_forbidden: rotation,
        diversification,
        time: None,
        priority: Vec::new(),
    })
}

/// Side-constraint groups whose removal alone makes the model feasible
/// (all present groups when no single one does).
fn diagnose(model: &IntegerProgram, limits: &SolveLimits) -> Vec<&'static str> {
    let present: Vec<&'static str> = SIDE_GROUPS
        .into_iter()
        .filter(|g| model.count_group(g) > 0)
        .collect();
    let culprits: Vec<&'static str> = present
        .iter()
        .copied()
        .filter(|g| {
            solve(&model.without_group(g), limits).is_ok_and(|s| s.status != Status::Infeasible)
        })
        .collect();
    if culprits.is_empty() {
        present
    } else {
        culprits
    }
}

/// Runs the full pipeline with `k_tilde` clusters (`k_tilde ≥ L` solves the
/// field-level IP directly).
pub fn plan(
    inst: &Instance,
    n: u8,
    k_tilde: usize,
    seed: u64,
    options: &PlanOptions,
) -> Result<HarvestPlan> {
    check_variant(n)?;
    inst.ensure_valid()?;
    if k_tilde == 0 {
        return Err(Error::Validation("k_tilde must be at least 1".into()));
    }
    let l_count = inst.num_fields();
    if l_count == 0 {
        return Err(Error::Validation("instance has no fields".into()));
    }
    let clustering = match &options.clusters {
        Some(a) => {
            let k = a.iter().max().map_or(0, |m| m + 1);
            Clustering::from_assignment(&inst.fields, k, a)?
        }
        None => kmeans(&inst.fields, k_tilde, seed)?,
    };
    let clustered = aggregate(&clustering, inst)?;
    let cinst = &clustered.instance;
    let ccosts = CostModel::from_instance(cinst)?;
    let rules = cluster_constraints(&options.constraints, &clustering, l_count)?;
    let leasable: BTreeSet<usize> = options.leasable.iter().copied().collect();
    if let Some(&bad) = leasable.iter().find(|&&l| l >= l_count) {
        return Err(Error::Validation(format!("unknown field id {bad}")));
    }
    let relaxed: Vec<usize> = (0..clustering.k())
        .filter(|&z| clustering.members[z].iter().all(|l| leasable.contains(l)))
        .collect();

    let started = Instant::now();
    let build_opts = BuildOptions {
        depot: options.depot,
        asymmetric_pairs: rules.asymmetric_pairs(),
    };
    let (mut model, mut art) = build_ip(n, cinst, &ccosts, &build_opts)?;
    if !rules.is_empty() {
        add_agronomic_constraints(&mut model, &art, cinst, &rules)?;
    }
    relax_service(&mut model, &mut art, &relaxed)?;
    let n_z = model.num_vars();
    let n_eq = model.count_relation(Relation::Eq);
    let before_secs = model.clone();
    let outcome = match solve_with_secs(
        &mut model,
        &mut art,
        options.max_sec_iterations,
        &options.limits,
    ) {
        Err(Error::Infeasible(msg)) => {
            let groups = diagnose(&before_secs, &options.limits);
            return Err(Error::Infeasible(if groups.is_empty() {
                msg
            } else {
                format!(
                    "{msg}; conflicting constraint groups: {}",
                    groups.join(", ")
                )
            }));
        }
        other => other?,
    };
    let cpu_s = started.elapsed().as_secs_f64();
    if !outcome.solution.has_values() {
        return Err(Error::Solver(format!(
            "no integer solution after {} SEC iterations",
            outcome.iterations
        )));
    }
    let values = &outcome.solution.values;

    let depot = if uses_virtual_depot(n) {
        None
    } else if chooses_depot(n) {
        art.depot_slots[art.chosen_slot(values)]
    } else {
        art.depot_slots[0]
    };
    let cluster_crop = art.assignment(values);
    let assignment: Vec<Option<usize>> = (0..l_count)
        .map(|l| cluster_crop[clustering.assignment[l]])
        .collect();
    let active: Vec<usize> = assignment
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let costs = CostModel::from_instance(inst)?;
    let cluster_tours = extract_tours(&art, values);
    let mut tours = Vec::with_capacity(active.len());
    let mut tsp_iter = 0;
    let mut tsp_cpu = 0.0;
    for &k in &active {
        let lg = legs(n, k, &active);
        let field = |i: usize, j: usize| costs.field(k, i, j);
        let entry = |j: usize| entry_cost(&costs, &lg, depot, k, j).unwrap_or(f64::INFINITY);
        let exit = |j: usize| exit_cost(&costs, &lg, depot, k, j).unwrap_or(f64::INFINITY);
        let sc = StitchCosts {
            field: &field,
            entry: &entry,
            exit: &exit,
        };
        let seq = &cluster_tours[k];
        let fwd = stitch_crop_tour(seq, Direction::Forward, &clustering.members, &sc)?;
        let flp = stitch_crop_tour(seq, Direction::Flipped, &clustering.members, &sc)?;
        tsp_iter += fwd.tsp_iterations + flp.tsp_iterations;
        tsp_cpu += (fwd.tsp_elapsed + flp.tsp_elapsed).as_secs_f64();
        let (best, _) = pick_direction(fwd, flp);
        tours.push(CropTour {
            crop: k,
            fields: best.fields,
        });
    }

    let mut plan = HarvestPlan {
        variant: n,
        k_tilde: clustering.k(),
        depot,
        active_crops: active,
        assignment,
        tours,
        profit_eur: 0.0,
        converged: outcome.converged,
        metrics: RunMetrics {
            n_z,
            n_eq,
            n_ineq_nosec: outcome.initial_inequalities,
            n_ineq_final: outcome.final_inequalities,
            iter_sec: outcome.iterations,
            cpu_s,
            tsp_iter,
            tsp_cpu_s: tsp_cpu,
            converged: outcome.converged,
            j_eur: 0.0,
        },
    };
    plan.profit_eur = evaluate_profit(&plan, inst)?;
    plan.metrics.j_eur = plan.profit_eur;
    if !plan.converged {
        log::warn!(
            "{} stopped after {} SEC iterations without a subtour-free solution",
            plan.method(),
            outcome.iterations
        );
    }
    Ok(plan)
}
