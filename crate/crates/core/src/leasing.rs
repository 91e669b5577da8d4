//! Renting out own fields, taking leases on others, and upper bounds on
//! depot rents.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::capr::{plan, HarvestPlan, PlanJson, PlanOptions};
use crate::error::{Error, Result};
use crate::formulations::{check_variant, uses_designated_depot};
use crate::instance::Instance;

/// Field sets and profits of one leasing analysis. Ids refer to the full instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LeasingDecision {
    /// Own fields.
    pub own: BTreeSet<usize>,
    /// Own fields that may be rented out.
    pub pro: BTreeSet<usize>,
    /// Fields that may be taken on lease.
    pub ptl: BTreeSet<usize>,
    /// Lease candidates not worth taking.
    pub ntl: BTreeSet<usize>,
    /// Own fields worth renting out.
    pub ro: BTreeSet<usize>,
    /// Fields to farm: `(own ∪ ptl) \ (ntl ∪ ro)`.
    pub l1: BTreeSet<usize>,
    pub profit_l1: f64,
    pub profit_own: f64,
    /// `profit_l1 − profit_own`: the most that the taken leases may cost in total.
    pub delta_j: f64,
    /// Set when a sub-run did not converge or `delta_j < 0`.
    pub advisory: bool,
    pub relaxed_plan: HarvestPlan,
    /// `None` when the set is empty.
    pub plan_l1: Option<HarvestPlan>,
    pub plan_own: Option<HarvestPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeasingJson {
    pub own: Vec<usize>,
    pub pro: Vec<usize>,
    pub ptl: Vec<usize>,
    pub ntl: Vec<usize>,
    pub ro: Vec<usize>,
    pub l1: Vec<usize>,
    pub profit_l1_eur: f64,
    pub profit_own_eur: f64,
    pub delta_j_eur: f64,
    pub advisory: bool,
    /// Plans over the listed subsets; their field ids index `l1` and `own`.
    pub plan_l1: Option<PlanJson>,
    pub plan_own: Option<PlanJson>,
}

impl LeasingDecision {
    pub fn to_json(&self) -> LeasingJson {
        let v = |s: &BTreeSet<usize>| s.iter().copied().collect();
        LeasingJson {
            own: v(&self.own),
            pro: v(&self.pro),
            ptl: v(&self.ptl),
            ntl: v(&self.ntl),
            ro: v(&self.ro),
            l1: v(&self.l1),
            profit_l1_eur: self.profit_l1,
            profit_own_eur: self.profit_own,
            delta_j_eur: self.delta_j,
            advisory: self.advisory,
            plan_l1: self.plan_l1.as_ref().map(HarvestPlan::to_json),
            plan_own: self.plan_own.as_ref().map(HarvestPlan::to_json),
        }
    }

    /// Checks the subset relations between the field sets.
    pub fn check_invariants(&self) -> Result<()> {
        let sub = |a: &BTreeSet<usize>, b: &BTreeSet<usize>, what: &str| {
            if a.is_subset(b) {
                Ok(())
            } else {
                Err(Error::Integrity(format!("{what} violated")))
            }
        };
        sub(&self.pro, &self.own, "pro ⊆ own")?;
        sub(&self.ntl, &self.ptl, "ntl ⊆ ptl")?;
        sub(&self.ro, &self.pro, "ro ⊆ pro")?;
        let all: BTreeSet<usize> = self.own.union(&self.ptl).copied().collect();
        let dropped: BTreeSet<usize> = self.ntl.union(&self.ro).copied().collect();
        let l1: BTreeSet<usize> = all.difference(&dropped).copied().collect();
        if l1 != self.l1 {
            return Err(Error::Integrity("l1 != (own ∪ ptl) \\ (ntl ∪ ro)".into()));
        }
        if self.delta_j != self.profit_l1 - self.profit_own {
            return Err(Error::Integrity(
                "delta_j is not profit_l1 − profit_own".into(),
            ));
        }
        Ok(())
    }
}

fn run_on(
    inst: &Instance,
    fields: &BTreeSet<usize>,
    n: u8,
    k_tilde: usize,
    seed: u64,
    options: &PlanOptions,
) -> Result<Option<HarvestPlan>> {
    if fields.is_empty() {
        return Ok(None);
    }
    let ids: Vec<usize> = fields.iter().copied().collect();
    let sub = inst.subset(&ids)?;
    plan(&sub, n, k_tilde, seed, options).map(Some)
}

/// Solves the relaxed problem over `own ∪ ptl` with service optional on
/// `pro ∪ ptl`, then plans `L¹` and `own` normally. Side constraints and
/// clusters in `options` are ignored; `options.depot` is kept.
#[allow(clippy::too_many_arguments)]
pub fn decide_leasing(
    own: &BTreeSet<usize>,
    pro: &BTreeSet<usize>,
    ptl: &BTreeSet<usize>,
    inst: &Instance,
    n: u8,
    k_tilde: usize,
    seed: u64,
    options: &PlanOptions,
) -> Result<LeasingDecision> {
    check_variant(n)?;
    let l_count = inst.num_fields();
    if let Some(&bad) = own.iter().chain(ptl).find(|&&l| l >= l_count) {
        return Err(Error::Validation(format!("unknown field id {bad}")));
    }
    if !pro.is_subset(own) {
        return Err(Error::Validation(
            "fields to rent out must be own fields".into(),
        ));
    }
    if !own.is_disjoint(ptl) {
        return Err(Error::Validation(
            "lease candidates must not be own fields".into(),
        ));
    }
    if own.is_empty() {
        return Err(Error::Validation(
            "at least one own field is required".into(),
        ));
    }
    let base = PlanOptions {
        depot: options.depot,
        max_sec_iterations: options.max_sec_iterations,
        limits: options.limits,
        ..Default::default()
    };

    let all: Vec<usize> = own.union(ptl).copied().collect();
    let sub = inst.subset(&all)?;
    let leasable: Vec<usize> = all
        .iter()
        .enumerate()
        .filter(|(_, l)| pro.contains(l) || ptl.contains(l))
        .map(|(i, _)| i)
        .collect();
    let relaxed_plan = plan(
        &sub,
        n,
        k_tilde,
        seed,
        &PlanOptions {
            leasable,
            ..base.clone()
        },
    )?;
    let unserved: BTreeSet<usize> = relaxed_plan
        .assignment
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_none())
        .map(|(i, _)| all[i])
        .collect();
    let ntl: BTreeSet<usize> = unserved.intersection(ptl).copied().collect();
    let ro: BTreeSet<usize> = unserved.intersection(pro).copied().collect();
    let l1: BTreeSet<usize> = all
        .iter()
        .copied()
        .filter(|l| !unserved.contains(l))
        .collect();

    let plan_l1 = run_on(inst, &l1, n, k_tilde, seed, &base)?;
    let plan_own = run_on(inst, own, n, k_tilde, seed, &base)?;
    let profit = |p: &Option<HarvestPlan>| p.as_ref().map_or(0.0, |p| p.profit_eur);
    let (profit_l1, profit_own) = (profit(&plan_l1), profit(&plan_own));
    let delta_j = profit_l1 - profit_own;
    let converged = relaxed_plan.converged
        && plan_l1.as_ref().is_none_or(|p| p.converged)
        && plan_own.as_ref().is_none_or(|p| p.converged);
    let advisory = !converged || delta_j < 0.0;
    if delta_j < 0.0 {
        log::warn!(
            "leasing bound is negative ({delta_j:.2}); consider another set of lease candidates"
        );
    }
    Ok(LeasingDecision {
        own: own.clone(),
        pro: pro.clone(),
        ptl: ptl.clone(),
        ntl,
        ro,
        l1,
        profit_l1,
        profit_own,
        delta_j,
        advisory,
        relaxed_plan,
        plan_l1,
        plan_own,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RentBound {
    pub variant: u8,
    /// Depot the bound refers to (designated or chosen); `None` for the virtual depot.
    pub depot: Option<usize>,
    pub profit_eur: f64,
    /// Reference profit minus this profit.
    pub bound_eur: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RentBounds {
    pub reference_variant: u8,
    pub reference_profit_eur: f64,
    pub bounds: Vec<RentBound>,
}

/// Profit gap between the reference variant (2 for family 1–4, 7 for 5–8)
/// and each other requested variant. Variants with a designated depot are
/// evaluated once per depot.
pub fn depot_rent_bound(
    inst: &Instance,
    variants: &[u8],
    k_tilde: usize,
    seed: u64,
    options: &PlanOptions,
) -> Result<RentBounds> {
    for &n in variants {
        check_variant(n)?;
    }
    let low = variants.iter().all(|&n| n <= 4);
    let high = variants.iter().all(|&n| n >= 5);
    let reference = match (low, high) {
        _ if variants.is_empty() => return Err(Error::Validation("no variants given".into())),
        (true, _) => 2,
        (_, true) => 7,
        _ => {
            return Err(Error::Validation(
                "variants must all come from 1–4 or all from 5–8".into(),
            ))
        }
    };
    let reference_plan = plan(inst, reference, k_tilde, seed, options)?;
    let mut bounds = Vec::new();
    let mut seen = BTreeSet::new();
    for &n in variants {
        if n == reference || !seen.insert(n) {
            continue;
        }
        let depots: Vec<Option<usize>> = if uses_designated_depot(n) {
            (0..inst.num_depots()).map(Some).collect()
        } else {
            vec![options.depot]
        };
        for depot in depots {
            let p = plan(
                inst,
                n,
                k_tilde,
                seed,
                &PlanOptions {
                    depot,
                    ..options.clone()
                },
            )?;
            bounds.push(RentBound {
                variant: n,
                depot: p.depot,
                profit_eur: p.profit_eur,
                bound_eur: reference_plan.profit_eur - p.profit_eur,
            });
        }
    }
    Ok(RentBounds {
        reference_variant: reference,
        reference_profit_eur: reference_plan.profit_eur,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::planar;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    fn five_fields() -> Instance {
        planar(
            &[(0.0, 0.0, vec![1])],
            &[
                (1.0, 0.0, vec![800.0]),
                (2.0, 0.5, vec![800.0]),
                (2.5, 1.5, vec![800.0]),
                (1.5, 2.0, vec![5000.0]),
                (80.0, 80.0, vec![0.0]),
            ],
            30.0,
            100.0,
        )
    }

    #[test]
    fn nothing_to_lease() {
        let inst = five_fields();
        let d = decide_leasing(
            &set(&[0, 1, 2]),
            &set(&[]),
            &set(&[]),
            &inst,
            3,
            3,
            0,
            &PlanOptions::default(),
        )
        .unwrap();
        assert_eq!(d.l1, d.own);
        assert_eq!(d.delta_j, 0.0);
        d.check_invariants().unwrap();
    }

    #[test]
    fn lucrative_neighbour_is_taken_and_waste_rented_out() {
        let inst = five_fields();
        let d = decide_leasing(
            &set(&[0, 1, 2, 4]),
            &set(&[4]),
            &set(&[3]),
            &inst,
            3,
            5,
            0,
            &PlanOptions::default(),
        )
        .unwrap();
        d.check_invariants().unwrap();
        assert!(d.ntl.is_empty());
        assert_eq!(d.ro, set(&[4]));
        assert_eq!(d.l1, set(&[0, 1, 2, 3]));
        assert!(d.delta_j > 0.0);
        assert!(!d.advisory);
    }

    #[test]
    fn rejects_bad_sets() {
        let inst = five_fields();
        let o = PlanOptions::default();
        assert!(
            decide_leasing(&set(&[0]), &set(&[1]), &set(&[]), &inst, 3, 5, 0, &o)
                .unwrap_err()
                .is_validation()
        );
        assert!(
            decide_leasing(&set(&[0]), &set(&[]), &set(&[0]), &inst, 3, 5, 0, &o)
                .unwrap_err()
                .is_validation()
        );
        assert!(
            decide_leasing(&set(&[9]), &set(&[]), &set(&[]), &inst, 3, 5, 0, &o)
                .unwrap_err()
                .is_validation()
        );
    }

    #[test]
    fn single_depot_bound_vanishes() {
        let inst = five_fields();
        let b = depot_rent_bound(&inst, &[1, 2, 3], 5, 0, &PlanOptions::default()).unwrap();
        assert_eq!(b.reference_variant, 2);
        assert_eq!(b.bounds.len(), 2);
        assert!(b.bounds.iter().all(|x| x.bound_eur.abs() < 1e-6));
        assert!(
            depot_rent_bound(&inst, &[1, 5], 5, 0, &PlanOptions::default())
                .unwrap_err()
                .is_validation()
        );
    }

    #[test]
    fn symmetric_depots_get_equal_bounds() {
        let fields = vec![(0.0, 1.0, vec![900.0]), (0.0, -1.0, vec![900.0])];
        let inst = planar(
            &[(-3.0, 0.0, vec![1]), (3.0, 0.0, vec![1])],
            &fields,
            30.0,
            10.0,
        );
        let b = depot_rent_bound(&inst, &[1], 2, 0, &PlanOptions::default()).unwrap();
        assert_eq!(b.bounds.len(), 2);
        assert!((b.bounds[0].bound_eur - b.bounds[1].bound_eur).abs() < 1e-6);
    }
}
