//! Acceptance targets. Every test prints one `PASS`/`FAIL` line before asserting.
//!
//! Run with `cargo test -p harvestplan --test acceptance -- --nocapture` to see the lines.

use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use harvestplan::clustering::{aggregate, kmeans};
use harvestplan::formulations::{build_ip, count_variables, uses_designated_depot, BuildOptions};
use harvestplan::harness::{p_conv, run_benchmark_with, BenchConfig, BenchRow};
use harvestplan::milp::{
    add_binary_and, add_conditional_value, add_reified_leq, IntegerProgram, LinExpr,
    DEFAULT_EPSILON,
};
use harvestplan::{
    decide_leasing, evaluate_profit, generate_instance, plan, solve_open_tsp, CostModel, GenParams,
    Instance, PlanOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PROFIT_TOL: f64 = 1e-6;
const TSP_TOL: f64 = 1e-9;
/// Relative slack for comparing sums of the same numbers added in a different order.
const SUM_REL_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;

fn report(name: &str, ok: bool, detail: &str) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

#[test]
fn variable_counts() {
    let started = Instant::now();
    let expected = [
        (1u8, 196usize),
        (3, 262),
        (4, 541),
        (5, 195),
        (7, 258),
        (8, 348),
    ];
    let inst = generate_instance(&GenParams {
        seed: 1,
        fields: 10,
        ..Default::default()
    })
    .unwrap();
    let costs = CostModel::from_instance(&inst).unwrap();
    let mut mismatches = Vec::new();
    for (n, nz) in expected {
        let d = if uses_designated_depot(n) { 1 } else { 3 };
        let counted = count_variables(n, 3, d, 10).unwrap();
        let options = BuildOptions {
            depot: Some(0),
            ..Default::default()
        };
        let (model, _) = build_ip(n, &inst, &costs, &options).unwrap();
        if counted != nz || model.num_vars() != nz {
            mismatches.push(format!(
                "IP-{n}: counted {counted}, built {}, expected {nz}",
                model.num_vars()
            ));
        }
    }
    let elapsed = started.elapsed();
    let ok = mismatches.is_empty() && elapsed < Duration::from_secs(1);
    report(
        "variable_counts",
        ok,
        &format!(
            "{} mismatches {:?}, {:.3}s",
            mismatches.len(),
            mismatches,
            elapsed.as_secs_f64()
        ),
    );
}

/// Every integer point of the box spanned by `ranges`.
fn grid(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for &(lo, hi) in ranges {
        out = out
            .into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn feasible_at(model: &IntegerProgram, values: &[f64]) -> bool {
    model.is_feasible(values, FEAS_TOL)
}

#[test]
fn logic_truth_tables() {
    let mut mismatches = 0usize;
    let mut checked = 0usize;

    let mut m = IntegerProgram::new();
    let b1 = m.add_binary("b1");
    let b2 = m.add_binary("b2");
    let b3 = m.add_binary("b3");
    add_binary_and(&mut m, b1, b2, b3).unwrap();
    for p in grid(&[(0, 1), (0, 1), (0, 1)]) {
        let v: Vec<f64> = p.iter().map(|&x| x as f64).collect();
        let truth = p[2] == (p[0] & p[1]);
        checked += 1;
        if feasible_at(&m, &v) != truth {
            mismatches += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10 {
        let nvars = rng.random_range(1..=3);
        let ranges: Vec<(i64, i64)> = (0..nvars)
            .map(|_| {
                let lo = rng.random_range(-3..=1);
                (lo, lo + rng.random_range(0..=4))
            })
            .collect();
        let coeffs: Vec<i64> = (0..nvars).map(|_| rng.random_range(-3..=3)).collect();
        let constant = rng.random_range(-4..=4) as f64;

        let build = |m: &mut IntegerProgram| {
            let xs: Vec<_> = ranges
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| m.add_integer(format!("x{i}"), lo, hi).unwrap())
                .collect();
            let mut f = LinExpr::constant(constant);
            for (x, &c) in xs.iter().zip(&coeffs) {
                f.add_term(*x, c as f64);
            }
            f
        };
        let f_at = |p: &[i64]| {
            constant
                + p.iter()
                    .zip(&coeffs)
                    .map(|(x, c)| (x * c) as f64)
                    .sum::<f64>()
        };

        // b = 1 ⇔ f ≤ 0
        let mut m = IntegerProgram::new();
        let f = build(&mut m);
        let b = m.add_binary("b");
        add_reified_leq(&mut m, b, &f, DEFAULT_EPSILON).unwrap();
        for p in grid(&ranges) {
            for bv in 0..=1 {
                let mut v: Vec<f64> = p.iter().map(|&x| x as f64).collect();
                v.push(bv as f64);
                let truth = (bv == 1) == (f_at(&p) <= 0.0);
                checked += 1;
                if feasible_at(&m, &v) != truth {
                    mismatches += 1;
                }
            }
        }

        // y = f if b = 1, y = 0 otherwise
        let mut m = IntegerProgram::new();
        let f = build(&mut m);
        let (lo, hi) = m.expr_bounds(&f).unwrap();
        let y = m
            .add_integer("y", lo.min(0.0) as i64 - 2, hi.max(0.0) as i64 + 2)
            .unwrap();
        let b = m.add_binary("b");
        add_conditional_value(&mut m, y, b, &f).unwrap();
        for p in grid(&ranges) {
            for bv in 0..=1 {
                for yv in (lo.min(0.0) as i64 - 2)..=(hi.max(0.0) as i64 + 2) {
                    let mut v: Vec<f64> = p.iter().map(|&x| x as f64).collect();
                    v.push(yv as f64);
                    v.push(bv as f64);
                    let target = if bv == 1 { f_at(&p) } else { 0.0 };
                    let truth = yv as f64 == target;
                    checked += 1;
                    if feasible_at(&m, &v) != truth {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    report(
        "logic_truth_tables",
        mismatches == 0,
        &format!("{mismatches} mismatches over {checked} points"),
    );
}

/// Best profit of a single-depot instance over every assignment and tour order.
fn brute_force_profit(inst: &Instance) -> f64 {
    let costs = CostModel::from_instance(inst).unwrap();
    let (k_count, l_count) = (inst.num_crops(), inst.num_fields());
    let tour_cost = |k: usize, fields: &[usize]| -> f64 {
        if fields.is_empty() {
            return 0.0;
        }
        permutations(fields)
            .into_iter()
            .map(|p| {
                costs.depot_to_field(k, 0, p[0])
                    + p.windows(2)
                        .map(|w| costs.field(k, w[0], w[1]))
                        .sum::<f64>()
                    + costs.field_to_depot(k, p[p.len() - 1], 0)
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = f64::NEG_INFINITY;
    for code in 0..k_count.pow(l_count as u32) {
        let mut c = code;
        let assign: Vec<usize> = (0..l_count)
            .map(|_| {
                let k = c % k_count;
                c /= k_count;
                k
            })
            .collect();
        let mut j = -inst.depots[0].maintenance_eur;
        for k in 0..k_count {
            let fields: Vec<usize> = (0..l_count).filter(|&l| assign[l] == k).collect();
            if fields.is_empty() {
                continue;
            }
            j += fields
                .iter()
                .map(|&l| inst.fields[l].revenue_eur[k])
                .sum::<f64>();
            j -= tour_cost(k, &fields) + inst.crops.fixed_cost_eur;
        }
        best = best.max(j);
    }
    best
}

#[test]
fn brute_force_equivalence() {
    let started = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let params = GenParams {
            seed,
            fields: 4 + (seed % 3) as usize,
            depots: 1,
            crops: 2,
            return_eur_per_ha: vec![570.0, 600.0],
            ..Default::default()
        };
        let inst = generate_instance(&params).unwrap();
        let l = inst.num_fields();
        let p = plan(&inst, 1, l, seed, &PlanOptions::default()).unwrap();
        let oracle = brute_force_profit(&inst);
        if (p.profit_eur - oracle).abs() > PROFIT_TOL || !p.converged {
            failures.push(format!(
                "seed {seed}: plan {} oracle {oracle}",
                p.profit_eur
            ));
        }
    }
    let elapsed = started.elapsed();
    let ok = failures.is_empty() && elapsed < Duration::from_secs(300);
    report(
        "brute_force_equivalence",
        ok,
        &format!(
            "{} of 20 differ {:?}, {:.1}s",
            failures.len(),
            failures,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn open_tsp_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut failures = Vec::new();
    for case in 0..30 {
        let n = 2 + case % 7;
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)))
            .collect();
        let costs: Vec<Vec<f64>> = pts
            .iter()
            .map(|a| {
                pts.iter()
                    .map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt())
                    .collect()
            })
            .collect();
        let start = rng.random_range(0..n);
        let end = (start + rng.random_range(1..n)) % n;
        let interior: Vec<usize> = (0..n).filter(|&v| v != start && v != end).collect();
        let best = permutations(&interior)
            .into_iter()
            .map(|mid| {
                let mut order = vec![start];
                order.extend(mid);
                order.push(end);
                order.windows(2).map(|w| costs[w[0]][w[1]]).sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        let tour = solve_open_tsp(&costs, start, end).unwrap();
        let walked: f64 = tour.order.windows(2).map(|w| costs[w[0]][w[1]]).sum();
        let visits: BTreeSet<usize> = tour.order.iter().copied().collect();
        let valid = tour.order.len() == n
            && visits.len() == n
            && tour.order[0] == start
            && tour.order[n - 1] == end
            && (walked - tour.length).abs() <= TSP_TOL;
        if !valid || (tour.length - best).abs() > TSP_TOL {
            failures.push(format!(
                "case {case} (N={n}): got {} best {best}",
                tour.length
            ));
        }
    }
    report(
        "open_tsp_oracle",
        failures.is_empty(),
        &format!("{} of 30 differ {:?}", failures.len(), failures),
    );
}

#[test]
fn dominance_suite() {
    let mut violations = Vec::new();
    for seed in 0..20u64 {
        let inst = generate_instance(&GenParams {
            seed: 100 + seed,
            fields: 6 + (seed % 3) as usize,
            ..Default::default()
        })
        .unwrap();
        let l = inst.num_fields();
        let j: Vec<f64> = (1..=8u8)
            .map(|n| {
                let options = PlanOptions {
                    depot: Some(0),
                    ..Default::default()
                };
                let p = plan(&inst, n, l, seed, &options).unwrap();
                assert!(p.converged, "seed {seed} CApR-{n} did not converge");
                p.profit_eur
            })
            .collect();
        let mut check = |a: usize, b: usize| {
            if j[a - 1] < j[b - 1] - PROFIT_TOL {
                violations.push(format!(
                    "seed {seed}: J{a} {} < J{b} {}",
                    j[a - 1],
                    j[b - 1]
                ));
            }
        };
        check(3, 2);
        check(3, 1);
        for n in 1..=4 {
            check(n, n + 4);
        }
    }
    report(
        "dominance_suite",
        violations.is_empty(),
        &format!("{} violations {:?}", violations.len(), violations),
    );
}

#[test]
fn clustering_refinement() {
    let mut violations = Vec::new();
    let mut gains = Vec::new();
    for seed in 1..=10u64 {
        let inst = generate_instance(&GenParams {
            seed,
            fields: 12,
            ..Default::default()
        })
        .unwrap();
        let options = PlanOptions {
            depot: Some(0),
            ..Default::default()
        };
        let exact = plan(&inst, 5, 12, seed, &options).unwrap();
        let coarse = plan(&inst, 5, 4, seed, &options).unwrap();
        gains.push(100.0 * (exact.profit_eur - coarse.profit_eur) / coarse.profit_eur.abs());
        if exact.profit_eur < coarse.profit_eur - PROFIT_TOL {
            violations.push(format!(
                "seed {seed}: {} < {}",
                exact.profit_eur, coarse.profit_eur
            ));
        }
    }
    let mean_gain = gains.iter().sum::<f64>() / gains.len() as f64;
    report(
        "clustering_refinement",
        violations.is_empty(),
        &format!(
            "{} violations {:?}; mean gain {mean_gain:.2}%",
            violations.len(),
            violations
        ),
    );
}

struct Sweep {
    rows: Vec<BenchRow>,
    profit_mismatches: Vec<String>,
    revenue_mismatches: Vec<String>,
    plans: usize,
}

fn sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let config = BenchConfig {
            seeds: (1..=10).collect(),
            variants: (1..=8).collect(),
            k_tildes: vec![10],
            ..Default::default()
        };
        let mut profit_mismatches = Vec::new();
        let mut plans = 0;
        let rows = run_benchmark_with(&config, |inst, p| {
            plans += 1;
            match evaluate_profit(p, inst) {
                Ok(j) if (j - p.profit_eur).abs() <= PROFIT_TOL => {}
                other => profit_mismatches.push(format!(
                    "{} k={}: {other:?} vs {}",
                    p.method(),
                    p.k_tilde,
                    p.profit_eur
                )),
            }
        })
        .unwrap();
        let mut revenue_mismatches = Vec::new();
        for &seed in &config.seeds {
            let inst = generate_instance(&GenParams {
                seed,
                ..config.gen.clone()
            })
            .unwrap();
            for k in [5, 10, 20, 40, 50] {
                let agg = aggregate(&kmeans(&inst.fields, k, seed).unwrap(), &inst).unwrap();
                for crop in 0..inst.num_crops() {
                    let fields: f64 = inst.fields.iter().map(|f| f.revenue_eur[crop]).sum();
                    let clusters: f64 = agg
                        .instance
                        .fields
                        .iter()
                        .map(|f| f.revenue_eur[crop])
                        .sum();
                    if (fields - clusters).abs() > SUM_REL_TOL * fields.abs() {
                        revenue_mismatches.push(format!(
                            "seed {seed} k={k} crop {crop}: {fields} vs {clusters}"
                        ));
                    }
                }
            }
        }
        Sweep {
            rows,
            profit_mismatches,
            revenue_mismatches,
            plans,
        }
    })
}

#[test]
fn sec_convergence() {
    let rows: Vec<&BenchRow> = sweep().rows.iter().filter(|r| r.k_tilde == 10).collect();
    let owned: Vec<BenchRow> = rows.iter().map(|r| (*r).clone()).collect();
    let conv = p_conv(&owned);
    let capped = rows.iter().all(|r| r.metrics.iter_sec <= 200);
    let enforced: Vec<f64> = rows
        .iter()
        .filter(|r| r.n >= 5)
        .map(|r| r.metrics.iter_sec as f64)
        .collect();
    let mean_iter = enforced.iter().sum::<f64>() / enforced.len() as f64;
    let ok = rows.len() == 80 && conv == 100.0 && capped && mean_iter <= 10.0;
    report(
        "sec_convergence",
        ok,
        &format!(
            "{} runs, P_conv {conv:.0}%, mean iterations for n>=5 {mean_iter:.2}",
            rows.len()
        ),
    );
}

#[test]
fn revenue_conservation_and_self_consistency() {
    let s = sweep();
    let ok = s.revenue_mismatches.is_empty()
        && s.profit_mismatches.is_empty()
        && s.plans == s.rows.len();
    report(
        "revenue_conservation_and_self_consistency",
        ok,
        &format!(
            "{} plans of {} runs; revenue mismatches {:?}; profit mismatches {:?}",
            s.plans,
            s.rows.len(),
            s.revenue_mismatches,
            s.profit_mismatches
        ),
    );
}

#[test]
fn leasing_set_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    for case in 0..10u64 {
        let inst = generate_instance(&GenParams {
            seed: 500 + case,
            fields: 9,
            depots: 2,
            ..Default::default()
        })
        .unwrap();
        let mut own = BTreeSet::new();
        let mut ptl = BTreeSet::new();
        for l in 0..inst.num_fields() {
            match rng.random_range(0..10) {
                0..=5 => {
                    own.insert(l);
                }
                6..=8 => {
                    ptl.insert(l);
                }
                _ => {}
            }
        }
        if own.is_empty() {
            own.insert(0);
            ptl.remove(&0);
        }
        let pro: BTreeSet<usize> = own
            .iter()
            .copied()
            .filter(|_| rng.random_bool(0.4))
            .collect();
        let k_tilde = if case % 2 == 0 { 9 } else { 5 };
        let options = PlanOptions {
            depot: Some(0),
            ..Default::default()
        };
        let d = match decide_leasing(&own, &pro, &ptl, &inst, 3, k_tilde, case, &options) {
            Ok(d) => d,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        if let Err(e) = d.check_invariants() {
            failures.push(format!("case {case}: {e}"));
        }
        let all: Vec<usize> = own.union(&ptl).copied().collect();
        for (i, l) in all.iter().enumerate() {
            let leasable = pro.contains(l) || ptl.contains(l);
            if !leasable && d.relaxed_plan.assignment[i].is_none() {
                failures.push(format!(
                    "case {case}: field {l} outside the leasable set left unserved"
                ));
            }
        }
    }
    report(
        "leasing_set_algebra",
        failures.is_empty(),
        &format!("{} failures {:?}", failures.len(), failures),
    );
}
