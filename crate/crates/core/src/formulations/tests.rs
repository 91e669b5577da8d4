use super::*;
use crate::instance::build_cost_model;
use crate::milp::{solve, solve_relaxation, SolveLimits, Status};
use crate::test_support::planar;

fn grid_instance(k: usize, d: usize, l: usize) -> Instance {
    let depots: Vec<_> = (0..d).map(|i| (i as f64 * 3.0, -1.0, vec![1; k])).collect();
    let fields: Vec<_> = (0..l)
        .map(|i| {
            let x = (i % 4) as f64 * 1.5;
            let y = (i / 4) as f64 * 1.2;
            (
                x,
                y,
                (0..k)
                    .map(|c| 500.0 + 10.0 * ((i + c) % 3) as f64)
                    .collect(),
            )
        })
        .collect();
    planar(&depots, &fields, 30.0, 0.0)
}

fn build(n: u8, inst: &Instance, options: &BuildOptions) -> (IntegerProgram, ModelArtifacts) {
    let costs = build_cost_model(inst, &inst.cost).unwrap();
    build_ip(n, inst, &costs, options).unwrap()
}

fn designated() -> BuildOptions {
    BuildOptions {
        depot: Some(0),
        ..Default::default()
    }
}

#[test]
fn variable_counts_match_reported_sizes() {
    assert_eq!(count_variables(3, 3, 3, 10).unwrap(), 262);
    assert_eq!(count_variables(4, 3, 3, 10).unwrap(), 541);
    assert_eq!(count_variables(5, 3, 3, 10).unwrap(), 195);
    // Designated-depot variants count one depot.
    assert_eq!(count_variables(1, 3, 1, 10).unwrap(), 196);
    assert!(count_variables(9, 1, 1, 1).is_err());
}

#[test]
fn built_models_have_the_counted_columns() {
    for n in 1..=8u8 {
        for &(k, d, l) in &[(1, 1, 1), (2, 2, 3), (3, 3, 10), (2, 3, 5)] {
            let inst = grid_instance(k, d, l);
            let (m, _) = build(n, &inst, &designated());
            let d_eff = if uses_designated_depot(n) || uses_virtual_depot(n) {
                1
            } else {
                d
            };
            assert_eq!(
                m.num_vars(),
                count_variables(n, k, d_eff, l).unwrap(),
                "n={n} K={k} D={d} L={l}"
            );
        }
    }
}

#[test]
fn equality_counts_at_reference_size() {
    let inst = grid_instance(3, 3, 10);
    let expect = [(1u8, 41usize), (3, 44), (4, 68), (5, 43), (7, 50), (8, 59)];
    for (n, eq) in expect {
        let (m, _) = build(n, &inst, &designated());
        assert_eq!(m.count_relation(Relation::Eq), eq, "IP-{n}");
    }
}

#[test]
fn designated_depot_required_with_several_depots() {
    let inst = grid_instance(1, 2, 3);
    let costs = build_cost_model(&inst, &inst.cost).unwrap();
    assert!(build_ip(1, &inst, &costs, &BuildOptions::default())
        .unwrap_err()
        .is_validation());
    assert!(build_ip(0, &inst, &costs, &BuildOptions::default()).is_err());
    assert!(build_ip(3, &inst, &costs, &BuildOptions::default()).is_ok());
}

#[test]
fn single_field_is_a_shuttle() {
    let inst = planar(
        &[(0.0, 0.0, vec![1])],
        &[(3.0, 4.0, vec![1000.0])],
        30.0,
        0.0,
    );
    let (mut m, mut a) = build(3, &inst, &BuildOptions::default());
    let out = solve_with_secs(&mut m, &mut a, 200, &SolveLimits::default()).unwrap();
    assert!(out.converged);
    assert_eq!(out.iterations, 1);
    let v = &out.solution.values;
    assert_eq!(v[a.x_out[0][0][0].0].round(), 2.0);
    assert!((out.solution.objective - (2.0 * 150.0 - 1000.0)).abs() < 1e-6);
}

/// Hand-built point for a single crop and six fields: 0-1-2 is a depot
/// anchored path, 3-4-5 a floating triangle.
#[test]
fn floating_triangle_yields_one_cut() {
    let inst = grid_instance(1, 1, 6);
    let (m, a) = build(1, &inst, &BuildOptions::default());
    let mut v = vec![0.0; m.num_vars()];
    for l in 0..6 {
        v[a.delta[0][l].0] = 1.0;
    }
    v[a.x_out[0][0][0].0] = 1.0;
    v[a.x_out[0][0][2].0] = 1.0;
    for &(i, j) in &[(0, 1), (1, 2), (3, 4), (4, 5), (3, 5)] {
        match a.edge(0, i, j).unwrap() {
            EdgeVar::Undirected(x) => v[x.0] = 1.0,
            EdgeVar::Arcs { .. } => unreachable!(),
        }
    }
    v[a.gamma.unwrap().0] = 1.0;
    let cuts = separate_subtours(&m, &a, &v).unwrap();
    assert_eq!(
        cuts,
        vec![SecCut {
            crop: 0,
            fields: vec![3, 4, 5]
        }]
    );
    assert!(cuts[0].is_violated(&a, &v));
    assert_eq!(cuts[0].rhs(), 2.0);

    v[a.x_out[0][0][0].0] = 0.5;
    assert!(separate_subtours(&m, &a, &v).unwrap_err().is_validation());
}

#[test]
fn anchored_path_yields_no_cut() {
    let inst = grid_instance(1, 1, 3);
    let (m, a) = build(1, &inst, &BuildOptions::default());
    let mut v = vec![0.0; m.num_vars()];
    for l in 0..3 {
        v[a.delta[0][l].0] = 1.0;
    }
    v[a.x_out[0][0][0].0] = 1.0;
    v[a.x_out[0][0][2].0] = 1.0;
    for &(i, j) in &[(0, 1), (1, 2)] {
        if let Some(EdgeVar::Undirected(x)) = a.edge(0, i, j) {
            v[x.0] = 1.0;
        }
    }
    assert!(separate_subtours(&m, &a, &v).unwrap().is_empty());
    assert_eq!(extract_tours(&a, &v), vec![vec![0, 1, 2]]);
}

fn dist(p: (f64, f64), q: (f64, f64)) -> f64 {
    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
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
fn four_field_tour_matches_enumeration() {
    let depot = (0.0, 0.0);
    let pts = [(5.0, 0.5), (1.0, 4.0), (4.0, 4.5), (2.0, 1.0)];
    let fields: Vec<_> = pts.iter().map(|&(x, y)| (x, y, vec![2000.0])).collect();
    let inst = planar(&[(depot.0, depot.1, vec![1])], &fields, 1.0, 0.0);
    let (mut m, mut a) = build(1, &inst, &BuildOptions::default());
    let out = solve_with_secs(&mut m, &mut a, 200, &SolveLimits::default()).unwrap();
    assert!(out.converged);
    let best = permutations(&[0, 1, 2, 3])
        .into_iter()
        .map(|p| {
            dist(depot, pts[p[0]])
                + p.windows(2)
                    .map(|w| dist(pts[w[0]], pts[w[1]]))
                    .sum::<f64>()
                + dist(pts[p[3]], depot)
        })
        .fold(f64::INFINITY, f64::min);
    assert!((out.solution.objective - (best - 8000.0)).abs() < 1e-6);
    let tour = &extract_tours(&a, &out.solution.values)[0];
    let len = dist(depot, pts[tour[0]])
        + tour
            .windows(2)
            .map(|w| dist(pts[w[0]], pts[w[1]]))
            .sum::<f64>()
        + dist(pts[tour[3]], depot);
    assert!((len - best).abs() < 1e-6);
    for w in out.objective_history.windows(2) {
        assert!(w[1] >= w[0] - 1e-6);
    }
}

#[test]
fn zero_iterations_returns_unconverged() {
    let inst = grid_instance(1, 1, 3);
    let (mut m, mut a) = build(1, &inst, &BuildOptions::default());
    let out = solve_with_secs(&mut m, &mut a, 0, &SolveLimits::default()).unwrap();
    assert!(!out.converged);
    assert_eq!(out.iterations, 0);
    assert!(!out.solution.has_values());
}

#[test]
fn baseline_picks_most_profitable_crop() {
    let fields: Vec<_> = (0..5)
        .map(|i| (i as f64, 0.0, vec![570.0, 600.0, 750.0]))
        .collect();
    let inst = planar(&[(0.0, 0.0, vec![1, 1, 1])], &fields, 30.0, 0.0);
    let (m, a) = build_assignment_baseline(&inst).unwrap();
    let sol = solve(&m, &SolveLimits::default()).unwrap();
    assert_eq!(a.assignment(&sol.values), vec![Some(2); 5]);

    let fields = vec![
        (0.0, 0.0, vec![1.0, 9.0, 3.0]),
        (1.0, 0.0, vec![7.0, 2.0, 3.0]),
        (2.0, 0.0, vec![0.0, 0.0, 4.0]),
    ];
    let inst = planar(&[(0.0, 0.0, vec![1, 1, 1])], &fields, 30.0, 0.0);
    let (m, a) = build_assignment_baseline(&inst).unwrap();
    let sol = solve(&m, &SolveLimits::default()).unwrap();
    assert_eq!(a.assignment(&sol.values), vec![Some(1), Some(0), Some(2)]);
}

#[test]
fn baseline_relaxation_is_integral() {
    let fields = vec![
        (0.0, 0.0, vec![5.0, 9.0, 3.0]),
        (1.0, 0.0, vec![7.0, 2.0, 3.0]),
        (2.0, 0.0, vec![1.0, 6.0, 4.0]),
    ];
    let inst = planar(&[(0.0, 0.0, vec![1, 1, 1])], &fields, 30.0, 0.0);
    let (mut m, a) = build_assignment_baseline(&inst).unwrap();
    m.add_constraint(&LinExpr::from(a.delta[1][0]), Relation::Eq, 0.0)
        .unwrap();
    let lp = solve_relaxation(&m).unwrap();
    assert!(lp.values.iter().all(|x| (x - x.round()).abs() < 1e-9));
    assert_eq!(a.assignment(&lp.values), vec![Some(0), Some(0), Some(1)]);
}

#[test]
fn relax_nothing_leaves_model_unchanged() {
    let inst = grid_instance(2, 2, 4);
    let (mut m, mut a) = build(3, &inst, &BuildOptions::default());
    let (m0, a0) = (m.clone(), a.clone());
    relax_service(&mut m, &mut a, &[]).unwrap();
    assert_eq!(m, m0);
    assert_eq!(a, a0);
    assert!(relax_service(&mut m, &mut a, &[4])
        .unwrap_err()
        .is_validation());
}

#[test]
fn fully_relaxed_zero_revenue_serves_nothing() {
    let fields: Vec<_> = (0..3)
        .map(|i| (1.0 + i as f64, 1.0, vec![0.0, 0.0]))
        .collect();
    let inst = planar(
        &[(0.0, 0.0, vec![1, 1]), (4.0, 0.0, vec![1, 1])],
        &fields,
        30.0,
        10.0,
    );
    for n in [1u8, 3] {
        let (mut m, mut a) = build(n, &inst, &designated());
        relax_service(&mut m, &mut a, &[0, 1, 2]).unwrap();
        let out = solve_with_secs(&mut m, &mut a, 50, &SolveLimits::default()).unwrap();
        assert_eq!(a.assignment(&out.solution.values), vec![None; 3], "IP-{n}");
        assert!(out.solution.objective.abs() < 1e-6);
    }
}

#[test]
fn unprofitable_distant_field_is_dropped() {
    let fields = vec![
        (1.0, 0.0, vec![1000.0]),
        (0.0, 1.0, vec![1000.0]),
        (40.0, 0.0, vec![500.0]),
    ];
    let inst = planar(&[(0.0, 0.0, vec![1])], &fields, 30.0, 0.0);
    let (mut m, mut a) = build(3, &inst, &BuildOptions::default());
    relax_service(&mut m, &mut a, &[2]).unwrap();
    let out = solve_with_secs(&mut m, &mut a, 50, &SolveLimits::default()).unwrap();
    assert_eq!(
        a.assignment(&out.solution.values),
        vec![Some(0), Some(0), None]
    );
}

#[test]
fn rotation_and_zero_budget_diversification() {
    let inst = grid_instance(3, 1, 4);
    let rules = AgronomicConstraints {
        rotation_forbidden: vec![(0, 2)],
        diversification: Some(Diversification {
            weights: vec![vec![1.0; 3]; 4],
            bounds: vec![(0, 0.0)],
        }),
        ..Default::default()
    };
    let (mut m, mut a) = build(3, &inst, &BuildOptions::default());
    add_agronomic_constraints(&mut m, &a, &inst, &rules).unwrap();
    let out = solve_with_secs(&mut m, &mut a, 100, &SolveLimits::default()).unwrap();
    let asg = a.assignment(&out.solution.values);
    assert_ne!(asg[0], Some(2));
    assert!(asg.iter().all(|c| *c != Some(0)));
}

#[test]
fn priority_needs_asymmetric_arcs() {
    let inst = grid_instance(1, 1, 5);
    let rules = AgronomicConstraints {
        priority: vec![PriorityTriple {
            crop: 0,
            c: 4,
            a: 0,
            b: 2,
        }],
        ..Default::default()
    };
    let (mut m, a) = build(1, &inst, &BuildOptions::default());
    let err = add_agronomic_constraints(&mut m, &a, &inst, &rules).unwrap_err();
    assert!(matches!(err, crate::Error::Model(_)), "{err}");
}

#[test]
fn priority_triple_appears_consecutively() {
    let depot = (0.0, 0.0);
    let pts = [(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0), (5.0, 0.0)];
    let fields: Vec<_> = pts.iter().map(|&(x, y)| (x, y, vec![1000.0])).collect();
    let inst = planar(&[(depot.0, depot.1, vec![1])], &fields, 1.0, 0.0);
    let triple = PriorityTriple {
        crop: 0,
        c: 4,
        a: 0,
        b: 2,
    };
    let rules = AgronomicConstraints {
        priority: vec![triple],
        ..Default::default()
    };
    let options = BuildOptions {
        depot: None,
        asymmetric_pairs: rules.asymmetric_pairs(),
    };
    let (mut m, mut a) = build(1, &inst, &options);
    add_agronomic_constraints(&mut m, &a, &inst, &rules).unwrap();
    let out = solve_with_secs(&mut m, &mut a, 100, &SolveLimits::default()).unwrap();
    assert!(out.converged);
    let tour = &extract_tours(&a, &out.solution.values)[0];
    let pos = |f: usize| tour.iter().position(|&x| x == f).unwrap();
    assert_eq!(pos(0), pos(4) + 1);
    assert_eq!(pos(2), pos(0) + 1);

    // Brute force over all orders honouring c→a→b.
    let best = permutations(&[0, 1, 2, 3, 4])
        .into_iter()
        .filter(|p| {
            let at = |f: usize| p.iter().position(|&x| x == f).unwrap();
            at(0) == at(4) + 1 && at(2) == at(0) + 1
        })
        .map(|p| {
            dist(depot, pts[p[0]])
                + p.windows(2)
                    .map(|w| dist(pts[w[0]], pts[w[1]]))
                    .sum::<f64>()
                + dist(pts[p[4]], depot)
        })
        .fold(f64::INFINITY, f64::min);
    assert!((out.solution.objective - (best - 5000.0)).abs() < 1e-6);
}

#[test]
fn dominance_on_small_instance() {
    let fields = vec![
        (1.0, 2.0, vec![900.0, 950.0]),
        (3.0, 1.0, vec![800.0, 1000.0]),
        (2.5, 3.5, vec![1200.0, 700.0]),
        (4.0, 3.0, vec![600.0, 900.0]),
    ];
    let inst = planar(
        &[(0.0, 0.0, vec![1, 1]), (5.0, 4.0, vec![1, 1])],
        &fields,
        30.0,
        50.0,
    );
    let profit = |n: u8| {
        let (mut m, mut a) = build(n, &inst, &designated());
        let out = solve_with_secs(&mut m, &mut a, 100, &SolveLimits::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.solution.status, Status::Optimal);
        -out.solution.objective
    };
    let j: Vec<f64> = (1..=8).map(profit).collect();
    assert!(j[2] >= j[1] - 1e-6);
    assert!(j[2] >= j[0] - 1e-6);
    for n in 0..4 {
        assert!(j[n] >= j[n + 4] - 1e-6, "IP-{} vs IP-{}", n + 1, n + 5);
    }
}
