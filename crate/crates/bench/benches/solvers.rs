use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use harvestplan::milp::{LinExpr, Relation};
use harvestplan::{
    generate_instance, kmeans, plan, solve, solve_open_tsp, GenParams, IntegerProgram, PlanOptions,
    SolveLimits,
};

fn knapsack(n: usize) -> IntegerProgram {
    let mut m = IntegerProgram::new();
    let mut weight = LinExpr::new();
    for i in 0..n {
        let v = m.add_binary(format!("b{i}"));
        m.set_objective_coeff(v, -((i * 7 % 11) as f64 + 1.0));
        weight.add_term(v, (i * 5 % 9) as f64 + 2.0);
    }
    m.add_constraint(&weight, Relation::Le, (n * 2) as f64)
        .unwrap();
    m
}

fn euclid(n: usize) -> Vec<Vec<f64>> {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = i as f64 * 2.399;
            (t.cos() * (1.0 + i as f64), t.sin() * (1.0 + i as f64))
        })
        .collect();
    pts.iter()
        .map(|a| pts.iter().map(|b| (a.0 - b.0).hypot(a.1 - b.1)).collect())
        .collect()
}

fn benches(c: &mut Criterion) {
    let ip = knapsack(20);
    c.bench_function("branch_and_bound_knapsack_20", |b| {
        b.iter(|| solve(black_box(&ip), &SolveLimits::default()).unwrap())
    });

    let costs = euclid(10);
    c.bench_function("open_path_10", |b| {
        b.iter(|| solve_open_tsp(black_box(&costs), 0, 9).unwrap())
    });

    let inst = generate_instance(&GenParams::with_seed(1)).unwrap();
    c.bench_function("kmeans_50_fields_10_clusters", |b| {
        b.iter(|| kmeans(black_box(&inst.fields), 10, 1).unwrap())
    });

    let mut group = c.benchmark_group("plan_50_fields_10_clusters");
    group.sample_size(10);
    for n in [3u8, 7] {
        group.bench_function(format!("variant_{n}"), |b| {
            b.iter(|| plan(black_box(&inst), n, 10, 1, &PlanOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(solvers, benches);
criterion_main!(solvers);
