use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harvestplan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, fields: usize) -> std::path::PathBuf {
    let inst = dir.join("inst.json");
    let out = run(&[
        "generate",
        "--seed",
        "3",
        "--fields",
        &fields.to_string(),
        "--depots",
        "2",
        "-o",
        s(&inst),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    inst
}

#[test]
fn generate_writes_a_replayable_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), 12);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(inst).unwrap()).unwrap();
    assert_eq!(json["fields"].as_array().unwrap().len(), 12);
    assert_eq!(json["depots"].as_array().unwrap().len(), 2);
    assert_eq!(json["_gen"]["seed"], 3);
}

#[test]
fn plan_then_render() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), 8);
    let plan = dir.path().join("plan.json");
    let out = run(&[
        "plan",
        "--ip",
        "3",
        "--clusters",
        "8",
        "-i",
        s(&inst),
        "-o",
        s(&plan),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    assert_eq!(json["method"], "CApR-3");
    assert_eq!(json["assignment"].as_array().unwrap().len(), 8);

    let svg = dir.path().join("tours.svg");
    let out = run(&["render", "-i", s(&inst), "-p", s(&plan), "-o", s(&svg)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.contains("class=\"tour\""));
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), 6);
    let plan = dir.path().join("plan.json");
    let out = run(&[
        "plan",
        "--ip",
        "9",
        "--clusters",
        "6",
        "-i",
        s(&inst),
        "-o",
        s(&plan),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"fields\": 3}").unwrap();
    let out = run(&[
        "plan",
        "--ip",
        "3",
        "--clusters",
        "3",
        "-i",
        s(&broken),
        "-o",
        s(&plan),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let rotation = dir.path().join("rotation.json");
    std::fs::write(&rotation, "[[0, 0], [0, 1], [0, 2]]").unwrap();
    let out = run(&[
        "plan",
        "--ip",
        "3",
        "--clusters",
        "6",
        "--rotation",
        s(&rotation),
        "-i",
        s(&inst),
        "-o",
        s(&plan),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rotation"));
}

#[test]
fn unconverged_plan_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), 20);
    let plan = dir.path().join("plan.json");
    let out = run(&[
        "plan",
        "--ip",
        "7",
        "--clusters",
        "20",
        "--max-sec-iter",
        "1",
        "-i",
        s(&inst),
        "-o",
        s(&plan),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(plan.exists());
}

#[test]
fn lease_writes_a_decision() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), 7);
    let decision = dir.path().join("decision.json");
    let out = run(&[
        "lease",
        "--own",
        "0-3",
        "--pro",
        "3",
        "--ptl",
        "4,5",
        "--ip",
        "3",
        "--clusters",
        "7",
        "-i",
        s(&inst),
        "-o",
        s(&decision),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&decision).unwrap()).unwrap();
    assert_eq!(json["own"], serde_json::json!([0, 1, 2, 3]));
    assert!(json["delta_j_eur"].is_number());

    let out = run(&[
        "lease",
        "--own",
        "0,1",
        "--ptl",
        "1",
        "--ip",
        "3",
        "--clusters",
        "7",
        "-i",
        s(&inst),
        "-o",
        s(&decision),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    let out = run(&[
        "bench",
        "--seeds",
        "1..2",
        "--ips",
        "5,7",
        "--clusters",
        "4",
        "--fields",
        "8",
        "-o",
        s(&table),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(table).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,n,k_tilde,N_z,N_eq,N_ineq_nosec,N_ineq_final,iter_sec,cpu_s,tsp_iter,tsp_cpu_s,converged,J_eur"
    );
    assert_eq!(lines.count(), 4);
}
