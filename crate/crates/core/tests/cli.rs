use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_verlet-dem");

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn run_file(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> std::path::PathBuf {
    let out = cli(&["init-config", "--scenario", "settling-box", "--n", "50", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    v["config"]["steps"] = serde_json::json!(200);
    edit(&mut v);
    let path = dir.join("run.json");
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn run_writes_metrics_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_file(dir.path(), |_| {});
    let traj = dir.path().join("t.csv");
    let metrics = dir.path().join("m.json");
    let out = cli(&[
        "run",
        "--config",
        s(&config),
        "--trajectory",
        s(&traj),
        "--sample-every",
        "100",
        "--metrics",
        s(&metrics),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(m["total_steps"], 200);
    assert_eq!(m["force_evaluations"], 201);
    assert_eq!(m["broad_time"], 0.0);

    let text = std::fs::read_to_string(&traj).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,id,x,y,z,vx,vy,vz"));
    assert_eq!(lines.count(), 3 * 50);
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_file(dir.path(), |v| v["config"]["cell_size"] = serde_json::json!(0.001));
    assert_eq!(code(&cli(&["run", "--config", s(&config)])), 2);

    let config = run_file(dir.path(), |v| v["config"]["bogus"] = serde_json::json!(1));
    assert_eq!(code(&cli(&["run", "--config", s(&config)])), 2);

    let out = cli(&["validate", "--scenario", "sandpile", "--n", "10"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sandpile"));
}

#[test]
fn instability_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_file(dir.path(), |v| {
        v["config"]["dt"] = serde_json::json!(1.0);
        v["config"]["gravity"] = serde_json::json!({"x": 0.0, "y": 0.0, "z": -1e308});
    });
    assert_eq!(code(&cli(&["run", "--config", s(&config)])), 3);
}

#[test]
fn unwritable_output_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("sweep.csv");
    let res = cli(&[
        "sweep",
        "--scenario",
        "settling-box",
        "--n",
        "20",
        "--k",
        "0",
        "--steps",
        "10",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 1);
}

#[test]
fn sweep_report_has_baseline_and_k_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let res = cli(&[
        "sweep",
        "--scenario",
        "inclined-flow",
        "--n",
        "60",
        "--k",
        "0,20,200",
        "--steps",
        "300",
        "--uniform-skin-radius",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let report = verlet_dem::bench::parse_report(&out).unwrap();
    let baseline = report.baseline.as_ref().unwrap();
    assert_eq!(baseline.improvement_pct, 0.0);
    assert!(report.uniform_skin.is_some());
    let ks: Vec<i64> = report.rows.iter().map(|r| r.k).collect();
    assert_eq!(ks, [0, 20, 200]);
    assert_eq!(report.row(0).unwrap().broad_executed_pct, 100.0);
}

#[test]
fn validate_passes_and_prints_report() {
    let out = cli(&[
        "validate",
        "--scenario",
        "mini-hopper",
        "--n",
        "80",
        "--k",
        "200",
        "--steps",
        "400",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out.stdout.is_empty());
}
