use std::path::PathBuf;
use std::process::{Command, Output};

use lie_robust::cases::flow_data;
use lie_robust::datadriven::write_observations;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lie-robust"));
    c.env_remove("LIE_ROBUST_SOLVER");
    c
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gram_size_prints_the_count() {
    let o = run(&["gram-size", "--vars", "13", "--half-degree", "5"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "8568");
    let o = run(&["gram-size", "--vars", "3", "--half-degree", "6", "--block", "3"]);
    assert_eq!(stdout(&o).trim(), "252");
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(code(&run(&["peak", "--bogus"])), 2);
    assert_eq!(code(&run(&["peak", "--config", "/nonexistent.json"])), 2);
    let roa = config("roa_controlled_flow.json");
    assert_eq!(code(&run(&["peak", "--config", roa.to_str().unwrap()])), 2);
    let peak = config("flow_box_peak.json");
    assert_eq!(code(&run(&["peak", "--config", peak.to_str().unwrap(), "--solver", "cplex"])), 2);
    assert_eq!(code(&run(&["peak", "--config", peak.to_str().unwrap(), "--degrees", "3..1"])), 2);
}

#[test]
fn solver_failure_at_every_degree_exits_3() {
    let peak = config("flow_box_peak.json");
    let o = run(&["peak", "--config", peak.to_str().unwrap(), "--degrees", "1", "--solver", "sdpa:/nonexistent/solver"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn peak_report_is_deterministic_and_checkable() {
    let dir = tempfile::tempdir().unwrap();
    let peak = config("flow_box_peak.json");
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}.json"));
        let o = run(&["peak", "--config", peak.to_str().unwrap(), "--degrees", "1..2", "--cross-check", "--trajectories", "20", "--output", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("sound true"));
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        for d in v["degrees"].as_array_mut().unwrap() {
            d["wall_time_s"] = serde_json::Value::Null;
        }
        reports.push(v);
    }
    assert_eq!(reports[0], reports[1]);
    let b1 = reports[0]["degrees"][0]["bound"].as_f64().unwrap();
    let b2 = reports[0]["degrees"][1]["bound"].as_f64().unwrap();
    assert!(b2 <= b1 + 1e-5);
    let saved = dir.path().join("r0.json");
    let o = run(&["certify-check", "--config", peak.to_str().unwrap(), "--report", saved.to_str().unwrap(), "--trajectories", "20"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn reach_writes_a_level_set_grid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("phi.csv");
    let reach = config("flow_reach_box.json");
    let o = run(&["reach", "--config", reach.to_str().unwrap(), "--degrees", "2", "--levelset", grid.to_str().unwrap(), "--grid", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&grid).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,phi");
    assert_eq!(lines.len(), 26);
}

#[test]
fn data_build_counts_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (obs, _) = flow_data(3).unwrap();
    let csv = dir.path().join("obs.csv");
    std::fs::write(&csv, write_observations(&obs)).unwrap();
    let out = dir.path().join("poly.json");
    let o = run(&["data-build", "--csv", csv.to_str().unwrap(), "--dict", "cubic", "--coord", "2", "--f0", "x2;0", "--eps", "0,0.5", "--reduce", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["dim"], 10);
    assert_eq!(v["rows_before"], 160);
    let after = v["rows_after"].as_u64().unwrap();
    assert!(after > 10 && after < 80, "{after}");
    assert_eq!(v["uncertainty"]["rows"].as_array().unwrap().len() as u64, after);
}

#[test]
fn simulate_emits_trajectory_csv() {
    let peak = config("flow_box_peak.json");
    let o = run(&["simulate", "--config", peak.to_str().unwrap(), "--trajectories", "3", "--seed", "4"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("traj,t,x1,x2,w1,w2\n"));
    assert!(text.lines().any(|l| l.starts_with("2,")));
}

#[test]
fn examples_are_listed() {
    let o = run(&["examples", "list"]);
    let text = stdout(&o);
    for name in ["flow-pillow-peak", "roa-controlled-flow", "sir-peak-seeded", "twist-full-unknown"] {
        assert!(text.contains(name), "{name}");
    }
    assert_eq!(code(&run(&["examples", "run", "--name", "nothing-*"])), 2);
}

#[test]
fn example_run_at_low_degree() {
    let o = run(&["examples", "run", "--name", "flow-reach-*", "--degrees", "1..2", "--trajectories", "20"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS flow-reach-box"));
}
