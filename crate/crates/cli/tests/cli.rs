use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tdg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdg"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("tdg runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_default_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdg(&["verify", "--out", "v"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v/report.json")).unwrap()).unwrap();
    assert_eq!(report["failed"], 0);
}

#[test]
fn converge_writes_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdg(&["converge", "--p", "1", "--levels", "4", "--mesh", "slab", "--out", "c"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("c/convergence.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "h,dofs,l2q_error,dg_error,order_l2,order_dg");
    assert_eq!(lines.len(), 5);
    let order: f64 = lines[4].split(',').nth(4).unwrap().parse().unwrap();
    assert!(order >= 1.0, "final order {order}");
}

#[test]
fn constants_on_four_slabs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"mesh": {"kind": "slab", "nx": 1, "nt": 4}}"#).unwrap();
    let o = tdg(&["constants", "--config", "c.json"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("C_c = 2\n"), "{out}");
    assert!(out.contains("N = 4\n"), "{out}");
    assert!(out.contains(&format!("C_stab = {}\n", 40f64.sqrt())), "{out}");
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"seed": 5, "p": 2, "mesh": {"kind": "tent", "nx": 6, "zeta": 0.4, "boundary": "dirichlet"},
                     "problem": {"type": "exact", "solution": {"name": "standing", "k": 3.0}}}"#;
    fs::write(dir.path().join("c.json"), config).unwrap();
    for out in ["a", "b"] {
        let o = tdg(&["solve", "--config", "c.json", "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = tdg(&["solve", "--config", "c.json", "--out", "c", "--threads", "1"], dir.path());
    assert!(o.status.success());
    for file in ["mesh.json", "solution.csv", "report.json", "coefficients.txt"] {
        let read = |d: &str| fs::read_to_string(dir.path().join(d).join(file)).unwrap();
        let a = read("a");
        assert!(a == read("b"), "{file} differs between runs");
        assert!(a == read("c"), "{file} differs with one thread");
    }
}

#[test]
fn mesh_file_round_trip_reproduces_solution() {
    let dir = tempfile::tempdir().unwrap();
    assert!(tdg(&["mesh", "--mesh", "slab", "--out", "m"], dir.path()).status.success());
    assert!(tdg(&["solve", "--mesh", "slab", "--out", "s1"], dir.path()).status.success());
    fs::write(dir.path().join("c.json"), r#"{"mesh_file": "m/mesh.json"}"#).unwrap();
    let o = tdg(&["solve", "--config", "c.json", "--out", "s2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = fs::read(dir.path().join("s1/solution.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("s2/solution.csv")).unwrap());
}

#[test]
fn sampled_data_problem_solves() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"mesh": {"kind": "slab", "nx": 4, "nt": 4},
                     "problem": {"type": "data", "v0": [[0, 0], [0.5, 1], [1, 0]], "sigma0": [[0, 0]]}}"#;
    fs::write(dir.path().join("c.json"), config).unwrap();
    let o = tdg(&["solve", "--config", "c.json", "--out", "d"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("d/report.json")).unwrap()).unwrap();
    assert!(report["errors"].is_null());
    assert_eq!(report["energy"]["dissipative"], true);
}

#[test]
fn bad_config_reports_field_and_position() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), "{\n  \"p\": 2,\n  \"flux\": {\"alpha\": \"big\"}\n}").unwrap();
    let o = tdg(&["solve", "--config", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("flux.alpha") && err.contains("line 3"), "{err}");
}

#[test]
fn inadmissible_parameters_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"mesh": {"kind": "slab", "nx": 2, "nt": 2}, "flux": {"delta": 1.5}}"#).unwrap();
    let o = tdg(&["solve", "--config", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));
    let o = tdg(&["solve", "--p", "11"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
