use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_surface-forge"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("SURFACE_FORGE_SEED").output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn residual(r: &Value, name: &str) -> f64 {
    r["residuals"].as_array().unwrap().iter().find(|x| x["name"] == name).unwrap_or_else(|| panic!("no {name}"))["value"].as_f64().unwrap()
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("s.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn vacuum_generates_cylinder() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["generate", "--scenario", scenario("vacuum.json").to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    for x in r["residuals"].as_array().unwrap() {
        assert!(x["value"].as_f64().unwrap() < 1e-8, "{x}");
    }
    let mesh = dir.path().join("surface.obj");
    let v = run(&["verify", "--mesh", mesh.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
    let info = &json(&v)["info"];
    assert!((info["max_abs_H"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((info["max_abs_Q"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    // radius 1/2 about an axis through the base node: all vertices at
    // distance <= 1 from it
    let text = std::fs::read_to_string(&mesh).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("v ")).count() == 21 * 21);
    assert!(text.lines().filter(|l| l.starts_with("f ")).count() == 20 * 20);
}

#[test]
fn type_c_family_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["generate", "--scenario", scenario("bonnet_c.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(json(&o)["info"]["max_abs_gauss_curvature"].as_f64().unwrap() < 1e-8);
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_scenario(dir.path(), r#"{"kind":"cmc-vacuum","params":{},"grid":{"nx":0,"ny":21,"h":0.01}}"#);
    assert_eq!(run(&["generate", "--scenario", s.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).status.code(), Some(2));
    let v = scenario("vacuum.json");
    let v = v.to_str().unwrap();
    assert_eq!(run(&["generate", "--scenario", v, "--grid", "0,5,0.1"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--scenario", "/nonexistent.json"]).status.code(), Some(2));
    let bad = write_scenario(dir.path(), "{not json");
    assert_eq!(run(&["verify", "--scenario", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--scenario", v, "--param", "T", "--values", "0"]).status.code(), Some(2));
    // chart outside the solved domain of type C (t <= 0)
    let c = write_scenario(
        dir.path(),
        r#"{"kind":"bonnet-family","params":{"type":"C","t0":1,"H0":2,"H0'":-2,"H0''":4,"chart":{"w_min":[-0.2,-0.1],"w_max":[0.2,0.1],"n":21}}}"#,
    );
    assert_eq!(run(&["verify", "--scenario", c.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn tolerance_failure_exits_3() {
    let o = run(&["verify", "--scenario", scenario("vacuum.json").to_str().unwrap(), "--tol", "1e-14"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["passed"], false);
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("pair_cylinder.json");
    let s = s.to_str().unwrap();
    let a = run(&["generate", "--scenario", s, "--out", dir.path().join("a").to_str().unwrap()]);
    let b = run(&["generate", "--scenario", s, "--out", dir.path().join("b").to_str().unwrap(), "--threads", "2"]);
    let v = run(&["verify", "--scenario", s]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, v.stdout);
    for f in ["report.json", "f1.obj", "f2.obj"] {
        assert_eq!(std::fs::read(dir.path().join("a").join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap());
    }
}

#[test]
fn plane_mesh_has_zero_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let mut obj = String::from("# surface-forge lattice 11 11 0 0 0.1 0.1\n");
    for j in 0..11 {
        for i in 0..11 {
            let _ = writeln!(obj, "v {} {} 0", 0.1 * i as f64, 0.1 * j as f64);
        }
    }
    let p = dir.path().join("plane.obj");
    std::fs::write(&p, obj).unwrap();
    let o = run(&["verify", "--mesh", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert!(r["info"]["max_abs_H"].as_f64().unwrap() < 1e-12);
    assert!(r["info"]["max_abs_Q"].as_f64().unwrap() < 1e-12);
    // no header and no --grid
    std::fs::write(&p, "v 0 0 0\n").unwrap();
    assert_eq!(run(&["verify", "--mesh", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn vertex_noise_inflates_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["generate", "--scenario", scenario("vacuum.json").to_str().unwrap(), "--out", out]).status.code(), Some(0));
    let mesh = dir.path().join("surface.obj");
    let m = mesh.to_str().unwrap();
    let clean = json(&run(&["verify", "--mesh", m]));
    let noisy = |seed: &str| bin().args(["verify", "--mesh", m, "--noise", "1e-3"]).env("SURFACE_FORGE_SEED", seed).output().unwrap();
    let (a, b, c) = (noisy("7"), noisy("7"), noisy("8"));
    assert_eq!(a.status.code(), Some(3));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let r = json(&a);
    // h = 0.01, a = 1e-3: conformality ~ a/h, Gauss ~ a/h^3
    assert!(residual(&r, "conformality") > 1e-2 && residual(&r, "conformality") < 1.0);
    assert!(residual(&r, "gauss") > 1e2 && residual(&r, "gauss") > 1e10 * residual(&clean, "gauss"));
}

#[test]
fn sweeps_keep_family_invariants() {
    let v = scenario("vacuum.json");
    let o = run(&["sweep", "--scenario", v.to_str().unwrap(), "--param", "t", "--values", "0,0.5235987755982988,1.0471975511965976"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let col = |name: &str| rows[0].iter().position(|c| *c == name).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows[1..] {
        assert!(r[col("u_delta")].parse::<f64>().unwrap() < 1e-6);
        assert!(r[col("H_delta")].parse::<f64>().unwrap() < 1e-6);
    }
    let b = scenario("bonnet_b.json");
    let o = run(&["sweep", "--scenario", b.to_str().unwrap(), "--param", "T", "--values", "0;0.3;0.6"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let h = rows[0].iter().position(|c| *c == "H_delta").unwrap();
    assert!(rows[1..].iter().all(|r| r[h].parse::<f64>().unwrap() < 1e-6));
}

#[test]
fn single_value_sweep_matches_generate() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_scenario(dir.path(), &std::fs::read_to_string(scenario("vacuum.json")).unwrap().replace("\"t\": 0.0", "\"t\": 0.25"));
    let g = json(&run(&["verify", "--scenario", s.to_str().unwrap()]));
    let o = run(&["sweep", "--scenario", scenario("vacuum.json").to_str().unwrap(), "--param", "t", "--values", "0.25"]);
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    let head: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    for x in g["residuals"].as_array().unwrap() {
        let k = head.iter().position(|c| *c == x["name"].as_str().unwrap()).unwrap();
        assert_eq!(row[k].parse::<f64>().unwrap(), x["value"].as_f64().unwrap());
    }
}

#[test]
fn theta_eval_queries() {
    let dir = tempfile::tempdir().unwrap();
    let q = write_scenario(dir.path(), r#"{"period_matrix":[[[-6.283185307179586,0]]],"points":[[[0,0]]]}"#);
    let o = run(&["theta-eval", "--scenario", q.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o)["values"][0][0].as_f64().unwrap();
    assert!((v - 1.0864348112).abs() < 1e-10, "{v}");
    let o = run(&["theta-eval", "--scenario", scenario("finitegap.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let p = json(&o);
    assert_eq!(p["genus"], 1);
    assert!(p["period_matrix"][0][0][0].as_f64().unwrap() < 0.0);
    let bad = write_scenario(dir.path(), r#"{"period_matrix":[[[1,0]]],"points":[[[0,0]]]}"#);
    assert_eq!(run(&["theta-eval", "--scenario", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn pvi_roundtrip_type_b() {
    let o = run(&["pvi-roundtrip", "--scenario", scenario("pvi_b.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&o);
    assert!(residual(&r, "round-trip") < 1e-8);
    assert!(residual(&r, "first-integral") < 1e-8);
    assert!(residual(&r, "pvi") < 1e-6);
    assert_eq!(run(&["pvi-roundtrip", "--scenario", scenario("bonnet_c.json").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn every_sample_scenario_passes() {
    for s in ["vacuum.json", "finitegap.json", "enneper.json", "bonnet_b.json", "pair_cylinder.json", "bv_j2.json"] {
        let o = run(&["verify", "--scenario", scenario(s).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{s}: {}", String::from_utf8_lossy(&o.stdout));
    }
}
