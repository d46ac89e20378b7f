use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_thermacro"));
    c.env_remove("THERMACRO_OUT");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

/// The single run directory created under `root`.
fn run_dir(root: &Path) -> PathBuf {
    let dirs: Vec<_> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap()
}

#[test]
fn carnot_run_writes_leg_trace_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&scenario("carnot.toml"), tmp.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(tmp.path());
    let m = manifest(&dir);
    assert_eq!(m["experiment"], "carnot");
    assert_eq!(m["passed"], true);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["files"][0]["file"], "leg_trace.csv");
    let header = fs::read_to_string(dir.join("leg_trace.csv")).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "cycle,leg,G_boat,M_boat,T,S,mu,trader_money");
    let eff = m["metrics"]["performance"].as_f64().unwrap();
    assert!((eff - (1.0 - 0.24 / 0.47)).abs() / (1.0 - 0.24 / 0.47) < 0.01);
}

#[test]
fn identical_config_and_seed_give_identical_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for t in [&a, &b] {
        let o = run(&scenario("stationary.toml"), t.path(), &["--steps", "2000"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (da, db) = (run_dir(a.path()), run_dir(b.path()));
    for f in ["trajectory.csv", "marginal.csv"] {
        assert_eq!(fs::read(da.join(f)).unwrap(), fs::read(db.join(f)).unwrap(), "{f}");
    }
    let (ma, mb) = (manifest(&da), manifest(&db));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["metrics"], mb["metrics"]);

    let c = tempfile::tempdir().unwrap();
    assert!(run(&scenario("stationary.toml"), c.path(), &["--steps", "2000", "--seed", "99"]).status.success());
    let dc = run_dir(c.path());
    assert_ne!(fs::read(da.join("trajectory.csv")).unwrap(), fs::read(dc.join("trajectory.csv")).unwrap());
    assert_eq!(manifest(&dc)["seeds"]["master"], 99);
}

#[test]
fn missing_required_key_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let text = fs::read_to_string(scenario("carnot.toml")).unwrap().replace("goods_ratio = 2.0\n", "");
    fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("runs");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("goods_ratio"));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let text = fs::read_to_string(scenario("gains.toml")).unwrap().replace("name = \"gains\"", "name = \"gains\"\nrounds = 3");
    fs::write(&cfg, text).unwrap();
    let o = run(&cfg, &tmp.path().join("runs"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("rounds") && err.contains("line"), "{err}");
}

#[test]
fn failed_assertion_exits_two_and_keeps_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("gains.toml");
    let text = fs::read_to_string(scenario("gains.toml")).unwrap().replace("min = 0.999999", "min = 1.5").replace("max = 1.000001", "max = 2.0");
    fs::write(&cfg, text).unwrap();
    let o = run(&cfg, &tmp.path().join("runs"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let m = manifest(&run_dir(&tmp.path().join("runs")));
    assert_eq!(m["passed"], false);
    assert_eq!(m["assertions"][0]["passed"], false);
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin().arg("run").arg("--config").arg(scenario("join.toml")).env("THERMACRO_OUT", tmp.path()).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&run_dir(tmp.path()));
    assert!((m["metrics"]["money_0"].as_f64().unwrap() - 5.0 / 11.0).abs() < 1e-12);
}

#[test]
fn mode_override_switches_to_agents_and_records_replica_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&scenario("carnot_stochastic.toml"), tmp.path(), &["--replicas", "2", "--steps", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&run_dir(tmp.path()));
    assert_eq!(m["seeds"]["replicas"].as_array().unwrap().len(), 2);
    assert_eq!(m["files"][0]["file"], "carnot_replicas.csv");
    assert_eq!(m["files"][0]["rows"], 2);

    let tmp = tempfile::tempdir().unwrap();
    let o = run(&scenario("join.toml"), tmp.path(), &["--mode", "stochastic", "--steps", "4000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&run_dir(tmp.path()));
    assert!(m["metrics"]["money_0_rel_error"].as_f64().unwrap() < 0.05);
}

#[test]
fn list_experiments_names_all_twelve() {
    let o = bin().arg("list-experiments").output().unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["stationary", "price-search", "join", "thermometer", "carnot", "edgeworth", "gains", "derivatives", "reconstruct", "onsager", "fluctuations", "script"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn schema_prints_every_table() {
    let o = bin().arg("schema").output().unwrap();
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 20);
    let o = bin().args(["schema", "leg-trace"]).output().unwrap();
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["file"], "leg_trace.csv");
    assert_eq!(bin().args(["schema", "nonsense"]).output().unwrap().status.code(), Some(1));
}

#[test]
fn verify_oracle_prints_passing_json() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin().args(["verify", "oracle", "--out"]).arg(tmp.path()).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["suite"], "oracle");
    assert_eq!(v["passed"], true);
    assert!(v["outcomes"].as_array().unwrap().len() >= 5);
    assert!(tmp.path().join(format!("verify-oracle-{}", thermacro::verify::PINNED_SEED)).join("report.json").exists());
}

#[test]
fn verify_gains_writes_criterion_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin().args(["verify", "gains", "--out"]).arg(tmp.path()).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join(format!("verify-gains-{}", thermacro::verify::PINNED_SEED));
    let csv = fs::read_to_string(dir.join("criterion-6").join("gains.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "route,profit,T,price_0");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn verify_rejects_unknown_suite() {
    let o = bin().args(["verify", "everything"]).output().unwrap();
    assert_ne!(o.status.code(), Some(0));
}
