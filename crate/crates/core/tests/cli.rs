use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn exe() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_delta-forge"));
    c.env_remove("DELTA_FORGE_SEED");
    c
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn run(args: &[&str]) -> Output {
    exe().args(args).output().expect("binary runs")
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_reports() {
    let ok = run(&["validate", "--input", path(&fixture("circle12.csv"))]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["valid"], true);

    let bad = run(&["validate", "--input", path(&fixture("asymmetric.csv"))]);
    assert_eq!(bad.status.code(), Some(1));
    let r = json(&bad);
    assert_eq!(r["valid"], false);
    assert_eq!(r["violations"][0]["kind"], "asymmetric");

    let g = run(&["validate", "--input", path(&fixture("hexagon_graph.json")), "--emit-matrix"]);
    assert_eq!(g.status.code(), Some(0));
    let r = json(&g);
    assert_eq!(r["kind"], "graph");
    let d = &r["matrix"]["dist"];
    assert_eq!(d.as_array().unwrap().len(), 6);
    assert!((d[0][3].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-10);
}

#[test]
fn parse_errors_carry_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    std::fs::write(&p, "0,1\n1,zero\n").unwrap();
    let o = run(&["validate", "--input", path(&p)]);
    assert_eq!(o.status.code(), Some(1));
    let msg = json(&o)["error"].as_str().unwrap().to_string();
    assert!(msg.contains("line 2, column 2"), "{msg}");
}

#[test]
fn delta_on_tripod_and_inadmissible() {
    let o = run(&[
        "delta",
        "--input",
        path(&fixture("tripod.csv")),
        "--measure",
        path(&fixture("tripod_cone.json")),
        "--oracle",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert!(r["value"].as_f64().unwrap() <= 1e-6);
    assert_eq!(r["admissible"], true);
    assert!(r["oracle"]["value"].as_f64().unwrap() <= 1e-6);

    let o = run(&[
        "delta",
        "--input",
        path(&fixture("tripod.csv")),
        "--measure",
        path(&fixture("tripod_inadmissible.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let r = json(&o);
    assert_eq!(r["admissible"], false);
    assert!(r["witness"].is_u64());
}

#[test]
fn delta_tilde_on_circle() {
    let o = run(&[
        "delta-tilde",
        "--input",
        path(&fixture("circle12.csv")),
        "--measure",
        path(&fixture("circle12_uniform.json")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(json(&o)["value"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn seed_flag_and_env_agree() {
    let (space, measure) = (fixture("graph6.json"), fixture("graph6_cone_mixed.json"));
    let args = ["delta", "--input", path(&space), "--measure", path(&measure)];
    let a = exe().args(&args).args(["--seed", "11"]).output().unwrap();
    let b = exe().args(&args).env("DELTA_FORGE_SEED", "11").output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["solver"]["seed"], 11);
}

#[test]
fn numbers_have_twelve_significant_digits() {
    let o = run(&[
        "delta",
        "--input",
        path(&fixture("graph6.json")),
        "--measure",
        path(&fixture("graph6_cone_mixed.json")),
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    let line = text.lines().find(|l| l.trim_start().starts_with("\"value\"")).unwrap();
    let digits: String = line.split(':').nth(1).unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
    assert!(digits.trim_start_matches('0').len() <= 12, "{line}");
}

#[test]
fn dump_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("p.json");
    let o = run(&[
        "delta",
        "--input",
        path(&fixture("graph6.json")),
        "--measure",
        path(&fixture("graph6_cone_mixed.json")),
        "--seed",
        "3",
        "--dump",
        path(&dump),
    ]);
    assert_eq!(o.status.code(), Some(0));

    // Solving the dump twice, and solving it in-process, give the same bits.
    let a = json(&run(&["solve", "--problem", path(&dump)]));
    let b = json(&run(&["solve", "--problem", path(&dump)]));
    assert_eq!(a["value_bits"], b["value_bits"]);
    assert_eq!(a["solver"]["seed"], 3);

    let text = std::fs::read_to_string(&dump).unwrap();
    let d: delta_forge::gram::ProblemDump = serde_json::from_str(&text).unwrap();
    let p = delta_forge::gram::GramProblem::from_dump(&d).unwrap();
    let again: delta_forge::gram::ProblemDump = serde_json::from_str(&serde_json::to_string(&p.to_dump(d.seed)).unwrap()).unwrap();
    assert_eq!(again, d);
    let v = delta_forge::gram::solve(&p, &delta_forge::gram::SolverConfig::with_seed(d.seed)).primal_value;
    assert_eq!(a["value_bits"], format!("{:016x}", v.to_bits()));
}

#[test]
fn space_search_reports() {
    let o = run(&["delta-tilde-space", "--input", path(&fixture("pair_right_angle.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["admissible"], false);

    let o = run(&["delta-tilde-space", "--input", path(&fixture("tripod.csv"))]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["exhaustive_grid"], true);
    assert!(r["lower_estimate"].as_f64().unwrap().abs() <= 1e-6);
}

#[test]
fn verify_is_reproducible() {
    let input = fixture("tripod.csv");
    let args = ["verify", "--input", path(&input), "--trials", "3", "--seed", "1", "--oracle"];
    let a = run(&args);
    let b = exe().args(args).args(["--jobs", "2"]).output().unwrap();
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    assert_eq!(r["all_passed"], true);
    assert_eq!(r["checks"]["strip-cone-point-mass-monotone"]["tol"], 1e-4);
}

#[test]
fn net_bound_modes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let o = run(&["net-bound", "--input", path(&fixture("circle12.csv")), "--csv", path(&csv), "--csv-max-n", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["chain_ok"], true);
    assert_eq!(r["N"], 12);

    let mut rows = csv::Reader::from_path(&csv).unwrap();
    let values: Vec<f64> = rows.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(values.len(), 50);
    assert!(values.windows(2).all(|w| w[0] < w[1]) && values[49] < 1.0);

    let fail = run(&[
        "net-bound", "--input", path(&fixture("circle12.csv")), "--theta", "1.0", "--alpha", "1.0", "--eps", "0.5",
    ]);
    assert_eq!(fail.status.code(), Some(4));
    let r = json(&fail);
    assert_eq!(r["hypothesis"]["holds"], false);
    assert!(r["hypothesis"]["failing_pair"].is_array());

    let pass = run(&[
        "net-bound", "--input", path(&fixture("circle12.csv")), "--theta", "1.0", "--alpha", "0.5", "--eps", "0.5",
    ]);
    assert_eq!(pass.status.code(), Some(0));
    assert_eq!(json(&pass)["bound_ok"], true);
}
