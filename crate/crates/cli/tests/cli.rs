use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use roughkit::io::read_lifted_csv;
use roughkit::{GroupElement, Level};
use tempfile::TempDir;

fn roughkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughkit"))
        .args(args)
        .env_remove("ROUGHKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), stderr(out));
}

#[test]
fn sample_lift_metric_round_trip() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("path.csv");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_ok(&roughkit(&["sample", "--fine", "6", "--dim", "3", "--seed", "11", "--out", arg(&path)]));
    assert_ok(&roughkit(&["lift", "--in", arg(&path), "--level", "3", "--out", arg(&a)]));
    assert_ok(&roughkit(&["lift", "--in", arg(&path), "--level", "3", "--out", arg(&b)]));
    let out = roughkit(&["metric", "--x", arg(&a), "--y", arg(&b), "--p", "3.5"]);
    assert_ok(&out);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("distance,witness_s,witness_t,basepoint_term"));
    let distance: f64 = lines.next().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(distance < 1e-12, "{distance}");
}

#[test]
fn lift_of_a_segment_is_the_exponential_of_its_increment() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("segment.csv");
    let lifted = dir.path().join("lifted.csv");
    fs::write(&path, "t,x1,x2\n0,0.5,1\n1,2.5,0\n").unwrap();
    assert_ok(&roughkit(&["lift", "--in", arg(&path), "--level", "2", "--out", arg(&lifted)]));
    let (lift, _) = read_lifted_csv(BufReader::new(fs::File::open(&lifted).unwrap())).unwrap();
    let expected = GroupElement::exp_vector(&[2.0, -1.0], Level::Two);
    let got = lift.increment(0, 1);
    for (g, e) in got.tensor().as_slice().iter().zip(expected.tensor().as_slice()) {
        assert!((g - e).abs() < 1e-15, "{g} vs {e}");
    }
}

#[test]
fn counterexample_reports_its_status_line() {
    let out = roughkit(&["counterexample", "--p", "2.5", "--grid", "16", "--halvings", "2"]);
    assert_ok(&out);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().last().unwrap().starts_with("NOT_GOOD_SEQUENCE p=2.5"), "{text}");
}

#[test]
fn seed_determines_the_sample() {
    let run = |seed: &str| stdout(&roughkit(&["sample", "--driver", "fbm", "--hurst", "0.3", "--fine", "7", "--seed", seed]));
    assert_eq!(run("4"), run("4"));
    assert_ne!(run("4"), run("5"));
}

#[test]
fn config_file_fills_in_and_flags_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# sampler\nseed = 5\nfine = 5\n").unwrap();
    let direct = stdout(&roughkit(&["sample", "--seed", "5", "--fine", "5"]));
    assert_eq!(stdout(&roughkit(&["sample", "--config", arg(&cfg)])), direct);
    let overridden = stdout(&roughkit(&["sample", "--config", arg(&cfg), "--seed", "6"]));
    assert_eq!(overridden, stdout(&roughkit(&["sample", "--seed", "6", "--fine", "5"])));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "seed = 1\nreplcas = 8\n").unwrap();
    let out = roughkit(&["good-seq", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr(&out).trim(), "ERROR 1: unknown config key replcas on line 2");
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let bad_flag = roughkit(&["sample", "--nope"]);
    assert_eq!(bad_flag.status.code(), Some(1));
    assert!(stderr(&bad_flag).starts_with("ERROR 1: "));
    assert_eq!(stderr(&bad_flag).lines().count(), 1);

    assert_eq!(roughkit(&["lift", "--in", "/no/such/file.csv"]).status.code(), Some(1));
    assert_eq!(roughkit(&["counterexample", "--p", "3.5"]).status.code(), Some(1));
    assert_eq!(roughkit(&["--help"]).status.code(), Some(0));

    let dir = TempDir::new().unwrap();
    let path = dir.path().join("path.csv");
    assert_ok(&roughkit(&["sample", "--fine", "4", "--out", arg(&path)]));
    let blown = roughkit(&["solve", "--in", arg(&path), "--scheme", "ode", "--a", "1e300"]);
    assert_eq!(blown.status.code(), Some(2));
    assert!(stderr(&blown).starts_with("ERROR 2: "));
}

#[test]
fn small_good_sequence_study_writes_its_files() {
    let dir = TempDir::new().unwrap();
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = roughkit(&[
            "good-seq", "--fine", "9", "--levels", "2:6", "--replicas", "8", "--bootstrap", "50", "--seed", "7", "--threads", "2", "--out",
            arg(&out_dir),
        ]);
        assert_ok(&out);
        assert!(stdout(&out).starts_with("good_sequence slope="));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    let csv = fs::read(a.join("study.csv")).unwrap();
    assert_eq!(csv, fs::read(b.join("study.csv")).unwrap());
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2 + 8 * 5);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("study_summary.json")).unwrap()).unwrap();
    assert!(summary["slope"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["meta"]["threads"], 2);
}

#[test]
fn endpoint_initial_condition_study_runs() {
    let dir = TempDir::new().unwrap();
    let out = roughkit(&["wong-zakai", "--fine", "9", "--levels", "2:6", "--replicas", "8", "--y0", "endpoint", "--out", arg(dir.path())]);
    assert_ok(&out);
    assert!(stdout(&out).starts_with("wong_zakai slope="));
    let text = fs::read_to_string(dir.path().join("study.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert!(row[8].parse::<f64>().is_ok() && row[9].parse::<f64>().is_ok(), "{row:?}");
}

#[test]
fn lemmas_at_the_brownian_exponent_pass() {
    let out = roughkit(&["lemmas", "--hurst", "0.5", "--p-prime", "3", "--sizes", "4,8,16"]);
    assert_ok(&out);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
    assert!(report["lattice"].is_null());
}

#[test]
fn solve_schemes_agree_and_append_a_manifest() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("path.csv");
    let manifest = dir.path().join("runs.jsonl");
    assert_ok(&roughkit(&["sample", "--fine", "10", "--dim", "2", "--seed", "2", "--stream", "9", "--out", arg(&path)]));
    let terminal = |scheme: &str| -> f64 {
        let out = roughkit(&["solve", "--in", arg(&path), "--scheme", scheme, "--sigma", "0.3,0.2", "--a", "0.1", "--substeps", "4", "--manifest", arg(&manifest)]);
        assert_ok(&out);
        stdout(&out).lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap()
    };
    let (ode, rough) = (terminal("ode"), terminal("rough"));
    assert!((ode - rough).abs() < 1e-3 * ode.abs(), "{ode} vs {rough}");
    let lines: Vec<String> = fs::read_to_string(&manifest).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], r#"{"scheme":"ode","mesh":0.0009765625,"substeps":4,"seed":2,"stream":9}"#);
    assert_eq!(lines[1], r#"{"scheme":"rough","mesh":0.0009765625,"substeps":1,"seed":2,"stream":9}"#);
}
