use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bottomk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bottomk"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn bottomk")
}

fn json_line(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    serde_json::from_str(text.trim()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// 60 items; even ids are `red`.
fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("id,weight,attr:color\n");
    for i in 0..60 {
        let color = if i % 2 == 0 { "red" } else { "blue" };
        csv.push_str(&format!("i{i},{},{color}\n", 1.0 + (i % 7) as f64 * 0.5));
    }
    fs::write(dir.path().join("items.csv"), csv).unwrap();
    dir
}

fn sketch(dir: &Path, extra: &[&str], out: &str) {
    let mut args = vec!["sketch", "--input", "items.csv", "--k", "12", "--out", out];
    args.extend_from_slice(extra);
    json_line(&bottomk(&args, dir));
}

#[test]
fn sketch_summary_and_determinism() {
    let dir = setup();
    let s = json_line(&bottomk(&["sketch", "--input", "items.csv", "--k", "12", "--out", "a.json"], dir.path()));
    assert_eq!(s["entries"], 12);
    assert_eq!(s["items"], 60);
    bottomk(&["sketch", "--input", "items.csv", "--k", "12", "--out", "b.json"], dir.path());
    let a = fs::read_to_string(dir.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.json")).unwrap());
    bottomk(&["sketch", "--input", "items.csv", "--k", "12", "--seed", "9", "--out", "c.json"], dir.path());
    assert_ne!(a, fs::read_to_string(dir.path().join("c.json")).unwrap());
}

#[test]
fn estimates_print_one_json_line() {
    let dir = setup();
    sketch(dir.path(), &[], "s.json");
    for est in ["ws-rc", "ws-sc-exact", "ws-sc-markov", "ws-prefix", "ws-ml"] {
        let v = json_line(&bottomk(
            &["estimate", "--sketch", "s.json", "--estimator", est, "--predicate", "color == red"],
            dir.path(),
        ));
        assert_eq!(v["method"], est);
        assert!(v["estimate"].as_f64().unwrap() > 0.0);
    }
    // the whole set under sc-exact with the stored total is exact
    let v = json_line(&bottomk(&["estimate", "--sketch", "s.json", "--estimator", "ws-sc-exact"], dir.path()));
    let w = v["total_weight"].as_f64().unwrap();
    assert!((v["estimate"].as_f64().unwrap() - w).abs() < 1e-9 * w);
}

#[test]
fn bounds_bracket_and_order() {
    let dir = setup();
    sketch(dir.path(), &[], "s.json");
    for m in ["ws-normal", "ws-quantile", "ws-w"] {
        let v = json_line(&bottomk(
            &["bounds", "--sketch", "s.json", "--method", m, "--predicate", "color == red", "--draws", "50"],
            dir.path(),
        ));
        let (lo, hi) = (v["lower"].as_f64().unwrap(), v["upper"].as_f64().unwrap());
        assert!(0.0 <= lo && lo <= hi, "{m}: {v}");
    }
    let v = json_line(&bottomk(&["bounds", "--sketch", "s.json", "--method", "ws-density"], dir.path()));
    assert!(v["lower"].as_f64().unwrap() <= v["upper"].as_f64().unwrap());
}

#[test]
fn family_mismatch_is_capability_error() {
    let dir = setup();
    sketch(dir.path(), &["--family", "pri"], "p.json");
    sketch(dir.path(), &["--kmins"], "m.json");
    let out = bottomk(&["estimate", "--sketch", "p.json", "--estimator", "ws-rc"], dir.path());
    assert_eq!(code(&out), 3);
    let out = bottomk(&["bounds", "--sketch", "p.json", "--method", "wsr"], dir.path());
    assert_eq!(code(&out), 3);
    // wsr-ht without a known total
    let out = bottomk(&["estimate", "--sketch", "m.json", "--estimator", "wsr-ht"], dir.path());
    assert_eq!(code(&out), 3);
    let v = json_line(&bottomk(&["estimate", "--sketch", "m.json", "--estimator", "wsr"], dir.path()));
    assert!(v["estimate"].as_f64().unwrap() > 0.0);
    let v = json_line(&bottomk(&["bounds", "--sketch", "p.json", "--method", "pri", "--predicate", "color == red"], dir.path()));
    assert_eq!(v["solver"], "pri-chernoff");
}

#[test]
fn bad_input_exits_2() {
    let dir = setup();
    sketch(dir.path(), &[], "s.json");
    let out = bottomk(&["estimate", "--sketch", "s.json", "--estimator", "nope"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ws-sc-markov"));
    let out = bottomk(&["estimate", "--sketch", "s.json", "--estimator", "ws-rc", "--predicate", "color = red"], dir.path());
    assert_eq!(code(&out), 2);
    let out = bottomk(&["estimate", "--sketch", "missing.json", "--estimator", "ws-rc"], dir.path());
    assert_eq!(code(&out), 2);
    fs::write(dir.path().join("junk.json"), "{").unwrap();
    let out = bottomk(&["estimate", "--sketch", "junk.json", "--estimator", "ws-rc"], dir.path());
    assert_eq!(code(&out), 2);
    // overlapping sets cannot be merged
    let out = bottomk(&["merge", "s.json", "s.json", "--k", "5", "--out", "m.json"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn merge_of_disjoint_halves() {
    let dir = setup();
    let text = fs::read_to_string(dir.path().join("items.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let (a, b): (Vec<_>, Vec<_>) = lines.enumerate().partition(|(i, _)| *i < 30);
    let join = |v: Vec<(usize, &str)>| v.into_iter().fold(format!("{header}\n"), |s, (_, l)| s + l + "\n");
    fs::write(dir.path().join("a.csv"), join(a)).unwrap();
    fs::write(dir.path().join("b.csv"), join(b)).unwrap();
    json_line(&bottomk(&["sketch", "--input", "a.csv", "--k", "8", "--out", "a.json"], dir.path()));
    json_line(&bottomk(&["sketch", "--input", "b.csv", "--k", "8", "--seed", "7", "--out", "b.json"], dir.path()));
    let v = json_line(&bottomk(&["merge", "a.json", "b.json", "--k", "8", "--out", "ab.json"], dir.path()));
    assert_eq!(v["entries"], 8);
    json_line(&bottomk(&["estimate", "--sketch", "ab.json", "--estimator", "ws-rc"], dir.path()));
}

#[test]
fn simulate_writes_csv() {
    let dir = setup();
    fs::write(
        dir.path().join("sim.conf"),
        "distribution = uniform\nn = 40\nk = 4\ng = 10, n\nbound_g = n\nreps = 4\nestimators = ws-rc, wsr\nbounds = ws-normal, pri\n",
    )
    .unwrap();
    let out = bottomk(&["simulate", "sim.conf", "--out", "t.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "method,k,g,group,metric,value,count"));
    assert!(csv.lines().any(|l| l.starts_with("ws-normal,4,40,all,in_bounds,")));
    assert!(csv.lines().any(|l| l.starts_with("wsr,4,40,all,sse,")));

    fs::write(dir.path().join("bad.conf"), "n = 40\ng = 7\n").unwrap();
    assert_eq!(code(&bottomk(&["simulate", "bad.conf"], dir.path())), 4);
    fs::write(dir.path().join("bad2.conf"), "bounds = ws-normal, nope\n").unwrap();
    assert_eq!(code(&bottomk(&["simulate", "bad2.conf"], dir.path())), 4);
}
