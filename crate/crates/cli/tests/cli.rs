use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn blockpd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockpd"))
        .args(args)
        .current_dir(cwd)
        .env_remove("BLOCKPD_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Temp dir holding `gen/problem.json` for the grouped benchmark.
fn generated() -> TempDir {
    let dir = TempDir::new().unwrap();
    let o = blockpd(&["generate", "--seed", "1", "--preset", "grouped", "--out", "gen"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir
}

#[test]
fn help_documents_commands_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let o = blockpd(&["--help"], dir.path());
    let text = String::from_utf8_lossy(&o.stdout);
    for word in ["solve", "sweep", "bounds", "generate", "verify", "Exit codes", "BLOCKPD_OUT"] {
        assert!(text.contains(word), "--help lacks {word}");
    }
}

#[test]
fn solve_writes_verified_outputs() {
    let dir = generated();
    let o = blockpd(&["solve", "--problem", "gen/problem.json", "--out", "run"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = dir.path().join("run");
    let manifest = json(&run.join("manifest.json"));
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
    let outputs = manifest["outputs"].as_array().unwrap();
    let names: Vec<_> = outputs.iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["trace.csv", "summary.json", "bounds.json"]);
    let trace = fs::read_to_string(run.join("trace.csv")).unwrap();
    assert_eq!(outputs[0]["rows"].as_u64().unwrap() as usize, trace.lines().count() - 1);
    assert_eq!(outputs[0]["bytes"].as_u64().unwrap() as usize, trace.len());
    let summary = json(&run.join("summary.json"));
    assert_eq!(summary["converged"], true);
    assert_eq!(summary["counters"]["mixed_stamp_computations"], 0);
    let bounds = json(&run.join("bounds.json"));
    assert!(bounds["rates"]["c3"].as_f64().unwrap() > 0.0);
    assert_eq!(bounds["run"]["violations"], 0);
    assert_eq!(code(&blockpd(&["verify", "run"], dir.path())), 0);
}

#[test]
fn verify_detects_tampering() {
    let dir = generated();
    assert_eq!(code(&blockpd(&["solve", "--problem", "gen/problem.json", "--out", "run"], dir.path())), 0);
    let trace = dir.path().join("run/trace.csv");
    let mut bytes = fs::read(&trace).unwrap();
    let last = bytes.len() - 2;
    bytes[last] = if bytes[last] == b'0' { b'1' } else { b'0' };
    fs::write(&trace, bytes).unwrap();
    let o = blockpd(&["verify", "run"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("sha256"), "{}", stderr(&o));
}

#[test]
fn solve_is_reproducible() {
    let dir = generated();
    fs::write(dir.path().join("cfg.json"), r#"{"seed": 5, "p_update": 0.6, "p_comm": 0.5, "delay": 0.3}"#).unwrap();
    for out in ["a", "b"] {
        let o = blockpd(
            &["solve", "--problem", "gen/problem.json", "--config", "cfg.json", "--out", out],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a/trace.csv")).unwrap();
    let b = fs::read(dir.path().join("b/trace.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn budget_exhaustion_exits_2() {
    let dir = generated();
    fs::write(dir.path().join("cfg.json"), r#"{"steps": 5}"#).unwrap();
    let o = blockpd(
        &["solve", "--problem", "gen/problem.json", "--config", "cfg.json", "--out", "run"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert_eq!(json(&dir.path().join("run/manifest.json"))["exit_code"], 2);
}

#[test]
fn gamma_above_limit_names_the_condition() {
    let dir = generated();
    fs::write(dir.path().join("cfg.json"), r#"{"gamma": 5.0}"#).unwrap();
    let o = blockpd(
        &["solve", "--problem", "gen/problem.json", "--config", "cfg.json", "--out", "run"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("gamma = 5") && err.contains("0 < gamma < 1/"), "{err}");
}

#[test]
fn missing_file_exits_1() {
    let dir = TempDir::new().unwrap();
    let o = blockpd(&["solve", "--problem", "absent.json"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("absent.json"));
}

#[test]
fn schema_errors_are_line_anchored() {
    let dir = generated();
    fs::write(dir.path().join("cfg.json"), "{\n  \"steps\": 10,\n  \"bogus\": 1\n}\n").unwrap();
    let o = blockpd(
        &["solve", "--problem", "gen/problem.json", "--config", "cfg.json", "--out", "run"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("cfg.json:3:"), "{}", stderr(&o));

    fs::write(dir.path().join("p.json"), "{\n  \"n\": 1,\n  \"m\": \"two\"\n}\n").unwrap();
    let o = blockpd(&["solve", "--problem", "p.json", "--out", "run"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("p.json:3:"), "{}", stderr(&o));
}

#[test]
fn output_dir_defaults_to_environment() {
    let dir = generated();
    let o = Command::new(env!("CARGO_BIN_EXE_blockpd"))
        .args(["solve", "--problem", "gen/problem.json"])
        .current_dir(dir.path())
        .env("BLOCKPD_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("from-env/manifest.json").exists());
}

#[test]
fn bounds_report_round_trips() {
    let dir = generated();
    let o = blockpd(&["bounds", "--problem", "gen/problem.json", "--eps1", "0.1", "--eps2", "0.1"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["rates"]["c3"].as_f64().unwrap() > 0.0);
    assert_eq!(r["delta"], 0.1);
    assert_eq!(r["round_trip_ok"], true);
    assert!(r["round_trip_bound"].as_f64().unwrap() <= 0.2 + 1e-9);
    assert!(r["corollary"]["k_min"].as_u64().unwrap() > 0);
}

#[test]
fn huge_targets_need_no_rounds() {
    let dir = generated();
    let o = blockpd(&["bounds", "--problem", "gen/problem.json", "--eps1", "1e30", "--eps2", "1e30"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["corollary"]["k_min"], 0);
    assert_eq!(r["corollary"]["t_min"], 0);
}

#[test]
fn unreachable_eps2_exits_3_with_frontier() {
    let dir = generated();
    let o = blockpd(&["bounds", "--problem", "gen/problem.json", "--eps1", "1", "--eps2", "1e-12"], dir.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("smallest asynchrony penalty"), "{}", stderr(&o));
}

fn sweep_ticks(kind: &str) -> Vec<(String, u64)> {
    let dir = TempDir::new().unwrap();
    let o = blockpd(&["sweep", "--kind", kind, "--seed", "0", "--out", "sw"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&blockpd(&["verify", "sw"], dir.path())), 0);
    let text = fs::read_to_string(dir.path().join("sw/aggregate.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let label = header.iter().position(|h| *h == "label").unwrap();
    let ticks = header.iter().position(|h| *h == "ticks_to_threshold").unwrap();
    let rows: Vec<_> = lines
        .map(|l| {
            let f: Vec<_> = l.split(',').collect();
            (f[label].to_string(), f[ticks].parse().unwrap())
        })
        .collect();
    for (l, _) in &rows {
        let sub = dir.path().join("sw").join(l.replace('=', "_"));
        assert!(sub.join("trace.csv").exists() && sub.join("summary.json").exists());
    }
    rows
}

#[test]
fn beta_sweep_speeds_up_with_beta() {
    let rows = sweep_ticks("beta");
    let labels: Vec<_> = rows.iter().map(|r| r.0.as_str()).collect();
    assert_eq!(labels, ["beta=0.1", "beta=0.25", "beta=0.75"]);
    assert!(rows[0].1 > rows[1].1 && rows[1].1 > rows[2].1, "{rows:?}");
}

#[test]
fn commrate_sweep_slows_with_less_communication() {
    let rows = sweep_ticks("commrate");
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[0].1 >= w[1].1), "{rows:?}");
}

#[test]
fn grouped_blocks_beat_scalar_blocks() {
    let rows = sweep_ticks("blocks");
    let get = |l: &str| rows.iter().find(|r| r.0 == l).unwrap().1;
    assert!(get("grouped") < get("scalar"), "{rows:?}");
}
