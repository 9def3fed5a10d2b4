use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn critwin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critwin"))
        .args(args)
        .env_remove("CW_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn digests(dir: &Path) -> Vec<(String, String)> {
    manifest(dir)["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["path"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn simulate_graph_writes_files_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let o = critwin(&["simulate-graph", "--n", "200", "--x", "1", "--replicates", "3", "--walk", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for r in 0..3 {
        for stem in ["trace", "cousin", "walk"] {
            assert!(out.join(format!("{stem}_{r:04}.csv")).exists());
        }
    }
    let stdout: serde_json::Value = serde_json::from_slice(&o.stdout).expect("stdout is JSON");
    assert_eq!(stdout["files"].as_array().unwrap().len(), 9);
    let trace = fs::read_to_string(out.join("trace_0000.csv")).unwrap();
    assert!(trace.starts_with("h,Z,C\n0,5,5\n"));
    assert!(trace.trim_end().lines().last().unwrap().split(',').nth(1) == Some("0"));
}

#[test]
fn replays_reproduce_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<(String, String)>> = (0..2)
        .map(|i| {
            let out = tmp.path().join(format!("run{i}"));
            let threads = if i == 0 { "1" } else { "3" };
            let o = critwin(&["simulate-chain", "--n", "100000", "--replicates", "8", "--seed", "9", "--threads", threads, "--out", out.to_str().unwrap()]);
            assert_eq!(code(&o), 0);
            digests(&out)
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0].len(), 16);
}

#[test]
fn seed_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, seed_flag: Option<&str>, env: Option<&str>| {
        let out = tmp.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_critwin"));
        cmd.args(["continuum", "sde", "--dt", "0.01", "--out", out.to_str().unwrap()]);
        if let Some(s) = seed_flag {
            cmd.args(["--seed", s]);
        }
        cmd.env_remove("CW_SEED");
        if let Some(e) = env {
            cmd.env("CW_SEED", e);
        }
        assert!(cmd.output().unwrap().status.success());
        digests(&out)
    };
    assert_eq!(run("a", Some("12"), None), run("b", None, Some("12")));
    assert_ne!(run("c", None, Some("12")), run("d", None, Some("13")));
    assert_eq!(run("e", Some("12"), Some("99")), run("a2", Some("12"), None));
}

#[test]
fn config_file_and_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    fs::write(&cfg, "# general window\nn = 100000\nwindow = general\nepsilon = 0.1\nx = 1\nlambda = 0.5\nseed = 3\nreplicates = 2\n").unwrap();
    let out = tmp.path().join("o");
    let o = critwin(&["simulate-chain", "--config", cfg.to_str().unwrap(), "--replicates", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["run"]["replicates"], 1);
    assert_eq!(m["config"]["run"]["window"], "general");
    assert_eq!(m["config"]["k"], 1000);

    fs::write(&cfg, "n = 100\nbogus = 1\n").unwrap();
    let o = critwin(&["simulate-chain", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn configuration_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(code(&critwin(&["simulate-graph", "--replicates", "0", "--out", out])), 1);
    assert_eq!(code(&critwin(&["simulate-chain", "--replicates", "0", "--out", out])), 1);
    assert_eq!(code(&critwin(&["simulate-chain", "--n", "8", "--x", "0.1", "--out", out])), 1);
    assert_eq!(code(&critwin(&["simulate-chain", "--window", "general", "--out", out])), 1);
    assert_eq!(code(&critwin(&["continuum", "sde", "--dt", "0", "--out", out])), 1);
    assert_eq!(code(&critwin(&["continuum", "sde", "--dt", "-0.1", "--out", out])), 1);
    assert_eq!(code(&critwin(&["continuum", "bogus", "--out", out])), 1);
    assert_eq!(code(&critwin(&["verify", "bogus"])), 1);
    assert_eq!(code(&critwin(&["no-such-command"])), 1);
}

#[test]
fn unwritable_output_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("sub");
    for args in [
        vec!["simulate-graph", "--n", "50"],
        vec!["simulate-chain", "--n", "50"],
        vec!["continuum", "deterministic"],
    ] {
        let mut args = args.clone();
        args.extend(["--out", out.to_str().unwrap()]);
        assert_eq!(code(&critwin(&args)), 2, "{args:?}");
    }
}

#[test]
fn deterministic_curve_reaches_tanh() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let o = critwin(&["continuum", "deterministic", "--x", "0.5", "--lambda", "0", "--dt", "0.01", "--t-max", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.join("deterministic.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,f,c,z,K"));
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 2.0);
    assert!((last[2] - 0.761594).abs() < 1e-6);
    assert!((last[4] - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn continuum_kinds_write_their_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("sde", "path_0000.csv", "t,Z,C"),
        ("lamperti", "path_0000.csv", "t,Z,C"),
        ("parabolic", "path_0000.csv", "t,X"),
        ("hitting", "hitting.csv", "replicate,T,truncated"),
    ];
    for (kind, file, header) in cases {
        let out = tmp.path().join(kind);
        let o = critwin(&["continuum", kind, "--dt", "0.001", "--t-max", "0.5", "--replicates", "2", "--lambda", "-1", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{kind}: {}", String::from_utf8_lossy(&o.stderr));
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert_eq!(text.lines().next(), Some(header));
        if kind != "hitting" {
            assert_eq!(text.lines().count(), 502);
        }
    }
}

#[test]
fn verify_reports_json_and_exit_codes() {
    for suite in ["identities", "kernel"] {
        let o = critwin(&["verify", suite]);
        assert_eq!(code(&o), 0);
        let reports: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let r = &reports[0];
        for key in ["test_name", "statistic", "tolerance", "n", "N", "seed", "pass"] {
            assert!(r.get(key).is_some(), "{suite}: missing {key}");
        }
        assert_eq!(r["pass"], true);
    }

    // far too small a population for the cousin limit: honest failure
    let o = critwin(&["verify", "cousin", "--n", "1000", "--replicates", "20"]);
    assert_eq!(code(&o), 3);
    let reports: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(reports[0]["pass"], false);

    // exploratory suite never fails
    let o = critwin(&["verify", "conjecture", "--n", "20000", "--replicates", "2"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn verify_writes_manifest_when_asked() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let o = critwin(&["verify", "deterministic", "--replicates", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let m = manifest(&out);
    assert_eq!(m["command"], "verify deterministic");
    assert_eq!(m["files"][0]["path"], "reports.json");
}
