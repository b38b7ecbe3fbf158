use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_distreg");

const THEOREM1: &str = "\
experiment = \"theorem1_scaling\"
seed = 42
trials = 100
m_list = [16, 64, 256]

[meta]
d = 1
";

fn run(dir: &Path, args: &[&str], threads: &str) -> std::process::Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("DISTREG_THREADS", threads)
        .output()
        .expect("binary runs")
}

#[test]
fn same_seed_gives_identical_csv_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.toml"), THEOREM1).unwrap();
    let a = run(dir.path(), &["theorem1_scaling", "--config", "t.toml", "--out", "a.csv"], "1");
    let b = run(dir.path(), &["theorem1_scaling", "--config", "t.toml", "--out", "b.csv"], "4");
    assert!(a.status.success() && b.status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d,m,mean,stderr,bound,trials");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("1,slope,"));
}

#[test]
fn summary_line_is_json_with_success_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "\
experiment = \"adaptive_regression\"
seed = 1
trials = 10
epsilon = 0.2
n = 1024
grid_points = 512

[meta]
lo = [0.0]
hi = [0.5]
distance_scale = 2.0
";
    std::fs::write(dir.path().join("a.toml"), cfg).unwrap();
    let out = run(dir.path(), &["adaptive_regression", "--config", "a.toml"], "2");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    let rate = v["summary"]["success_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    let csv = std::fs::read_to_string(dir.path().join("adaptive_regression.csv")).unwrap();
    assert!(csv.starts_with("trial,label,truth,abs_err,iterations,samples_drawn,converged\n"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn overrides_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.toml"), THEOREM1).unwrap();
    let out = run(
        dir.path(),
        &["theorem1_scaling", "--config", "t.toml", "--seed", "5", "--trials", "20", "--assert"],
        "1",
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["trials"], 20);
    let expected = if v["passed"].as_bool().unwrap() { 0 } else { 1 };
    assert_eq!(out.status.code(), Some(expected));

    let bad = run(dir.path(), &["nope", "--config", "t.toml"], "1");
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown experiment"));

    let mismatch = run(dir.path(), &["lemma1", "--config", "t.toml"], "1");
    assert_eq!(mismatch.status.code(), Some(2));

    let missing = run(dir.path(), &["lemma1", "--config", "absent.toml"], "1");
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn help_documents_defaults() {
    let out = Command::new(BIN).arg("--help").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["grid_points", "DISTREG_THREADS", "calibrated", "trials"] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        distreg::experiment::parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert_eq!(seen, 6);
}
