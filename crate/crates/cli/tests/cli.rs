use std::path::PathBuf;
use std::process::{Command, Output};

fn soseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soseq")).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn preset_list_and_show() {
    let o = soseq(&["preset", "list"]);
    assert!(o.status.success());
    for name in ["dogancay7", "mimo2x2", "mix4x4", "rayleigh3", "identity"] {
        assert!(stdout(&o).contains(name));
    }
    let o = soseq(&["preset", "show", "dogancay7"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("[channel]"));
    assert!(stdout(&o).contains("0.634"));
}

#[test]
fn unknown_preset_exits_with_error() {
    let o = soseq(&["preset", "show", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mix4x4"));
}

#[test]
fn run_writes_identical_outputs_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = Vec::new();
    let config_path = config("smoke.toml");
    for (i, extra) in [&["--sequential"][..], &[]].iter().enumerate() {
        let out = dir.path().join(format!("r{i}/out.csv"));
        let mut args = vec!["run", "--config", &config_path, "--out", out.to_str().unwrap(), "--no-timing"];
        args.extend_from_slice(extra);
        let o = soseq(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("co-cma-pp2"));
        assert!(out.with_extension("json").exists());
        csv.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let o = soseq(&[
        "run", "--config", &config("smoke.toml"), "--out", out.to_str().unwrap(),
        "--runs", "1", "--seed", "99", "--snr", "inf", "--no-timing",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains(",inf,")), "{text}");
}

#[test]
fn missing_config_is_an_error() {
    let o = soseq(&["run", "--config", "/nonexistent.toml", "--out", "/tmp/x.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_sdp_writes_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.sdp");
    let o = soseq(&["export-sdp", "--config", &config("smoke.toml"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::metadata(&out).unwrap().len() > 0);
    assert!(stdout(&o).contains("Gram size"));
}

#[test]
fn verify_property_suites_pass() {
    let o = soseq(&["verify"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.contains(": PASS:")).count(), 7, "{text}");
}
