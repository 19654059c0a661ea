use std::path::PathBuf;

use soseq::harness::properties::{determinism, smoke_config};
use soseq::harness::runner::run_seed;
use soseq::harness::{
    power_mean_db, preset, read_csv, run_scenario, summarize, write_csv, write_outputs, AlgorithmSpec, BlindCost, ChannelSpec,
    Execution, RunOptions, ScenarioConfig, PRESETS,
};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn quiet() -> RunOptions {
    RunOptions {
        execution: Execution::Sequential,
        timing: false,
    }
}

#[test]
fn shipped_configs_load_and_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.validate().unwrap();
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn toml_roundtrip() {
    let mut cfg = smoke_config();
    cfg.snr_db = f64::INFINITY;
    cfg.algorithms.push(AlgorithmSpec::bgd(BlindCost::Med));
    let text = cfg.to_toml().unwrap();
    assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg);
}

#[test]
fn config_errors_are_reported() {
    let good = smoke_config().to_toml().unwrap();
    assert!(ScenarioConfig::from_toml(&good.replace("runs = 3", "runs = 0")).is_err());
    assert!(ScenarioConfig::from_toml(&good.replace("samples = 200", "samplez = 200")).is_err());
    assert!(ScenarioConfig::from_toml(&good.replace("\"qpsk\"", "\"64qam\"")).is_err());
    let mut cfg = smoke_config();
    cfg.channel = ChannelSpec::Preset { name: "nope".into() };
    assert!(cfg.validate().is_err());
}

#[test]
fn every_preset_realizes() {
    for (name, _) in PRESETS {
        let ch = preset(name).unwrap().realize(1).unwrap();
        assert!(ch.n_tx() >= 1);
    }
}

#[test]
fn run_seeds_are_distinct_and_stable() {
    let seeds: std::collections::BTreeSet<u64> = (0..100).map(|r| run_seed(42, r)).collect();
    assert_eq!(seeds.len(), 100);
    assert_eq!(run_seed(42, 3), run_seed(42, 3));
}

#[test]
fn identity_channel_is_equalized_perfectly() {
    let mut cfg = smoke_config();
    cfg.channel = ChannelSpec::Preset { name: "identity".into() };
    cfg.snr_db = f64::INFINITY;
    cfg.runs = 1;
    cfg.equalizer_order = 0;
    cfg.algorithms = vec![AlgorithmSpec::co(BlindCost::Cma)];
    let r = run_scenario(&cfg, quiet()).unwrap();
    assert_eq!(r.rows.len(), 1);
    let isi = r.rows[0].isi_db.unwrap();
    assert!(isi <= -60.0, "ISI {isi} dB");
    assert_eq!(r.rows[0].ser, Some(0.0));
}

#[test]
fn pipeline_is_deterministic_across_execution_modes() {
    let outcome = determinism().unwrap();
    assert!(outcome.passed, "{}", outcome.detail);
}

#[test]
fn csv_and_summary_roundtrip() {
    let cfg = smoke_config();
    let r = run_scenario(&cfg, quiet()).unwrap();
    assert_eq!(r.rows.len(), cfg.runs * cfg.algorithms.len());
    assert!(r.rows.iter().all(|row| row.is_ok()), "{:?}", r.rows);
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("nested/out.csv");
    let json = write_outputs(&csv, &r.rows, &r.summary).unwrap();
    assert!(json.exists());
    assert_eq!(read_csv(&csv).unwrap(), r.rows);
    assert_eq!(summarize(&cfg.scenario, cfg.runs, &r.rows), r.summary);
    let mut a = Vec::new();
    write_csv(&r.rows, &mut a).unwrap();
    let header = String::from_utf8(a).unwrap().lines().next().unwrap().to_string();
    for col in ["run", "seed", "algorithm", "isi_db", "ncci_db", "ser", "tau", "solver_iters", "wall_ms"] {
        assert!(header.split(',').any(|c| c == col), "missing {col} in {header}");
    }
}

#[test]
fn relaxation_close_to_known_channel_benchmark() {
    let r = run_scenario(&smoke_config(), quiet()).unwrap();
    let co = &r.summary.algorithms["co-cma-pp2"];
    let opt = &r.summary.algorithms["optimum"];
    assert_eq!(co.failed, 0);
    assert!(co.isi_db.unwrap().mean <= opt.isi_db.unwrap().mean + 3.0);
}

#[test]
fn power_mean_is_dominated_by_worst_value() {
    assert_eq!(power_mean_db(&[]), None);
    assert!((power_mean_db(&[-10.0, -10.0]).unwrap() + 10.0).abs() < 1e-12);
    let m = power_mean_db(&[-40.0, -10.0]).unwrap();
    assert!((m - 10.0 * (0.5 * (1e-4 + 0.1f64)).log10()).abs() < 1e-12);
    assert!(m > -25.0);
}
