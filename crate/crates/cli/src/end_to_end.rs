//! End-to-end runs through the library entry points.

use std::path::{Path, PathBuf};

use crate::config::TargetConfig;
use crate::experiment::log_checkpoints;
use crate::{emit_results, run_experiment, RunConfig, RunOptions};

const SMALL: &str = r#"
[target]
example = "gaussian"

[dynamics]
kinds = ["LD", "GiIrr"]
delta = 1.0

[sampler]
h = 0.005
steps = 400
chains = 3
minibatch = 2
seed = 9

[diagnostics]
observables = ["phi1", "phi2"]
reference = "conjugate"
checkpoints = 8
ksd = { min = 20, max = 200, chains = 2 }
"#;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_into(text: &str, out: &Path) -> crate::ResultBundle {
    let cfg = RunConfig::from_toml(text).unwrap();
    let bundle = run_experiment(
        &cfg,
        &RunOptions {
            threads: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    emit_results(&bundle, out).unwrap();
    bundle
}

#[test]
fn every_shipped_config_parses_and_validates() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 6, "found {seen} configs");
}

#[test]
fn shipped_configs_match_documented_settings() {
    let load = |name: &str| RunConfig::load(&configs_dir().join(name)).unwrap();
    let g = load("gaussian.toml");
    let s = g.sampler.as_ref().unwrap();
    assert_eq!((s.h, s.steps, s.minibatch), (5e-3, 100_000, Some(2)));
    let np = load("normal_params.toml");
    let s = np.sampler.as_ref().unwrap();
    assert_eq!((s.h, s.minibatch, s.burn_in_time), (1e-3, Some(6), 10.0));
    assert_eq!(np.dynamics.as_ref().unwrap().delta, Some(2.0));
    let full = load("normal_params_full.toml");
    assert_eq!(full.sampler.as_ref().unwrap().minibatch, None);
    let ica = load("ica.toml");
    assert!(matches!(ica.target, Some(TargetConfig::Ica(_))));
    let s = ica.sampler.as_ref().unwrap();
    assert_eq!((s.h, s.minibatch), (2e-5, Some(40)));
    assert!(((s.steps as f64) * s.h - 20.0).abs() < 1e-9);
}

#[test]
fn smoke_run_writes_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_into(SMALL, dir.path());
    for f in [
        "avar_table.csv",
        "mse_trace.csv",
        "ksd.csv",
        "dataset.csv",
        "summary.json",
    ] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    assert_eq!(bundle.kinds.len(), 2);
    for k in &bundle.kinds {
        assert_eq!(k.chains_finished, 3);
        for o in &k.observables {
            assert!(o.avar_mean.is_finite() && o.avar_mean > 0.0);
        }
    }
}

#[test]
fn mse_trace_has_one_row_per_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    run_into(SMALL, dir.path());
    let mut r = csv::Reader::from_path(dir.path().join("mse_trace.csv")).unwrap();
    let rows = r.records().count();
    assert_eq!(rows, 2 * 2 * log_checkpoints(400, 8).len());
    let mut r = csv::Reader::from_path(dir.path().join("avar_table.csv")).unwrap();
    assert_eq!(r.records().count(), 4);
}

#[test]
fn same_seed_gives_identical_tables() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_into(SMALL, a.path());
    run_into(SMALL, b.path());
    for f in ["avar_table.csv", "mse_trace.csv", "ksd.csv", "dataset.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = RunConfig::from_toml(SMALL).unwrap();
    let one = run_experiment(
        &cfg,
        &RunOptions {
            threads: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    let two = run_experiment(
        &cfg,
        &RunOptions {
            threads: Some(2),
            ..Default::default()
        },
    )
    .unwrap();
    for (p, q) in one.kinds.iter().zip(&two.kinds) {
        for (o, r) in p.observables.iter().zip(&q.observables) {
            assert_eq!(o.avar_mean.to_bits(), r.avar_mean.to_bits());
        }
    }
}

#[test]
fn summary_records_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    run_into(SMALL, dir.path());
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["master_seed"], 9);
    assert!(v["rng_algorithm"].as_str().unwrap().starts_with("ChaCha8"));
    assert_eq!(v["config"]["sampler"]["steps"], 400);
    assert_eq!(v["config"]["dynamics"]["kinds"][1], "GiIrr");
    assert_eq!(v["dataset"]["rows"], 10);
    assert_eq!(v["dataset"]["csv_sha256"].as_str().unwrap().len(), 64);
    assert!(v["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn seed_override_changes_the_stream() {
    let cfg = RunConfig::from_toml(SMALL).unwrap();
    let a = run_experiment(
        &cfg,
        &RunOptions {
            threads: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    let b = run_experiment(
        &cfg,
        &RunOptions {
            threads: Some(1),
            seed: Some(10),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(b.scale.unwrap().master_seed, 10);
    assert_ne!(
        a.kinds[0].observables[0].avar_mean,
        b.kinds[0].observables[0].avar_mean
    );
}

#[test]
fn appendix_only_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_into(
        r#"
[appendix]
hs = [0.01]
ks = [50]
deltas = [0.0, 3.0]
replicates = 200
seed = 1
"#,
        dir.path(),
    );
    let app = bundle.appendix.unwrap();
    assert_eq!(app.rows.len(), 2);
    assert!(dir.path().join("appendix_sweep.csv").is_file());
    assert!(dir.path().join("appendix_mc.csv").is_file());
}
