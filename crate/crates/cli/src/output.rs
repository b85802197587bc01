//! Writes a [`ResultBundle`] as CSV tables and a JSON summary.

use std::path::{Path, PathBuf};

use langevin_core::rng::RNG_ALGORITHM;
use serde_json::json;

use crate::error::CliError;
use crate::experiment::ResultBundle;

pub const SUMMARY_FILE: &str = "summary.json";
pub const AVAR_FILE: &str = "avar_table.csv";
pub const MSE_FILE: &str = "mse_trace.csv";
pub const KSD_FILE: &str = "ksd.csv";
pub const APPENDIX_FILE: &str = "appendix_sweep.csv";
pub const APPENDIX_MC_FILE: &str = "appendix_mc.csv";
pub const DATASET_FILE: &str = "dataset.csv";

fn num(v: f64) -> String {
    v.to_string()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    Ok(csv::Writer::from_path(path)?)
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes every table and returns the paths written.
pub fn emit_results(bundle: &ResultBundle, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::new();

    if !bundle.kinds.is_empty() {
        let path = out_dir.join(AVAR_FILE);
        let mut w = writer(&path)?;
        w.write_record(["kind", "observable", "mean", "std"])?;
        for k in &bundle.kinds {
            for o in &k.observables {
                w.write_record([
                    k.kind.as_str(),
                    o.name.as_str(),
                    &num(o.avar_mean),
                    &num(o.avar_std),
                ])?;
            }
        }
        finish(w, &path)?;
        written.push(path);

        let path = out_dir.join(MSE_FILE);
        let mut w = writer(&path)?;
        w.write_record(["kind", "observable", "K", "bias_sq", "variance", "mse"])?;
        for k in &bundle.kinds {
            for o in &k.observables {
                for p in &o.trace {
                    w.write_record([
                        k.kind.as_str(),
                        o.name.as_str(),
                        &p.k.to_string(),
                        &num(p.bias_sq),
                        &num(p.variance),
                        &num(p.mse),
                    ])?;
                }
            }
        }
        finish(w, &path)?;
        written.push(path);

        if bundle.kinds.iter().any(|k| k.ksd.is_some()) {
            let path = out_dir.join(KSD_FILE);
            let mut w = writer(&path)?;
            w.write_record(["kind", "K", "ksd", "ksd_std"])?;
            for k in &bundle.kinds {
                for p in k.ksd.iter().flat_map(|r| &r.points) {
                    w.write_record([k.kind.as_str(), &p.k.to_string(), &num(p.mean), &num(p.std)])?;
                }
            }
            finish(w, &path)?;
            written.push(path);
        }
    }

    if let Some((dataset, _)) = &bundle.dataset {
        let path = out_dir.join(DATASET_FILE);
        std::fs::write(&path, dataset.to_csv()).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }

    if let Some(app) = &bundle.appendix {
        let path = out_dir.join(APPENDIX_FILE);
        let mut w = writer(&path)?;
        w.write_record([
            "h",
            "K",
            "delta",
            "s",
            "linear_bias_sq",
            "linear_trace_var",
            "quad_mean",
            "quad_bias_sq",
            "quad_variance",
            "asymptotic_trace_var",
        ])?;
        for r in &app.rows {
            w.write_record([
                num(r.h),
                r.k.to_string(),
                num(r.delta),
                num(r.s),
                num(r.linear_bias_sq),
                num(r.linear_trace_var),
                num(r.quad_mean),
                num(r.quad_bias_sq),
                num(r.quad_variance),
                num(r.asymptotic_trace_var),
            ])?;
        }
        finish(w, &path)?;
        written.push(path);

        if !app.mc.is_empty() {
            let path = out_dir.join(APPENDIX_MC_FILE);
            let mut w = writer(&path)?;
            w.write_record([
                "observable",
                "h",
                "K",
                "delta",
                "quantity",
                "closed_form",
                "estimate",
                "std_error",
                "z",
            ])?;
            for r in &app.mc {
                w.write_record([
                    r.observable.to_string(),
                    num(r.h),
                    r.k.to_string(),
                    num(r.delta),
                    r.quantity.to_string(),
                    num(r.closed_form),
                    num(r.estimate),
                    num(r.std_error),
                    num(r.z),
                ])?;
            }
            finish(w, &path)?;
            written.push(path);
        }
    }

    let summary = json!({
        "config": bundle.config,
        "rng_algorithm": RNG_ALGORITHM,
        "master_seed": bundle.scale.map(|s| s.master_seed),
        "paper_scale": bundle.paper_scale,
        "scale": bundle.scale,
        "dataset": bundle.dataset.as_ref().map(|(_, r)| r),
        "wall_clock_seconds": bundle.wall_clock_seconds,
        "chain_aborts": bundle.kinds.iter().map(|k| (k.kind.clone(), k.chains_aborted)).collect::<std::collections::BTreeMap<_, _>>(),
        "kinds": bundle.kinds,
        "appendix": bundle.appendix.as_ref().map(|a| json!({
            "rows": a.rows.len(),
            "mc_checks": a.mc.len(),
            "mc_max_abs_z": a.mc.iter().map(|r| r.z.abs()).fold(0.0, f64::max),
        })),
    });
    let path = out_dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary)?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(written)
}
