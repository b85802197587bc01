//! Runs the configured ensembles and reduces them to tables.

use std::path::{Path, PathBuf};
use std::time::Instant;

use langevin_core::appendix::{
    mc_crosscheck, sweep, ObservableKind, ScalarGaussianSetup, SweepRow,
};
use langevin_core::data::Dataset;
use langevin_core::diagnostics::{
    ensemble_stats, ksd_prefixes, ksd_schedule, ksd_slope, mean_std, EnsembleStats, Imq,
};
use langevin_core::geometry::{sample_points, validate_divergences, SkewMatrix};
use langevin_core::sampler::{
    simulate_chain, summarize, ChainSummary, Dynamics, DynamicsKind, InitialState, Observable,
    SamplerConfig,
};
use langevin_core::target::TargetModel;
use langevin_core::{Error, Matrix, Vector};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AppendixConfig, KsdConfig, ReferenceChoice, RunConfig};
use crate::error::CliError;
use crate::loader::{build_skew, initial_state, load_target, DatasetRecord};

/// Command-line overrides and execution settings.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub paper_scale: bool,
    /// Worker threads; the rayon default when `None`.
    pub threads: Option<usize>,
    /// Directory receiving one CSV of states per chain.
    pub dump_states: Option<PathBuf>,
    /// Directory that relative data paths are resolved against.
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scale {
    pub h: f64,
    pub steps: usize,
    pub chains: usize,
    pub burn_in_time: f64,
    pub burn_in_steps: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub mean_estimate: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub asymptotic_variance: f64,
    pub std_across_chains: f64,
}

impl From<EnsembleStats> for Stats {
    fn from(s: EnsembleStats) -> Self {
        Self {
            mean_estimate: s.mean_estimate,
            bias: s.bias,
            variance: s.variance,
            mse: s.mse,
            asymptotic_variance: s.asymptotic_variance,
            std_across_chains: s.std_across_chains,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MsePoint {
    /// Post-burn-in samples averaged.
    pub k: usize,
    pub bias_sq: f64,
    pub variance: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableResult {
    pub name: String,
    pub reference: f64,
    /// `None` when fewer than two chains finished.
    pub stats: Option<Stats>,
    /// Mean and standard deviation across chains of the batch-means AVar.
    pub avar_mean: f64,
    pub avar_std: f64,
    #[serde(skip)]
    pub trace: Vec<MsePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsdPoint {
    pub k: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsdResult {
    pub chains: usize,
    /// Least-squares log-log slope of the mean KSD; `NaN` if the fit fails.
    pub slope: f64,
    pub points: Vec<KsdPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindResult {
    pub kind: String,
    pub chains_finished: usize,
    pub chains_aborted: usize,
    pub abort_reasons: Vec<(usize, String)>,
    pub redraws: usize,
    pub observables: Vec<ObservableResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ksd: Option<KsdResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub observable: &'static str,
    pub h: f64,
    pub k: usize,
    pub delta: f64,
    pub quantity: &'static str,
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixResult {
    pub rows: Vec<SweepRow>,
    pub mc: Vec<McRow>,
}

pub struct ResultBundle {
    /// The configuration as run, with command-line overrides applied.
    pub config: RunConfig,
    pub paper_scale: bool,
    pub scale: Option<Scale>,
    pub dataset: Option<(Dataset, DatasetRecord)>,
    pub kinds: Vec<KindResult>,
    pub appendix: Option<AppendixResult>,
    pub wall_clock_seconds: f64,
}

/// Up to `count` distinct log-spaced sample counts in `[min(10, n), n]`.
pub fn log_checkpoints(n: usize, count: usize) -> Vec<usize> {
    let lo = n.clamp(1, 10) as f64;
    let hi = n as f64;
    let mut out: Vec<usize> = Vec::with_capacity(count);
    for i in 0..count {
        let t = if count == 1 {
            1.0
        } else {
            i as f64 / (count - 1) as f64
        };
        let k = (lo.ln() + t * (hi.ln() - lo.ln())).exp().round() as usize;
        let k = k.clamp(1, n);
        if out.last().is_none_or(|&last| k > last) {
            out.push(k);
        }
    }
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

/// Exact `E_π φ` for the Gaussian posterior `N(μ, Σ)`.
pub fn conjugate_expectation(obs: &Observable, mean: &Vector, cov: &Matrix) -> Option<f64> {
    let s = mean.sum();
    match obs {
        Observable::Phi1 => Some(s),
        Observable::Phi2 => Some(cov.trace() + mean.norm_squared()),
        Observable::Phi3 => Some(cov.sum() + s * s),
        Observable::Custom(..) => None,
    }
}

enum ChainOutcome {
    Done(ChainSummary),
    Aborted(usize, String),
}

fn effective_scale(cfg: &RunConfig, opts: &RunOptions) -> Option<Scale> {
    let s = cfg.sampler.as_ref()?;
    let (mut steps, mut chains, mut burn) = (s.steps, s.chains, s.burn_in_time);
    if opts.paper_scale {
        let p = s.paper_scale.clone().unwrap_or(crate::config::PaperScale {
            steps: None,
            chains: None,
            burn_in_time: None,
        });
        steps = p.steps.unwrap_or(s.steps * 10);
        chains = p.chains.unwrap_or(chains);
        burn = p.burn_in_time.unwrap_or(burn);
    }
    let mut probe = SamplerConfig::new(
        s.h,
        steps,
        langevin_core::sampler::InitialState::Fixed(Vector::zeros(1)),
    );
    probe.burn_in_time = burn;
    Some(Scale {
        h: s.h,
        steps,
        chains,
        burn_in_time: burn,
        burn_in_steps: probe.burn_in_steps(),
        master_seed: s.seed,
    })
}

fn write_states(
    dir: &Path,
    kind: DynamicsKind,
    chain: usize,
    states: &[Vector],
) -> Result<(), CliError> {
    let dir = dir.join(kind.name());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let path = dir.join(format!("chain_{chain}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    if let Some(first) = states.first() {
        let header: Vec<String> = std::iter::once("step".to_string())
            .chain((0..first.len()).map(|j| format!("theta{j}")))
            .collect();
        w.write_record(&header)?;
    }
    for (k, s) in states.iter().enumerate() {
        let row: Vec<String> = std::iter::once(k.to_string())
            .chain(s.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(())
}

/// KSD of the first post-burn-in states of the leading chains. Each chain
/// is replayed from its own stream, which reproduces the prefix of the main
/// run exactly without keeping the whole trajectory.
fn ksd_for_kind(
    target: &dyn TargetModel,
    dynamics: &Dynamics,
    base: &SamplerConfig,
    k: &KsdConfig,
) -> Result<KsdResult, CliError> {
    let burn = base.burn_in_steps();
    let max = k.max.min(base.steps - burn);
    let mut sizes = ksd_schedule(k.min, max);
    if sizes.last() != Some(&max) {
        sizes.push(max);
    }
    let mut replay = base.clone();
    replay.steps = burn + max;
    replay.record_states = true;
    let chains = k.chains.min(base.chains);
    let kernel = Imq::default();
    let per_chain: Vec<Option<Vec<(usize, f64)>>> = (0..chains)
        .into_par_iter()
        .map(|c| -> Result<Option<Vec<(usize, f64)>>, CliError> {
            let traj = match simulate_chain(target, dynamics, &replay, &[], c) {
                Ok(t) => t,
                Err(Error::ChainAborted { .. }) => return Ok(None),
                Err(e) => return Err(e.into()),
            };
            let samples = &traj.states[burn..burn + max];
            let grads = samples
                .iter()
                .map(|x| target.grad_log(x, None))
                .collect::<langevin_core::Result<Vec<_>>>()?;
            Ok(Some(ksd_prefixes(samples, &grads, &kernel, &sizes)?))
        })
        .collect::<Result<_, _>>()?;
    let done: Vec<&Vec<(usize, f64)>> = per_chain.iter().flatten().collect();
    let points: Vec<KsdPoint> = sizes
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let vals: Vec<f64> = done.iter().map(|p| p[i].1).collect();
            let (mean, std) = mean_std(&vals);
            KsdPoint { k, mean, std }
        })
        .collect();
    let pairs: Vec<(usize, f64)> = points.iter().map(|p| (p.k, p.mean)).collect();
    Ok(KsdResult {
        chains: done.len(),
        slope: ksd_slope(&pairs).unwrap_or(f64::NAN),
        points,
    })
}

fn run_appendix(a: &AppendixConfig) -> Result<AppendixResult, CliError> {
    let base = ScalarGaussianSetup {
        a: a.a,
        b: a.b,
        s_x: a.s_x,
        delta: a.deltas[0],
        h: a.hs[0],
        k: a.ks[0],
    };
    let rows = sweep(&base, &a.hs, &a.ks, &a.deltas)?;
    let mut mc = Vec::new();
    if a.replicates > 0 {
        let grid: Vec<(usize, ScalarGaussianSetup, ObservableKind, &'static str)> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                let s = ScalarGaussianSetup {
                    delta: r.delta,
                    h: r.h,
                    k: r.k,
                    ..base
                };
                [
                    (i, s, ObservableKind::Linear, "linear"),
                    (i, s, ObservableKind::Quadratic, "quadratic"),
                ]
            })
            .collect();
        let reports = grid
            .par_iter()
            .map(|(i, s, kind, _)| {
                mc_crosscheck(s, *kind, a.replicates, a.seed.wrapping_add(*i as u64))
            })
            .collect::<langevin_core::Result<Vec<_>>>()?;
        for ((_, s, _, name), rep) in grid.iter().zip(&reports) {
            for (quantity, e) in &rep.entries {
                mc.push(McRow {
                    observable: name,
                    h: s.h,
                    k: s.k,
                    delta: s.delta,
                    quantity,
                    closed_form: e.closed_form,
                    estimate: e.estimate,
                    std_error: e.std_error,
                    z: e.z_score(),
                });
            }
        }
    }
    Ok(AppendixResult { rows, mc })
}

/// Fails fast when the analytic `∇·B` or `∇·C` disagrees with finite
/// differences around the start.
fn check_divergences(
    target: &dyn TargetModel,
    skew: Option<&SkewMatrix>,
    initial: &InitialState,
) -> Result<(), CliError> {
    let Some(bundle) = target.geometry() else {
        return Ok(());
    };
    let center = match initial {
        InitialState::Fixed(v) => v.clone(),
        InitialState::RandomSignDiagonal { m } => {
            Vector::from_fn(m * m, |i, _| if i % (m + 1) == 0 { 1.0 } else { 0.0 })
        }
    };
    let spread = 0.05 * (1.0 + center.amax());
    let points: Vec<Vector> = sample_points(&center, spread, 8, 0)
        .into_iter()
        .filter(|p| target.admissible(p).unwrap_or(false))
        .chain(std::iter::once(center))
        .collect();
    validate_divergences(bundle, &points, skew, 1e-5, 1e-4)?;
    Ok(())
}

/// Runs every configured kind and the optional appendix sweep.
pub fn run_experiment(config: &RunConfig, opts: &RunOptions) -> Result<ResultBundle, CliError> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = opts.threads {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::config("--threads", e))?
    };
    pool.install(|| run_inner(config, opts))
}

fn run_inner(config: &RunConfig, opts: &RunOptions) -> Result<ResultBundle, CliError> {
    let started = Instant::now();
    let mut config = config.clone();
    if let (Some(seed), Some(s)) = (opts.seed, config.sampler.as_mut()) {
        s.seed = seed;
    }
    config.validate()?;
    let scale = effective_scale(&config, opts);

    let mut kinds = Vec::new();
    let mut dataset = None;
    if let (Some(tc), Some(dc), Some(sc), Some(scale)) =
        (&config.target, &config.dynamics, &config.sampler, scale)
    {
        let loaded = load_target(tc, &opts.base_dir)?;
        let target = loaded.model.as_ref();
        let observables = config.diagnostics.parsed_observables()?;
        let skew = build_skew(dc, tc, target.dim())?;
        let initial = initial_state(sc.initial.as_ref(), &loaded, tc)?;
        check_divergences(target, skew.as_ref(), &initial)?;
        let mut base = SamplerConfig::new(scale.h, scale.steps, initial);
        base.burn_in_time = scale.burn_in_time;
        base.minibatch = sc.minibatch;
        base.master_seed = scale.master_seed;
        base.chains = scale.chains;
        base.record_states = opts.dump_states.is_some();
        base.validate(target)?;
        let n_post = base.steps - base.burn_in_steps();
        let checkpoints = log_checkpoints(n_post, config.diagnostics.checkpoints);
        let batches = config.diagnostics.batches;

        let mut per_kind: Vec<(
            DynamicsKind,
            Vec<ChainSummary>,
            Vec<(usize, String)>,
            Option<KsdResult>,
        )> = Vec::new();
        for kind in dc.parsed_kinds()? {
            let dynamics = Dynamics::new(kind, skew.clone(), dc.beta)?;
            dynamics.check_target(target)?;
            log::info!(
                "running {kind}: {} chains x {} steps",
                base.chains,
                base.steps
            );
            let outcomes: Vec<ChainOutcome> = (0..base.chains)
                .into_par_iter()
                .map(|c| -> Result<ChainOutcome, CliError> {
                    match simulate_chain(target, &dynamics, &base, &observables, c) {
                        Ok(traj) => {
                            if let Some(dir) = &opts.dump_states {
                                write_states(dir, kind, c, &traj.states)?;
                            }
                            Ok(ChainOutcome::Done(summarize(
                                &traj,
                                base.h,
                                batches,
                                &checkpoints,
                            )?))
                        }
                        Err(e @ Error::ChainAborted { .. }) => {
                            log::warn!("{kind}: {e}");
                            Ok(ChainOutcome::Aborted(c, e.to_string()))
                        }
                        Err(e) => Err(e.into()),
                    }
                })
                .collect::<Result<_, _>>()?;
            let mut summaries = Vec::new();
            let mut aborted = Vec::new();
            for o in outcomes {
                match o {
                    ChainOutcome::Done(s) => summaries.push(s),
                    ChainOutcome::Aborted(c, r) => aborted.push((c, r)),
                }
            }
            let ksd = match &config.diagnostics.ksd {
                Some(k) => {
                    let mut replay = base.clone();
                    replay.record_states = false;
                    Some(ksd_for_kind(target, &dynamics, &replay, k)?)
                }
                None => None,
            };
            per_kind.push((kind, summaries, aborted, ksd));
        }

        let references: Vec<f64> = match config.diagnostics.reference {
            ReferenceChoice::Conjugate => {
                let (mean, cov) = loaded.conjugate.as_ref().ok_or_else(|| {
                    CliError::config("diagnostics.reference", "no conjugate moments")
                })?;
                observables
                    .iter()
                    .map(|o| conjugate_expectation(o, mean, cov).unwrap_or(f64::NAN))
                    .collect()
            }
            ReferenceChoice::Values => config
                .diagnostics
                .reference_values
                .clone()
                .unwrap_or_default(),
            ReferenceChoice::Pooled => (0..observables.len())
                .map(|o| {
                    let all: Vec<f64> = per_kind
                        .iter()
                        .flat_map(|(_, s, _, _)| s.iter().map(move |c| c.averages[o]))
                        .collect();
                    all.iter().sum::<f64>() / all.len() as f64
                })
                .collect(),
        };

        for (kind, summaries, aborted, ksd) in per_kind {
            let obs_results = observables
                .iter()
                .enumerate()
                .map(|(o, obs)| {
                    let finals: Vec<f64> = summaries.iter().map(|s| s.averages[o]).collect();
                    let stats = ensemble_stats(&finals, references[o], n_post as f64 * base.h)
                        .ok()
                        .map(Stats::from);
                    let avars: Vec<f64> = summaries.iter().map(|s| s.avar[o]).collect();
                    let (avar_mean, avar_std) = mean_std(&avars);
                    let trace = checkpoints
                        .iter()
                        .enumerate()
                        .filter_map(|(j, &k)| {
                            let vals: Vec<f64> = summaries
                                .iter()
                                .map(|s| s.checkpoint_averages[o][j])
                                .collect();
                            ensemble_stats(&vals, references[o], k as f64 * base.h)
                                .ok()
                                .map(|s| MsePoint {
                                    k,
                                    bias_sq: s.bias * s.bias,
                                    variance: s.variance,
                                    mse: s.mse,
                                })
                        })
                        .collect();
                    ObservableResult {
                        name: obs.name().to_string(),
                        reference: references[o],
                        stats,
                        avar_mean,
                        avar_std,
                        trace,
                    }
                })
                .collect();
            kinds.push(KindResult {
                kind: kind.name().to_string(),
                chains_finished: summaries.len(),
                chains_aborted: aborted.len(),
                redraws: summaries.iter().map(|s| s.redraws).sum(),
                abort_reasons: aborted,
                observables: obs_results,
                ksd,
            });
        }
        dataset = Some((loaded.dataset, loaded.record));
    }

    let appendix = config.appendix.as_ref().map(run_appendix).transpose()?;
    Ok(ResultBundle {
        config,
        paper_scale: opts.paper_scale,
        scale,
        dataset,
        kinds,
        appendix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}
