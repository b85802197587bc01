//! Euler–Maruyama simulation of the five Langevin dynamics.
//!
//! Every kind evaluates its drift as `b(θ) = (βB + S)∇log π + β∇·B + t` with
//! `B = I` for the Euclidean kinds, `S ∈ {0, J, C}` and `t ∈ {0, ∇·C}`. Sharing
//! one arithmetic path makes the reduction identities (GiIrr with `B = I` is
//! Irr, GiIrr with `δ = 0` is RM, Irr with `δ = 0` is LD) hold bitwise.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::diagnostics::batch_means_avar;
use crate::geometry::{giirr_matrix, MetricBundle, SkewMatrix};
use crate::linalg::discrete_lyapunov;
use crate::rng::{seeded, ChainRng};
use crate::target::TargetModel;
use crate::{Error, Matrix, Result, Vector};

/// Noise redraws allowed when a proposal leaves the admissible region.
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DynamicsKind {
    Ld,
    Rm,
    Irr,
    RmIrr,
    GiIrr,
}

impl DynamicsKind {
    pub const ALL: [DynamicsKind; 5] = [Self::Ld, Self::Rm, Self::Irr, Self::RmIrr, Self::GiIrr];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ld => "LD",
            Self::Rm => "RM",
            Self::Irr => "Irr",
            Self::RmIrr => "RMIrr",
            Self::GiIrr => "GiIrr",
        }
    }

    pub fn needs_geometry(self) -> bool {
        matches!(self, Self::Rm | Self::RmIrr | Self::GiIrr)
    }

    pub fn needs_skew(self) -> bool {
        matches!(self, Self::Irr | Self::RmIrr | Self::GiIrr)
    }
}

impl fmt::Display for DynamicsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DynamicsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown dynamics kind '{s}'")))
    }
}

/// A dynamics kind with its skew matrix (already scaled by `δ`) and `β`.
#[derive(Debug, Clone)]
pub struct Dynamics {
    kind: DynamicsKind,
    skew: Option<SkewMatrix>,
    beta: f64,
}

impl Dynamics {
    pub fn new(kind: DynamicsKind, skew: Option<SkewMatrix>, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        if kind.needs_skew() && skew.is_none() {
            return Err(Error::Config(format!("{kind} needs a skew matrix")));
        }
        let skew = if kind.needs_skew() { skew } else { None };
        Ok(Self { kind, skew, beta })
    }

    pub fn kind(&self) -> DynamicsKind {
        self.kind
    }

    pub fn skew(&self) -> Option<&SkewMatrix> {
        self.skew.as_ref()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Checks that `target` supplies what this kind needs.
    pub fn check_target<'a>(
        &self,
        target: &'a dyn TargetModel,
    ) -> Result<Option<&'a dyn MetricBundle>> {
        let d = target.dim();
        if let Some(j) = &self.skew {
            if j.dim() != d {
                return Err(Error::Dimension(format!(
                    "skew matrix is {0}x{0}, target dimension is {d}",
                    j.dim()
                )));
            }
        }
        if !self.kind.needs_geometry() {
            return Ok(None);
        }
        match target.geometry() {
            Some(g) if g.dim() == d => Ok(Some(g)),
            Some(g) => Err(Error::Dimension(format!(
                "metric dimension {} differs from target dimension {d}",
                g.dim()
            ))),
            None => Err(Error::Config(format!(
                "{} needs a target with a metric",
                self.kind
            ))),
        }
    }
}

/// `(βB + S, β∇·B + t, σ)` at one state.
#[derive(Debug, Clone)]
struct Coefficients {
    matrix: Matrix,
    correction: Vector,
    diffusion: Matrix,
}

fn coefficients(
    dynamics: &Dynamics,
    geometry: Option<&dyn MetricBundle>,
    theta: &Vector,
) -> Result<Coefficients> {
    let d = theta.len();
    let beta = dynamics.beta;
    let zero_m = || Matrix::zeros(d, d);
    let (metric, div_metric, skew_part, skew_corr, diffusion) = match (dynamics.kind, geometry) {
        (DynamicsKind::Ld | DynamicsKind::Irr, _) => {
            let s = match &dynamics.skew {
                Some(j) => j.matrix().clone(),
                None => zero_m(),
            };
            (
                Matrix::identity(d, d),
                Vector::zeros(d),
                s,
                Vector::zeros(d),
                Matrix::identity(d, d) * (2.0 * beta).sqrt(),
            )
        }
        (kind, Some(g)) => {
            let skew = dynamics.skew.as_ref();
            let point = g.evaluate(
                theta,
                if kind == DynamicsKind::GiIrr {
                    skew
                } else {
                    None
                },
            )?;
            let (s, t) = match kind {
                DynamicsKind::Rm => (zero_m(), Vector::zeros(d)),
                DynamicsKind::RmIrr => (
                    skew.map(|j| j.matrix().clone()).unwrap_or_else(zero_m),
                    Vector::zeros(d),
                ),
                _ => {
                    let j =
                        skew.ok_or_else(|| Error::Config("GiIrr needs a skew matrix".into()))?;
                    let c = giirr_matrix(&point.metric, j)?;
                    let div_c = point.div_giirr.ok_or_else(|| {
                        Error::Config("metric did not return the GiIrr divergence".into())
                    })?;
                    (c, div_c)
                }
            };
            let sigma = g.sqrt_factor(theta, beta)?;
            (point.metric, point.div_metric, s, t, sigma)
        }
        (kind, None) => {
            return Err(Error::Config(format!(
                "{kind} needs a target with a metric"
            )))
        }
    };
    Ok(Coefficients {
        matrix: metric * beta + skew_part,
        correction: div_metric * beta + skew_corr,
        diffusion,
    })
}

/// The drift `b(θ)` of the chosen dynamics.
pub fn drift(
    target: &dyn TargetModel,
    dynamics: &Dynamics,
    theta: &Vector,
    batch: Option<&[usize]>,
) -> Result<Vector> {
    let geometry = dynamics.check_target(target)?;
    let c = coefficients(dynamics, geometry, theta)?;
    let g = target.grad_log(theta, batch)?;
    Ok(&c.matrix * g + c.correction)
}

/// The noise factor `σ(θ)` with `σσᵀ = 2βB(θ)`.
pub fn diffusion_factor(
    target: &dyn TargetModel,
    dynamics: &Dynamics,
    theta: &Vector,
) -> Result<Matrix> {
    let geometry = dynamics.check_target(target)?;
    Ok(coefficients(dynamics, geometry, theta)?.diffusion)
}

/// Step-by-step integrator bound to one target and one dynamics.
pub struct Stepper<'a> {
    target: &'a dyn TargetModel,
    dynamics: &'a Dynamics,
    geometry: Option<&'a dyn MetricBundle>,
    cached: Option<Coefficients>,
}

impl<'a> Stepper<'a> {
    pub fn new(target: &'a dyn TargetModel, dynamics: &'a Dynamics) -> Result<Self> {
        let geometry = dynamics.check_target(target)?;
        let constant = match geometry {
            None => true,
            Some(g) => g.is_constant(),
        };
        let cached = if constant {
            Some(coefficients(
                dynamics,
                geometry,
                &Vector::zeros(target.dim()),
            )?)
        } else {
            None
        };
        Ok(Self {
            target,
            dynamics,
            geometry,
            cached,
        })
    }

    fn with_parts<R>(
        &self,
        theta: &Vector,
        batch: Option<&[usize]>,
        f: impl FnOnce(Vector, &Matrix) -> Result<R>,
    ) -> Result<R> {
        let owned;
        let c = match &self.cached {
            Some(c) => c,
            None => {
                owned = coefficients(self.dynamics, self.geometry, theta)?;
                &owned
            }
        };
        let g = self.target.grad_log(theta, batch)?;
        f(&c.matrix * g + &c.correction, &c.diffusion)
    }

    /// Drift and noise factor at `theta`.
    pub fn parts(&self, theta: &Vector, batch: Option<&[usize]>) -> Result<(Vector, Matrix)> {
        self.with_parts(theta, batch, |b, sigma| Ok((b, sigma.clone())))
    }

    /// One Euler–Maruyama update with the given standard normal draw.
    pub fn step_with_noise(
        &self,
        theta: &Vector,
        h: f64,
        batch: Option<&[usize]>,
        xi: &Vector,
    ) -> Result<Vector> {
        self.with_parts(theta, batch, |b, sigma| {
            Ok(theta + b * h + (sigma * xi) * h.sqrt())
        })
    }

    /// One update drawing `ξ` from `rng`. Inadmissible proposals get fresh
    /// noise up to [`MAX_REDRAWS`] times; the drift is reused.
    ///
    /// Returns the new state and the number of redraws.
    pub fn step(
        &self,
        theta: &Vector,
        h: f64,
        batch: Option<&[usize]>,
        rng: &mut ChainRng,
    ) -> Result<(Vector, usize)> {
        self.with_parts(theta, batch, |b, sigma| {
            let mean = theta + b * h;
            let sqrt_h = h.sqrt();
            for redraw in 0..=MAX_REDRAWS {
                let xi = standard_normal(rng, theta.len());
                let next = &mean + (sigma * xi) * sqrt_h;
                if self.target.admissible(&next)? {
                    return Ok((next, redraw));
                }
            }
            Err(Error::Domain(format!(
                "no admissible proposal after {MAX_REDRAWS} noise redraws"
            )))
        })
    }
}

pub fn standard_normal(rng: &mut ChainRng, d: usize) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Single Euler–Maruyama step `θ + h b(θ) + √h σ(θ) ξ` with explicit noise;
/// pass zeros to follow the deterministic recurrence.
pub fn em_step(
    target: &dyn TargetModel,
    dynamics: &Dynamics,
    theta: &Vector,
    h: f64,
    batch: Option<&[usize]>,
    xi: &Vector,
) -> Result<Vector> {
    Stepper::new(target, dynamics)?.step_with_noise(theta, h, batch, xi)
}

/// Exact stationary covariance of the Euler–Maruyama chain for a target
/// with affine full-data drift and constant noise (the Gaussian model).
///
/// The chain is `θ' = Aθ + c + √h σξ`; `A` is read off the drift at `at`
/// and `at + e_i`, then `Σ = AΣAᵀ + hσσᵀ` is solved.
pub fn linear_chain_covariance(
    target: &dyn TargetModel,
    dynamics: &Dynamics,
    h: f64,
    at: &Vector,
) -> Result<Matrix> {
    let stepper = Stepper::new(target, dynamics)?;
    if stepper.cached.is_none() {
        return Err(Error::Config(
            "the chain is linear only for a constant metric".into(),
        ));
    }
    let d = target.dim();
    let (b0, sigma) = stepper.parts(at, None)?;
    let mut a = Matrix::identity(d, d);
    for i in 0..d {
        let mut e = at.clone();
        e[i] += 1.0;
        let (bi, _) = stepper.parts(&e, None)?;
        a.set_column(i, &(Vector::from(a.column(i)) + (bi - &b0) * h));
    }
    discrete_lyapunov(&a, &(&sigma * sigma.transpose() * h))
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fixed(Vector),
    /// `vec(W)` with `W` diagonal and random `±1` entries, drawn from the
    /// chain's own stream before the first step.
    RandomSignDiagonal {
        m: usize,
    },
}

impl InitialState {
    pub fn dim(&self) -> usize {
        match self {
            Self::Fixed(v) => v.len(),
            Self::RandomSignDiagonal { m } => m * m,
        }
    }

    fn draw(&self, rng: &mut ChainRng) -> Vector {
        match self {
            Self::Fixed(v) => v.clone(),
            Self::RandomSignDiagonal { m } => {
                let mut v = Vector::zeros(m * m);
                for i in 0..*m {
                    v[i + m * i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
                v
            }
        }
    }
}

/// Scalar function of the state used in estimators.
#[derive(Clone, Copy)]
pub enum Observable {
    /// `Σ θ_l`
    Phi1,
    /// `Σ θ_l²`
    Phi2,
    /// `(Σ θ_l)²`
    Phi3,
    Custom(&'static str, fn(&Vector) -> f64),
}

impl Observable {
    pub fn eval(&self, theta: &Vector) -> f64 {
        match self {
            Self::Phi1 => theta.sum(),
            Self::Phi2 => theta.norm_squared(),
            Self::Phi3 => {
                let s = theta.sum();
                s * s
            }
            Self::Custom(_, f) => f(theta),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Phi1 => "phi1",
            Self::Phi2 => "phi2",
            Self::Phi3 => "phi3",
            Self::Custom(name, _) => name,
        }
    }
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phi1" => Ok(Self::Phi1),
            "phi2" => Ok(Self::Phi2),
            "phi3" => Ok(Self::Phi3),
            _ => Err(Error::Config(format!("unknown observable '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub h: f64,
    /// Number of steps `K`.
    pub steps: usize,
    pub burn_in_time: f64,
    /// Minibatch size; `None` uses the full gradient.
    pub minibatch: Option<usize>,
    pub master_seed: u64,
    pub chains: usize,
    pub initial: InitialState,
    /// Keep all `K + 1` states in the trajectory.
    pub record_states: bool,
}

impl SamplerConfig {
    pub fn new(h: f64, steps: usize, initial: InitialState) -> Self {
        Self {
            h,
            steps,
            burn_in_time: 0.0,
            minibatch: None,
            master_seed: 0,
            chains: 1,
            initial,
            record_states: false,
        }
    }

    /// `⌊T_b / h⌋`, robust to `T_b / h` landing a rounding error below an
    /// integer.
    pub fn burn_in_steps(&self) -> usize {
        let q = self.burn_in_time / self.h;
        let r = q.round();
        if (q - r).abs() <= 1e-9 * r.max(1.0) {
            r as usize
        } else {
            q.floor() as usize
        }
    }

    pub fn validate(&self, target: &dyn TargetModel) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Config(format!(
                "step size must be positive, got {}",
                self.h
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("step count must be at least 1".into()));
        }
        if !(self.burn_in_time >= 0.0) {
            return Err(Error::Config(format!(
                "burn-in time must be non-negative, got {}",
                self.burn_in_time
            )));
        }
        if self.burn_in_steps() >= self.steps {
            return Err(Error::Config(format!(
                "burn-in of {} steps leaves nothing of {} steps",
                self.burn_in_steps(),
                self.steps
            )));
        }
        if self.chains == 0 {
            return Err(Error::Config("chain count must be at least 1".into()));
        }
        if let Some(n) = self.minibatch {
            let big_n = target.data_size();
            if n == 0 || n > big_n {
                return Err(Error::Config(format!(
                    "minibatch size must be in 1..={big_n}, got {n}"
                )));
            }
        }
        if self.initial.dim() != target.dim() {
            return Err(Error::Dimension(format!(
                "initial state has length {}, target expects {}",
                self.initial.dim(),
                target.dim()
            )));
        }
        Ok(())
    }
}

/// One simulated chain.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub chain: usize,
    /// `θ₀..θ_K` when states are recorded, otherwise empty.
    pub states: Vec<Vector>,
    pub final_state: Vector,
    /// Per observable, `φ(θ_k)` for the post-burn-in indices `k = n_b..K−1`.
    pub traces: Vec<Vec<f64>>,
    pub redraws: usize,
}

/// Runs one chain on stream `chain` of `cfg.master_seed`.
///
/// Each step consumes the stream in a fixed order: the minibatch (when
/// enabled), then `ξ`.
pub fn simulate_chain(
    target: &dyn TargetModel,
    dynamics: &Dynamics,
    cfg: &SamplerConfig,
    observables: &[Observable],
    chain: usize,
) -> Result<Trajectory> {
    cfg.validate(target)?;
    let stepper = Stepper::new(target, dynamics)?;
    let mut rng = seeded(cfg.master_seed, chain as u64);
    let burn = cfg.burn_in_steps();
    let big_n = target.data_size();

    let mut theta = cfg.initial.draw(&mut rng);
    let mut states = Vec::new();
    let mut traces: Vec<Vec<f64>> = observables
        .iter()
        .map(|_| Vec::with_capacity(cfg.steps - burn))
        .collect();
    let mut redraws = 0;
    let abort = |step: usize, e: Error| Error::ChainAborted {
        chain,
        step,
        reason: e.to_string(),
    };
    target.admissible(&theta).map_err(|e| abort(0, e))?;

    for k in 0..cfg.steps {
        if cfg.record_states {
            states.push(theta.clone());
        }
        if k >= burn {
            for (trace, obs) in traces.iter_mut().zip(observables) {
                trace.push(obs.eval(&theta));
            }
        }
        let batch = cfg
            .minibatch
            .map(|n| rand::seq::index::sample(&mut rng, big_n, n).into_vec());
        let (next, r) = stepper
            .step(&theta, cfg.h, batch.as_deref(), &mut rng)
            .map_err(|e| abort(k, e))?;
        redraws += r;
        theta = next;
    }
    if cfg.record_states {
        states.push(theta.clone());
    }
    Ok(Trajectory {
        chain,
        states,
        final_state: theta,
        traces,
        redraws,
    })
}

/// Compact per-chain result kept for ensemble statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub chain: usize,
    /// Per observable, the post-burn-in average.
    pub averages: Vec<f64>,
    /// Per observable, the batch-means asymptotic variance (`NaN` when the
    /// trace is too short).
    pub avar: Vec<f64>,
    /// Per observable, running averages at each checkpoint.
    pub checkpoint_averages: Vec<Vec<f64>>,
    pub redraws: usize,
}

/// Reduces a trajectory to averages, batch-means variances and running
/// averages after `checkpoints[i]` post-burn-in samples.
pub fn summarize(
    traj: &Trajectory,
    h: f64,
    batches: usize,
    checkpoints: &[usize],
) -> Result<ChainSummary> {
    let mut averages = Vec::with_capacity(traj.traces.len());
    let mut avar = Vec::with_capacity(traj.traces.len());
    let mut checkpoint_averages = Vec::with_capacity(traj.traces.len());
    for trace in &traj.traces {
        if trace.is_empty() {
            return Err(Error::Argument("empty observable trace".into()));
        }
        let mut sums = Vec::with_capacity(checkpoints.len());
        let mut acc = 0.0;
        let mut next = 0;
        for (i, &v) in trace.iter().enumerate() {
            acc += v;
            while next < checkpoints.len() && checkpoints[next] == i + 1 {
                sums.push(acc / (i + 1) as f64);
                next += 1;
            }
        }
        if next < checkpoints.len() {
            return Err(Error::Argument(format!(
                "checkpoint {} exceeds the trace length {}",
                checkpoints[next],
                trace.len()
            )));
        }
        averages.push(acc / trace.len() as f64);
        avar.push(batch_means_avar(trace, h, batches).unwrap_or(f64::NAN));
        checkpoint_averages.push(sums);
    }
    Ok(ChainSummary {
        chain: traj.chain,
        averages,
        avar,
        checkpoint_averages,
        redraws: traj.redraws,
    })
}

/// Outcome of an ensemble: successful summaries in chain order plus aborts.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub summaries: Vec<ChainSummary>,
    pub aborted: Vec<(usize, String)>,
}

/// Runs `cfg.chains` chains serially. Chain `i` uses stream `i`, so the
/// result does not depend on execution order.
pub fn run_ensemble(
    target: &dyn TargetModel,
    dynamics: &Dynamics,
    cfg: &SamplerConfig,
    observables: &[Observable],
    batches: usize,
    checkpoints: &[usize],
) -> Result<EnsembleRun> {
    cfg.validate(target)?;
    let mut run = EnsembleRun {
        summaries: Vec::with_capacity(cfg.chains),
        aborted: Vec::new(),
    };
    for chain in 0..cfg.chains {
        match simulate_chain(target, dynamics, cfg, observables, chain) {
            Ok(t) => run
                .summaries
                .push(summarize(&t, cfg.h, batches, checkpoints)?),
            Err(e @ Error::ChainAborted { .. }) => {
                log::warn!("{e}");
                run.aborted.push((chain, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(run)
}
