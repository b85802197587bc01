//! Run configuration read from TOML.
//!
//! Every section maps onto one struct; unknown keys are rejected so typos
//! surface with their path instead of being silently ignored.

use std::path::Path;

use langevin_core::sampler::{DynamicsKind, Observable};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSection>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appendix: Option<AppendixConfig>,
}

/// The model to sample, named by `example`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "example", rename_all = "snake_case")]
pub enum TargetConfig {
    Gaussian(GaussianConfig),
    NormalParams(NormalParamsConfig),
    Logistic(LogisticConfig),
    Ica(IcaConfig),
}

impl TargetConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian(_) => "gaussian",
            Self::NormalParams(_) => "normal_params",
            Self::Logistic(_) => "logistic",
            Self::Ica(_) => "ica",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    /// Data size `N`.
    #[serde(default = "GaussianConfig::default_n")]
    pub n: usize,
    /// Eigenvalues of the prior precision; the dimension is their count.
    #[serde(default = "GaussianConfig::default_prior_eigenvalues")]
    pub prior_eigenvalues: Vec<f64>,
    /// Seed of the random eigenvectors of the prior precision.
    #[serde(default = "GaussianConfig::default_prior_seed")]
    pub prior_seed: u64,
    /// `Γ_X = data_precision · I`.
    #[serde(default = "GaussianConfig::default_data_precision")]
    pub data_precision: f64,
    /// Every coordinate of the data-generating mean.
    #[serde(default = "GaussianConfig::default_true_mean")]
    pub true_mean: f64,
    #[serde(default = "GaussianConfig::default_data_seed")]
    pub data_seed: u64,
    /// `posterior_covariance` (default) or `identity`.
    #[serde(default)]
    pub metric: GaussianMetric,
}

impl GaussianConfig {
    fn default_n() -> usize {
        10
    }
    fn default_prior_eigenvalues() -> Vec<f64> {
        vec![0.2, 0.01, 0.05]
    }
    fn default_prior_seed() -> u64 {
        11
    }
    fn default_data_precision() -> f64 {
        0.25
    }
    fn default_true_mean() -> f64 {
        1.0
    }
    fn default_data_seed() -> u64 {
        12
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianMetric {
    #[default]
    PosteriorCovariance,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalParamsConfig {
    #[serde(default = "NormalParamsConfig::default_n")]
    pub n: usize,
    #[serde(default)]
    pub true_mean: f64,
    #[serde(default = "NormalParamsConfig::default_true_sigma")]
    pub true_sigma: f64,
    #[serde(default = "NormalParamsConfig::default_data_seed")]
    pub data_seed: u64,
}

impl NormalParamsConfig {
    fn default_n() -> usize {
        30
    }
    fn default_true_sigma() -> f64 {
        10.0
    }
    fn default_data_seed() -> u64 {
        5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticConfig {
    /// Prior precision `α`.
    #[serde(default = "LogisticConfig::default_alpha")]
    pub alpha: f64,
    /// Delimited data file; synthetic data is generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// Zero-based label column of the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_columns: Option<Vec<usize>>,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default = "yes")]
    pub standardize: bool,
    /// Prepend a constant feature.
    #[serde(default = "yes")]
    pub intercept: bool,
    /// Rows kept (file) or generated (synthetic).
    #[serde(default = "LogisticConfig::default_n")]
    pub n: usize,
    /// Synthetic feature dimension including the intercept.
    #[serde(default = "LogisticConfig::default_dim")]
    pub dim: usize,
    #[serde(default = "LogisticConfig::default_data_seed")]
    pub data_seed: u64,
}

fn yes() -> bool {
    true
}

impl LogisticConfig {
    fn default_alpha() -> f64 {
        1.0
    }
    fn default_n() -> usize {
        400
    }
    fn default_dim() -> usize {
        20
    }
    fn default_data_seed() -> u64 {
        3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcaConfig {
    #[serde(default = "IcaConfig::default_sources")]
    pub sources: usize,
    #[serde(default = "IcaConfig::default_n")]
    pub n: usize,
    /// Gaussian prior precision on the unmixing matrix.
    #[serde(default = "IcaConfig::default_lambda")]
    pub lambda: f64,
    #[serde(default = "IcaConfig::default_data_seed")]
    pub data_seed: u64,
}

impl IcaConfig {
    fn default_sources() -> usize {
        3
    }
    fn default_n() -> usize {
        400
    }
    fn default_lambda() -> f64 {
        1.0
    }
    fn default_data_seed() -> u64 {
        21
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Any of `LD`, `RM`, `Irr`, `RMIrr`, `GiIrr`.
    pub kinds: Vec<String>,
    /// Spectral scale of `J`; required exactly when an irreversible kind is listed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skew: Option<SkewChoice>,
    #[serde(default)]
    pub skew_seed: u64,
    #[serde(default = "DynamicsConfig::default_beta")]
    pub beta: f64,
}

impl DynamicsConfig {
    fn default_beta() -> f64 {
        0.5
    }

    pub fn parsed_kinds(&self) -> Result<Vec<DynamicsKind>, CliError> {
        if self.kinds.is_empty() {
            return Err(CliError::config(
                "dynamics.kinds",
                "list at least one dynamics kind",
            ));
        }
        let mut out: Vec<DynamicsKind> = Vec::new();
        for (i, k) in self.kinds.iter().enumerate() {
            let kind: DynamicsKind = k
                .parse()
                .map_err(|e| CliError::config(format!("dynamics.kinds[{i}]"), e))?;
            if out.contains(&kind) {
                return Err(CliError::config(
                    format!("dynamics.kinds[{i}]"),
                    format!("{kind} listed twice"),
                ));
            }
            out.push(kind);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewChoice {
    /// `δ(U − Uᵀ)` with `U` strictly upper triangular ones.
    Pattern,
    /// Random skew matrix of spectral norm `δ`.
    Random,
    /// `J = kron(I, C₀) + kron(C₀, I)` scaled to norm `δ` (ICA only).
    Kronecker,
}

/// Starting point: a vector, `zero`, or `random_sign_diagonal` (ICA).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Vector(Vec<f64>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperScale {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub h: f64,
    /// Total steps `K` per chain, burn-in included.
    pub steps: usize,
    #[serde(default = "SamplerSection::default_chains")]
    pub chains: usize,
    /// Minibatch size `n`; full gradients when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minibatch: Option<usize>,
    /// Burn-in duration `T_b`; the first `⌊T_b/h⌋` steps are discarded.
    #[serde(default)]
    pub burn_in_time: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    /// Values substituted by `--paper-scale`; steps default to ten times `steps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_scale: Option<PaperScale>,
}

impl SamplerSection {
    fn default_chains() -> usize {
        100
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "DiagnosticsConfig::default_observables")]
    pub observables: Vec<String>,
    #[serde(default = "DiagnosticsConfig::default_batches")]
    pub batches: usize,
    /// Number of log-spaced checkpoints in the MSE trace.
    #[serde(default = "DiagnosticsConfig::default_checkpoints")]
    pub checkpoints: usize,
    /// `conjugate` (Gaussian only), `pooled`, or `values`.
    #[serde(default)]
    pub reference: ReferenceChoice,
    /// One value per observable when `reference = "values"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ksd: Option<KsdConfig>,
}

impl DiagnosticsConfig {
    fn default_observables() -> Vec<String> {
        vec!["phi1".into()]
    }
    fn default_batches() -> usize {
        langevin_core::diagnostics::DEFAULT_BATCHES
    }
    fn default_checkpoints() -> usize {
        50
    }

    pub fn parsed_observables(&self) -> Result<Vec<Observable>, CliError> {
        if self.observables.is_empty() {
            return Err(CliError::config(
                "diagnostics.observables",
                "list at least one observable",
            ));
        }
        self.observables
            .iter()
            .enumerate()
            .map(|(i, o)| {
                o.parse()
                    .map_err(|e| CliError::config(format!("diagnostics.observables[{i}]"), e))
            })
            .collect()
    }
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            observables: Self::default_observables(),
            batches: Self::default_batches(),
            checkpoints: Self::default_checkpoints(),
            reference: ReferenceChoice::default(),
            reference_values: None,
            ksd: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    /// Exact posterior expectations of the Gaussian model.
    Conjugate,
    /// Mean over every kind and chain of the run.
    #[default]
    Pooled,
    Values,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KsdConfig {
    #[serde(default = "KsdConfig::default_min")]
    pub min: usize,
    #[serde(default = "KsdConfig::default_max")]
    pub max: usize,
    /// Chains per kind whose first `max` post-burn-in states are scored.
    #[serde(default = "KsdConfig::default_chains")]
    pub chains: usize,
}

impl KsdConfig {
    fn default_min() -> usize {
        100
    }
    fn default_max() -> usize {
        10_000
    }
    fn default_chains() -> usize {
        25
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "OutputConfig::default_dir")]
    pub dir: String,
}

impl OutputConfig {
    fn default_dir() -> String {
        "results".into()
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: Self::default_dir(),
        }
    }
}

/// Closed-form sweep of the scalar-precision Gaussian model, optionally
/// cross-checked by simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendixConfig {
    #[serde(default = "AppendixConfig::default_a")]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub s_x: [f64; 2],
    pub hs: Vec<f64>,
    pub ks: Vec<usize>,
    pub deltas: Vec<f64>,
    /// Monte Carlo replicates per grid point; zero skips the cross-check.
    #[serde(default)]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

impl AppendixConfig {
    fn default_a() -> f64 {
        1.0
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Cross-field checks that serde cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.target, &self.dynamics, &self.sampler) {
            (None, None, None) => {
                if self.appendix.is_none() {
                    return Err(CliError::config(
                        "target",
                        "nothing to run: give a target or an appendix section",
                    ));
                }
            }
            (Some(t), Some(d), Some(s)) => self.validate_sampling(t, d, s)?,
            _ => {
                return Err(CliError::config(
                    "target",
                    "target, dynamics and sampler sections must appear together",
                ))
            }
        }
        if let Some(a) = &self.appendix {
            if !(a.a > 0.0) {
                return Err(CliError::config("appendix.a", "must be positive"));
            }
            if a.hs.is_empty() || a.ks.is_empty() || a.deltas.is_empty() {
                return Err(CliError::config(
                    "appendix",
                    "hs, ks and deltas must be non-empty",
                ));
            }
            if let Some(i) = a.ks.iter().position(|&k| k == 0) {
                return Err(CliError::config(
                    format!("appendix.ks[{i}]"),
                    "K must be at least 1",
                ));
            }
        }
        Ok(())
    }

    fn validate_sampling(
        &self,
        t: &TargetConfig,
        d: &DynamicsConfig,
        s: &SamplerSection,
    ) -> Result<(), CliError> {
        let kinds = d.parsed_kinds()?;
        let needs_skew = kinds.iter().any(|k| k.needs_skew());
        match (needs_skew, d.delta) {
            (true, None) => {
                return Err(CliError::config(
                    "dynamics.delta",
                    "required when an irreversible kind is listed",
                ))
            }
            (false, Some(_)) => {
                return Err(CliError::config(
                    "dynamics.delta",
                    "given but no irreversible kind is listed",
                ))
            }
            (_, Some(delta)) if !(delta >= 0.0) => {
                return Err(CliError::config("dynamics.delta", "must be non-negative"))
            }
            _ => {}
        }
        if d.skew == Some(SkewChoice::Kronecker) && !matches!(t, TargetConfig::Ica(_)) {
            return Err(CliError::config(
                "dynamics.skew",
                "the Kronecker skew is defined for the ICA target only",
            ));
        }
        if !(d.beta > 0.0) {
            return Err(CliError::config("dynamics.beta", "must be positive"));
        }
        if !(s.h > 0.0) {
            return Err(CliError::config("sampler.h", "must be positive"));
        }
        if s.chains < 2 {
            return Err(CliError::config(
                "sampler.chains",
                "ensemble statistics need at least 2 chains",
            ));
        }
        let data_size = match t {
            TargetConfig::Gaussian(g) => g.n,
            TargetConfig::NormalParams(p) => p.n,
            TargetConfig::Logistic(l) => l.n,
            TargetConfig::Ica(i) => i.n,
        };
        if let Some(n) = s.minibatch {
            if n == 0 || n > data_size {
                return Err(CliError::config(
                    "sampler.minibatch",
                    format!("must lie in 1..={data_size} (the data size)"),
                ));
            }
        }
        if let TargetConfig::Gaussian(g) = t {
            if g.prior_eigenvalues.len() < 2 {
                return Err(CliError::config(
                    "target.prior_eigenvalues",
                    "need at least 2 dimensions",
                ));
            }
        }
        let obs = self.diagnostics.parsed_observables()?;
        match self.diagnostics.reference {
            ReferenceChoice::Conjugate if !matches!(t, TargetConfig::Gaussian(_)) => {
                return Err(CliError::config(
                    "diagnostics.reference",
                    "conjugate references exist for the Gaussian target only",
                ))
            }
            ReferenceChoice::Values => match &self.diagnostics.reference_values {
                Some(v) if v.len() == obs.len() => {}
                _ => {
                    return Err(CliError::config(
                        "diagnostics.reference_values",
                        "give one value per observable",
                    ))
                }
            },
            _ => {}
        }
        if self.diagnostics.checkpoints == 0 {
            return Err(CliError::config(
                "diagnostics.checkpoints",
                "must be at least 1",
            ));
        }
        if let Some(k) = &self.diagnostics.ksd {
            if k.min < 1 || k.min >= k.max || k.chains == 0 {
                return Err(CliError::config(
                    "diagnostics.ksd",
                    "need 1 <= min < max and chains >= 1",
                ));
            }
        }
        Ok(())
    }
}
