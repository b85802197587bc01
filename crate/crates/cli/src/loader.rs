//! Builds target models and their datasets from the configuration.

use std::path::Path;

use langevin_core::data::{
    gen_gaussian_dataset, gen_ica_sources, gen_logistic_dataset, parse_delimited, random_precision,
    Dataset, DelimitedSchema,
};
use langevin_core::geometry::{skew_fixed_pattern, skew_random_unit, ConstantMetric, SkewMatrix};
use langevin_core::sampler::InitialState;
use langevin_core::target::{
    gaussian_posterior_moments, ica_kronecker_skew, GaussianLinearTarget, IcaTarget,
    LogisticRegressionTarget, NormalParamsTarget, TargetModel,
};
use langevin_core::{Matrix, Vector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{DynamicsConfig, GaussianMetric, InitialSpec, SkewChoice, TargetConfig};
use crate::error::CliError;

/// Where a dataset came from, with content checksums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetRecord {
    pub provenance: String,
    pub rows: usize,
    pub dim: usize,
    /// SHA-256 of the canonical CSV echo.
    pub csv_sha256: String,
    /// SHA-256 of the raw input file, for loaded data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file_sha256: Option<String>,
}

pub struct LoadedTarget {
    pub model: Box<dyn TargetModel>,
    pub dataset: Dataset,
    pub record: DatasetRecord,
    /// Posterior mean and covariance when known in closed form.
    pub conjugate: Option<(Vector, Matrix)>,
    /// Matrix side for ICA, used by the random sign start.
    pub ica_sources: Option<usize>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn record(dataset: &Dataset, file_sha256: Option<String>) -> DatasetRecord {
    DatasetRecord {
        provenance: dataset.provenance.clone(),
        rows: dataset.len(),
        dim: dataset.dim(),
        csv_sha256: sha256_hex(dataset.to_csv().as_bytes()),
        file_sha256,
    }
}

/// Resolves relative data paths against the config file's directory.
pub fn load_target(cfg: &TargetConfig, base_dir: &Path) -> Result<LoadedTarget, CliError> {
    match cfg {
        TargetConfig::Gaussian(g) => {
            let d = g.prior_eigenvalues.len();
            let prior = random_precision(g.prior_seed, &g.prior_eigenvalues)?;
            let data_precision = Matrix::identity(d, d) * g.data_precision;
            let dataset = gen_gaussian_dataset(
                g.data_seed,
                g.n,
                &Vector::from_element(d, g.true_mean),
                &data_precision,
            )?;
            let mut model = GaussianLinearTarget::new(prior, data_precision, dataset.rows.clone())?;
            if g.metric == GaussianMetric::Identity {
                model = model.with_metric(Some(ConstantMetric::identity(d)));
            }
            let (mean, precision) = gaussian_posterior_moments(&model)?;
            let cov = langevin_core::linalg::spd_inverse(&precision)?;
            Ok(LoadedTarget {
                model: Box::new(model),
                record: record(&dataset, None),
                dataset,
                conjugate: Some((mean, cov)),
                ica_sources: None,
            })
        }
        TargetConfig::NormalParams(p) => {
            if !(p.true_sigma > 0.0) {
                return Err(CliError::config("target.true_sigma", "must be positive"));
            }
            let precision = Matrix::from_element(1, 1, 1.0 / (p.true_sigma * p.true_sigma));
            let dataset = gen_gaussian_dataset(
                p.data_seed,
                p.n,
                &Vector::from_element(1, p.true_mean),
                &precision,
            )?;
            let model = NormalParamsTarget::new(dataset.rows.iter().map(|x| x[0]).collect())?;
            Ok(LoadedTarget {
                model: Box::new(model),
                record: record(&dataset, None),
                dataset,
                conjugate: None,
                ica_sources: None,
            })
        }
        TargetConfig::Logistic(l) => {
            let (dataset, file_sha) = match &l.file {
                Some(file) => {
                    let path = base_dir.join(file);
                    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
                    let text = String::from_utf8_lossy(&bytes);
                    let label_column = l.label_column.ok_or_else(|| {
                        CliError::config("target.label_column", "required with `file`")
                    })?;
                    let schema = DelimitedSchema {
                        label_column,
                        feature_columns: l.feature_columns.clone(),
                        intercept: l.intercept,
                        standardize: l.standardize,
                        has_header: l.has_header,
                        max_rows: Some(l.n),
                    };
                    let ds = parse_delimited(&text, &schema, &path.display().to_string())?;
                    (ds, Some(sha256_hex(&bytes)))
                }
                None => (
                    gen_logistic_dataset(l.data_seed, l.n, l.dim, l.intercept)?.0,
                    None,
                ),
            };
            let labels = dataset
                .labels
                .clone()
                .ok_or_else(|| CliError::config("target", "logistic data needs labels"))?;
            let model = LogisticRegressionTarget::new(dataset.rows.clone(), labels, l.alpha)?;
            Ok(LoadedTarget {
                model: Box::new(model),
                record: record(&dataset, file_sha),
                dataset,
                conjugate: None,
                ica_sources: None,
            })
        }
        TargetConfig::Ica(c) => {
            let sources = gen_ica_sources(c.data_seed, c.sources, c.n)?;
            let signals = sources.mixed_columns();
            let dataset = Dataset::new(
                signals.clone(),
                None,
                format!("ica(seed={}, m={}, n={})", c.data_seed, c.sources, c.n),
            )?;
            let model = IcaTarget::new(c.sources, signals, c.lambda)?;
            Ok(LoadedTarget {
                model: Box::new(model),
                record: record(&dataset, None),
                dataset,
                conjugate: None,
                ica_sources: Some(c.sources),
            })
        }
    }
}

/// The skew matrix named by the dynamics section, or `None` when no
/// irreversible kind needs one.
pub fn build_skew(
    d: &DynamicsConfig,
    target: &TargetConfig,
    dim: usize,
) -> Result<Option<SkewMatrix>, CliError> {
    let Some(delta) = d.delta else {
        return Ok(None);
    };
    let choice = d.skew.unwrap_or(match target {
        TargetConfig::Ica(_) => SkewChoice::Kronecker,
        _ => SkewChoice::Pattern,
    });
    let j = match (choice, target) {
        (SkewChoice::Pattern, _) => skew_fixed_pattern(delta, dim)?,
        (SkewChoice::Random, _) => skew_random_unit(d.skew_seed, dim)?.scaled(delta),
        (SkewChoice::Kronecker, TargetConfig::Ica(c)) => ica_kronecker_skew(c.sources, delta)?,
        (SkewChoice::Kronecker, _) => {
            return Err(CliError::config(
                "dynamics.skew",
                "the Kronecker skew is defined for the ICA target only",
            ))
        }
    };
    Ok(Some(j))
}

/// The configured start, or the target's default.
pub fn initial_state(
    spec: Option<&InitialSpec>,
    loaded: &LoadedTarget,
    target: &TargetConfig,
) -> Result<InitialState, CliError> {
    let dim = loaded.model.dim();
    match spec {
        Some(InitialSpec::Vector(v)) => {
            if v.len() != dim {
                return Err(CliError::config(
                    "sampler.initial",
                    format!("has {} entries, the target dimension is {dim}", v.len()),
                ));
            }
            Ok(InitialState::Fixed(Vector::from_column_slice(v)))
        }
        Some(InitialSpec::Named(name)) => match name.as_str() {
            "zero" => Ok(InitialState::Fixed(Vector::zeros(dim))),
            "random_sign_diagonal" => match loaded.ica_sources {
                Some(m) => Ok(InitialState::RandomSignDiagonal { m }),
                None => Err(CliError::config(
                    "sampler.initial",
                    "random_sign_diagonal needs the ICA target",
                )),
            },
            other => Err(CliError::config(
                "sampler.initial",
                format!("unknown start '{other}'"),
            )),
        },
        None => Ok(match target {
            TargetConfig::NormalParams(_) => {
                InitialState::Fixed(Vector::from_column_slice(&[5.0, 20.0]))
            }
            TargetConfig::Ica(c) => InitialState::RandomSignDiagonal { m: c.sources },
            _ => InitialState::Fixed(Vector::zeros(dim)),
        }),
    }
}
