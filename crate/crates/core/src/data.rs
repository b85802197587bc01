//! Synthetic datasets for the four examples and a parser for delimited
//! logistic-regression data.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::cholesky_lower;
use crate::rng::{seeded, ChainRng};
use crate::target::logistic_sigmoid;
use crate::{Error, Matrix, Result, Vector};

/// Largest condition number accepted for a random ICA mixing matrix.
pub const MAX_MIXING_CONDITION: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vector>,
    pub labels: Option<Vec<f64>>,
    /// Generator descriptor or source path.
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        rows: Vec<Vector>,
        labels: Option<Vec<f64>>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Argument("dataset has no rows".into()));
        }
        let d = rows[0].len();
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Dimension(format!(
                "row {i} has {} features, expected {d}",
                rows[i].len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::Dimension(format!(
                    "{} labels for {} rows",
                    l.len(),
                    rows.len()
                )));
            }
        }
        Ok(Self {
            rows,
            labels,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    /// Canonical CSV text: features then the label, full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let d = self.dim();
        let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            let mut fields: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            if let Some(l) = &self.labels {
                fields.push(format!("{:?}", l[i]));
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

fn normal_vector(rng: &mut ChainRng, d: usize) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// `N` iid draws from `N(mean, precision⁻¹)`.
pub fn gen_gaussian_dataset(
    seed: u64,
    n: usize,
    mean: &Vector,
    precision: &Matrix,
) -> Result<Dataset> {
    let d = mean.len();
    if precision.nrows() != d || precision.ncols() != d {
        return Err(Error::Dimension(format!(
            "precision is {}x{}, mean has length {d}",
            precision.nrows(),
            precision.ncols()
        )));
    }
    // Γ = LLᵀ, so x = μ + L⁻ᵀz has covariance Γ⁻¹.
    let l = cholesky_lower(precision)?;
    let lt = l.transpose();
    let mut rng = seeded(seed, 0);
    let rows = (0..n)
        .map(|_| {
            let z = normal_vector(&mut rng, d);
            let x = lt
                .solve_upper_triangular(&z)
                .ok_or_else(|| Error::Singular("precision factor".into()))?;
            Ok(mean + x)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(rows, None, format!("gaussian(seed={seed}, n={n}, d={d})"))
}

/// Haar-distributed orthogonal matrix from the QR factorisation of a
/// Gaussian matrix, with the signs of `R`'s diagonal absorbed into `Q`.
pub fn random_rotation(seed: u64, d: usize) -> Matrix {
    let mut rng = seeded(seed, 1);
    let g = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Q diag(eigenvalues) Qᵀ` with a random rotation `Q`.
pub fn random_precision(seed: u64, eigenvalues: &[f64]) -> Result<Matrix> {
    if eigenvalues.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Argument(
            "precision eigenvalues must be positive".into(),
        ));
    }
    let q = random_rotation(seed, eigenvalues.len());
    let l = Matrix::from_diagonal(&Vector::from_column_slice(eigenvalues));
    let p = &q * l * q.transpose();
    Ok((&p + p.transpose()) * 0.5)
}

/// Standard Laplace draw by inverse CDF.
pub fn sample_laplace(rng: &mut ChainRng) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    let mag = -(1.0 - 2.0 * u.abs()).ln();
    if u < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Draw from the density `¼sech²(y/2)` (standard logistic) by inverse CDF.
pub fn sample_sech2(rng: &mut ChainRng) -> f64 {
    let u: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    (u / (1.0 - u)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaSources {
    /// `m × N`, row 0 Laplace, the rest `¼sech²(y/2)`.
    pub sources: Matrix,
    pub mixing: Matrix,
    /// `mixing · sources`.
    pub mixed: Matrix,
}

impl IcaSources {
    pub fn mixed_columns(&self) -> Vec<Vector> {
        self.mixed.column_iter().map(|c| c.into_owned()).collect()
    }
}

pub fn condition_number(m: &Matrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    max / min
}

/// Independent sources mixed by a random matrix with condition number below
/// [`MAX_MIXING_CONDITION`].
pub fn gen_ica_sources(seed: u64, m: usize, n: usize) -> Result<IcaSources> {
    if m < 2 {
        return Err(Error::Dimension(format!("ICA needs m >= 2, got {m}")));
    }
    let mut rng = seeded(seed, 2);
    let mut sources = Matrix::zeros(m, n);
    for t in 0..n {
        sources[(0, t)] = sample_laplace(&mut rng);
        for i in 1..m {
            sources[(i, t)] = sample_sech2(&mut rng);
        }
    }
    let mut mix_rng = seeded(seed, 3);
    let mixing = loop {
        let a = Matrix::from_fn(m, m, |_, _| mix_rng.sample::<f64, _>(StandardNormal));
        if condition_number(&a) < MAX_MIXING_CONDITION {
            break a;
        }
    };
    let mixed = &mixing * &sources;
    Ok(IcaSources {
        sources,
        mixing,
        mixed,
    })
}

/// Synthetic logistic-regression data: standard normal features, a standard
/// normal true weight vector, Bernoulli labels. With `intercept` the first
/// feature is the constant 1.
pub fn gen_logistic_dataset(
    seed: u64,
    n: usize,
    d: usize,
    intercept: bool,
) -> Result<(Dataset, Vector)> {
    if d == 0 || (intercept && d < 2) {
        return Err(Error::Dimension(format!("invalid feature count {d}")));
    }
    let mut rng = seeded(seed, 4);
    let w = normal_vector(&mut rng, d);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = normal_vector(&mut rng, d);
        if intercept {
            x[0] = 1.0;
        }
        let p = logistic_sigmoid(x.dot(&w));
        labels.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
        rows.push(x);
    }
    let ds = Dataset::new(
        rows,
        Some(labels),
        format!("logistic(seed={seed}, n={n}, d={d})"),
    )?;
    Ok((ds, w))
}

/// Centres each column and scales it to unit population variance. Columns
/// listed in `skip` (for example an intercept) are left alone, as are
/// constant columns.
pub fn standardize_columns(rows: &mut [Vector], skip: &[usize]) {
    if rows.is_empty() {
        return;
    }
    let n = rows.len() as f64;
    for j in 0..rows[0].len() {
        if skip.contains(&j) {
            continue;
        }
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows
            .iter()
            .map(|r| (r[j] - mean) * (r[j] - mean))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        for r in rows.iter_mut() {
            r[j] -= mean;
            if sd > 0.0 {
                r[j] /= sd;
            }
        }
        if !(sd > 0.0) {
            log::warn!("column {j} is constant; centred but not scaled");
        }
    }
}

/// Layout of a delimited file.
#[derive(Debug, Clone, PartialEq)]
pub struct DelimitedSchema {
    /// Zero-based label column.
    pub label_column: usize,
    /// Zero-based feature columns; `None` means every other column.
    pub feature_columns: Option<Vec<usize>>,
    /// Prepend a constant-1 feature (not standardised).
    pub intercept: bool,
    pub standardize: bool,
    pub has_header: bool,
    /// Keep only the first `max_rows` records.
    pub max_rows: Option<usize>,
}

impl Default for DelimitedSchema {
    fn default() -> Self {
        Self {
            label_column: 0,
            feature_columns: None,
            intercept: false,
            standardize: true,
            has_header: false,
            max_rows: None,
        }
    }
}

/// Parses comma- or whitespace-separated text. Labels must take exactly two
/// distinct values; the smaller maps to 0 and the larger to 1.
pub fn parse_delimited(text: &str, schema: &DelimitedSchema, provenance: &str) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut width = None;
    let lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    for (idx, (lineno, line)) in lines.enumerate() {
        if schema.has_header && idx == 0 {
            continue;
        }
        if schema.max_rows.is_some_and(|m| rows.len() >= m) {
            break;
        }
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let w = *width.get_or_insert(fields.len());
        if fields.len() != w {
            return Err(Error::Parse {
                line: lineno + 1,
                column: fields.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", fields.len()),
            });
        }
        let values = fields
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    column: c + 1,
                    message: format!("'{f}': {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if schema.label_column >= w {
            return Err(Error::Dimension(format!(
                "label column {} but the file has {w} columns",
                schema.label_column
            )));
        }
        let cols: Vec<usize> = match &schema.feature_columns {
            Some(c) => c.clone(),
            None => (0..w).filter(|&c| c != schema.label_column).collect(),
        };
        if let Some(&bad) = cols.iter().find(|&&c| c >= w) {
            return Err(Error::Dimension(format!(
                "feature column {bad} but the file has {w} columns"
            )));
        }
        let mut feats: Vec<f64> = Vec::with_capacity(cols.len() + 1);
        if schema.intercept {
            feats.push(1.0);
        }
        feats.extend(cols.iter().map(|&c| values[c]));
        rows.push(Vector::from_vec(feats));
        raw_labels.push(values[schema.label_column]);
    }
    if rows.is_empty() {
        return Err(Error::Argument(format!("{provenance}: no data rows")));
    }
    let mut distinct: Vec<f64> = Vec::new();
    for &l in &raw_labels {
        if !distinct.contains(&l) {
            distinct.push(l);
        }
    }
    if distinct.len() > 2 {
        return Err(Error::Argument(format!(
            "{provenance}: labels take {} distinct values, expected 2",
            distinct.len()
        )));
    }
    let hi = distinct.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let labels = if distinct.len() == 2 {
        raw_labels
            .iter()
            .map(|&l| if l == hi { 1.0 } else { 0.0 })
            .collect()
    } else if distinct[0] == 0.0 || distinct[0] == 1.0 {
        raw_labels
    } else {
        return Err(Error::Argument(format!(
            "{provenance}: a single label value {} cannot be mapped to {{0, 1}}",
            distinct[0]
        )));
    };
    if schema.standardize {
        let skip: Vec<usize> = if schema.intercept {
            alloc::vec![0]
        } else {
            Vec::new()
        };
        standardize_columns(&mut rows, &skip);
    }
    Dataset::new(rows, Some(labels), provenance.to_string())
}
