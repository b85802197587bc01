//! Skew-symmetric perturbation matrices, metric fields and the
//! geometry-informed skew field `C(θ) = ½JB(θ) + ½B(θ)J`.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::linalg::{cholesky_lower, spectral_norm};
use crate::rng::seeded;
use crate::{Error, Matrix, Result, Vector};

/// A constant skew-symmetric matrix `J`, stored with the scale `δ` it was
/// built with.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    entries: Matrix,
    delta: f64,
}

impl SkewMatrix {
    /// Wraps `entries` after checking exact skew-symmetry.
    pub fn from_matrix(entries: Matrix, delta: f64) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::Dimension(format!(
                "skew matrix must be square, got {}x{}",
                n,
                entries.ncols()
            )));
        }
        for i in 0..n {
            if entries[(i, i)] != 0.0 {
                return Err(Error::Argument(format!("diagonal entry {i} is nonzero")));
            }
            for j in (i + 1)..n {
                if entries[(i, j)] != -entries[(j, i)] {
                    return Err(Error::Argument(format!(
                        "entries ({i},{j}) and ({j},{i}) are not negatives of each other"
                    )));
                }
            }
        }
        Ok(Self { entries, delta })
    }

    pub fn zero(d: usize) -> Self {
        Self {
            entries: Matrix::zeros(d, d),
            delta: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Returns `factor · J`; skew-symmetry is preserved exactly because the
    /// lower triangle is rebuilt by negation.
    pub fn scaled(&self, factor: f64) -> Self {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = factor * self.entries[(i, j)];
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        Self {
            entries: m,
            delta: factor * self.delta,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Dimension(format!(
            "skew-symmetric perturbations need d >= 2, got {d}"
        )));
    }
    Ok(())
}

/// `δ (U − Uᵀ)` with `U` the strictly upper-triangular all-ones matrix.
pub fn skew_fixed_pattern(delta: f64, d: usize) -> Result<SkewMatrix> {
    check_dim(d)?;
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            m[(i, j)] = delta;
            m[(j, i)] = -delta;
        }
    }
    Ok(SkewMatrix { entries: m, delta })
}

/// Random ±1 strictly-lower-triangular matrix minus its transpose, rescaled
/// to unit spectral norm. Deterministic in `seed`.
pub fn skew_random_unit(seed: u64, d: usize) -> Result<SkewMatrix> {
    check_dim(d)?;
    let mut rng = seeded(seed, 0);
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..i {
            let v = if rng.random::<bool>() { 1.0 } else { -1.0 };
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    let norm = spectral_norm(&m);
    let unit = SkewMatrix {
        entries: m,
        delta: 1.0,
    };
    Ok(unit.scaled(1.0 / norm).with_delta(1.0))
}

impl SkewMatrix {
    fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }
}

/// `C = ½JB + ½BJ`, returned exactly skew-symmetric.
pub fn giirr_matrix(b: &Matrix, j: &SkewMatrix) -> Result<Matrix> {
    let n = j.dim();
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::Dimension(format!(
            "metric is {}x{} but J is {}x{}",
            b.nrows(),
            b.ncols(),
            n,
            n
        )));
    }
    let jm = j.matrix();
    let raw = (jm * b + b * jm) * 0.5;
    let mut c = Matrix::zeros(n, n);
    for r in 0..n {
        for s in (r + 1)..n {
            let v = 0.5 * (raw[(r, s)] - raw[(s, r)]);
            c[(r, s)] = v;
            c[(s, r)] = -v;
        }
    }
    Ok(c)
}

/// Central finite-difference divergence of a matrix field:
/// component `i` is `Σⱼ (M_ij(θ+εeⱼ) − M_ij(θ−εeⱼ)) / 2ε`.
pub fn matrix_divergence_fd<F>(field: F, theta: &Vector, eps: f64) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<Matrix>,
{
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("eps must be positive, got {eps}")));
    }
    let d = theta.len();
    let mut div = Vector::zeros(d);
    for j in 0..d {
        let mut plus = theta.clone();
        plus[j] += eps;
        let mut minus = theta.clone();
        minus[j] -= eps;
        let mp = field(&plus)?;
        let mm = field(&minus)?;
        for i in 0..d {
            div[i] += (mp[(i, j)] - mm[(i, j)]) / (2.0 * eps);
        }
    }
    Ok(div)
}

/// Lower-triangular `Σ` with `ΣΣᵀ = 2βB`.
pub fn metric_factor(b: &Matrix, beta: f64) -> Result<Matrix> {
    if !(beta > 0.0) {
        return Err(Error::Argument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    cholesky_lower(&(b * (2.0 * beta)))
}

/// Metric quantities evaluated at one state.
#[derive(Debug, Clone)]
pub struct MetricPoint {
    pub metric: Matrix,
    pub div_metric: Vector,
    /// `∇·C` for the requested skew matrix, when one was supplied.
    pub div_giirr: Option<Vector>,
}

/// A state-dependent symmetric positive definite field `B(θ)` together with
/// the divergences the reversible and geometry-informed drifts need.
pub trait MetricBundle: Sync {
    fn dim(&self) -> usize;

    fn metric(&self, theta: &Vector) -> Result<Matrix>;

    /// `(∇·B)_i = Σⱼ ∂θⱼ B_ij`.
    fn div_metric(&self, theta: &Vector) -> Result<Vector>;

    /// `∇·C` for `C = ½(JB + BJ)`.
    fn div_giirr(&self, theta: &Vector, skew: &SkewMatrix) -> Result<Vector>;

    /// `true` when `B` does not depend on the state; samplers then cache the
    /// noise factor.
    fn is_constant(&self) -> bool {
        false
    }

    /// All metric quantities at `theta`. Implementations override this when
    /// the pieces share expensive intermediates.
    fn evaluate(&self, theta: &Vector, skew: Option<&SkewMatrix>) -> Result<MetricPoint> {
        let metric = self.metric(theta)?;
        let div_metric = self.div_metric(theta)?;
        let div_giirr = match skew {
            Some(j) => Some(self.div_giirr(theta, j)?),
            None => None,
        };
        Ok(MetricPoint {
            metric,
            div_metric,
            div_giirr,
        })
    }

    fn sqrt_factor(&self, theta: &Vector, beta: f64) -> Result<Matrix> {
        metric_factor(&self.metric(theta)?, beta)
    }
}

/// The geometry-informed skew field built from a metric and a constant `J`.
pub struct IrrField<'a> {
    pub metric: &'a dyn MetricBundle,
    pub skew: &'a SkewMatrix,
}

impl<'a> IrrField<'a> {
    pub fn new(metric: &'a dyn MetricBundle, skew: &'a SkewMatrix) -> Self {
        Self { metric, skew }
    }

    pub fn c(&self, theta: &Vector) -> Result<Matrix> {
        giirr_matrix(&self.metric.metric(theta)?, self.skew)
    }

    pub fn div_c(&self, theta: &Vector) -> Result<Vector> {
        self.metric.div_giirr(theta, self.skew)
    }
}

/// A state-independent metric.
#[derive(Debug, Clone)]
pub struct ConstantMetric {
    metric: Matrix,
}

impl ConstantMetric {
    pub fn new(metric: Matrix) -> Result<Self> {
        let n = metric.nrows();
        if metric.ncols() != n {
            return Err(Error::Dimension(format!(
                "metric must be square, got {}x{}",
                n,
                metric.ncols()
            )));
        }
        cholesky_lower(&metric)?;
        Ok(Self { metric })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            metric: Matrix::identity(d, d),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.metric
    }
}

impl MetricBundle for ConstantMetric {
    fn dim(&self) -> usize {
        self.metric.nrows()
    }

    fn metric(&self, _theta: &Vector) -> Result<Matrix> {
        Ok(self.metric.clone())
    }

    fn div_metric(&self, _theta: &Vector) -> Result<Vector> {
        Ok(Vector::zeros(self.dim()))
    }

    fn div_giirr(&self, _theta: &Vector, _skew: &SkewMatrix) -> Result<Vector> {
        Ok(Vector::zeros(self.dim()))
    }

    fn is_constant(&self) -> bool {
        true
    }
}

/// Maximum discrepancy between analytic and finite-difference divergences
/// found by [`validate_divergences`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceCheck {
    pub div_metric_error: f64,
    pub div_giirr_error: f64,
}

/// Compares the analytic `∇·B` (and `∇·C` when `skew` is given) with
/// [`matrix_divergence_fd`] at every point, failing when the largest absolute
/// mismatch exceeds `tol`.
pub fn validate_divergences(
    bundle: &dyn MetricBundle,
    points: &[Vector],
    skew: Option<&SkewMatrix>,
    eps: f64,
    tol: f64,
) -> Result<DivergenceCheck> {
    let mut check = DivergenceCheck {
        div_metric_error: 0.0,
        div_giirr_error: 0.0,
    };
    for theta in points {
        let analytic = bundle.div_metric(theta)?;
        let fd = matrix_divergence_fd(|t| bundle.metric(t), theta, eps)?;
        check.div_metric_error = check.div_metric_error.max((analytic - fd).abs().max());
        if let Some(j) = skew {
            let analytic = bundle.div_giirr(theta, j)?;
            let fd = matrix_divergence_fd(|t| giirr_matrix(&bundle.metric(t)?, j), theta, eps)?;
            check.div_giirr_error = check.div_giirr_error.max((analytic - fd).abs().max());
        }
    }
    if check.div_metric_error > tol || check.div_giirr_error > tol {
        return Err(Error::Config(format!(
            "analytic divergence disagrees with finite differences: |ΔdivB| = {:e}, |ΔdivC| = {:e}",
            check.div_metric_error, check.div_giirr_error
        )));
    }
    Ok(check)
}

/// Finite-difference `∇·(γπ)` for `γ = C∇log π + ∇·C`.
///
/// `π` is rescaled by `π(θ)` so the returned pair is
/// `(∇·(γπ)/π(θ), ‖γ(θ)‖)`.
pub fn irr_flux_divergence_fd<L, G, C, D>(
    log_density: L,
    grad_log: G,
    c_field: C,
    div_c: D,
    theta: &Vector,
    eps: f64,
) -> Result<(f64, f64)>
where
    L: Fn(&Vector) -> Result<f64>,
    G: Fn(&Vector) -> Result<Vector>,
    C: Fn(&Vector) -> Result<Matrix>,
    D: Fn(&Vector) -> Result<Vector>,
{
    let base = log_density(theta)?;
    let flux = |t: &Vector| -> Result<Vector> {
        let gamma = c_field(t)? * grad_log(t)? + div_c(t)?;
        Ok(gamma * (log_density(t)? - base).exp())
    };
    let d = theta.len();
    let mut div = 0.0;
    for i in 0..d {
        let mut plus = theta.clone();
        plus[i] += eps;
        let mut minus = theta.clone();
        minus[i] -= eps;
        div += (flux(&plus)?[i] - flux(&minus)?[i]) / (2.0 * eps);
    }
    Ok((div, flux(theta)?.norm()))
}

/// Convenience for tests and validation: evaluates a bundle's divergences
/// at many points.
pub fn sample_points(center: &Vector, spread: f64, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = seeded(seed, 0);
    (0..count)
        .map(|_| {
            Vector::from_fn(center.len(), |i, _| {
                center[i] + spread * (2.0 * rng.random::<f64>() - 1.0)
            })
        })
        .collect()
}
