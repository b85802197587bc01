//! Closed-form bias and variance of Euler–Maruyama time averages for a 2D
//! Gaussian with scalar precisions and drift matrix `A = a(I + J)`,
//! `J = δ[[0, 1], [−1, 0]]`, plus a Monte Carlo cross-check of each formula.
//!
//! The discrete chain is `θ_{k+1} = (I − hA)θ_k + hD + √h ξ_k` from `θ₀ = 0`
//! with `D = b(I + J)S_X`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarGaussianSetup {
    pub a: f64,
    pub b: f64,
    pub s_x: [f64; 2],
    pub delta: f64,
    pub h: f64,
    pub k: usize,
}

impl ScalarGaussianSetup {
    /// Builds `a = ½(1/σθ² + N/σX²)` and `b = 1/(2σX²)` from the model.
    pub fn from_model(
        sigma_theta: f64,
        sigma_x: f64,
        n: usize,
        s_x: [f64; 2],
        delta: f64,
        h: f64,
        k: usize,
    ) -> Self {
        let a = 0.5 * (1.0 / (sigma_theta * sigma_theta) + n as f64 / (sigma_x * sigma_x));
        let b = 1.0 / (2.0 * sigma_x * sigma_x);
        Self {
            a,
            b,
            s_x,
            delta,
            h,
            k,
        }
    }

    /// `1 − s = 2ah − a²h²(1+δ²)`, formed without cancellation.
    fn one_minus_s(&self) -> f64 {
        let ah = self.a * self.h;
        2.0 * ah - ah * ah * (1.0 + self.delta * self.delta)
    }

    /// `w = 1 − ah(1 + iδ)` as `(re, im)`.
    fn w(&self) -> (f64, f64) {
        let ah = self.a * self.h;
        (1.0 - ah, -ah * self.delta)
    }

    /// Posterior mean `μ_p = A⁻¹D = (b/a) S_X`.
    pub fn posterior_mean(&self) -> [f64; 2] {
        let r = self.b / self.a;
        [r * self.s_x[0], r * self.s_x[1]]
    }

    fn check_stable(&self) -> Result<()> {
        let oms = self.one_minus_s();
        if !(oms > 0.0) || !(self.h > 0.0) {
            return Err(Error::Unstable(format!(
                "|1 − ah(1 ± iδ)| ≥ 1 for a = {}, h = {}, δ = {}",
                self.a, self.h, self.delta
            )));
        }
        if self.k == 0 {
            return Err(Error::Argument("K must be at least 1".into()));
        }
        Ok(())
    }
}

/// `(1 − sⁿ)/(1 − s)` computed from `1 − s` directly; `n` at `s = 1`.
fn geometric(one_minus_s: f64, n: f64) -> f64 {
    if one_minus_s.abs() < 1e-300 {
        return n;
    }
    let ln_s = (-one_minus_s).ln_1p();
    -(n * ln_s).exp_m1() / one_minus_s
}

fn s_pow(one_minus_s: f64, n: f64) -> f64 {
    (n * (-one_minus_s).ln_1p()).exp()
}

/// `s = 1 − 2ah + a²h²(1 + δ²)`.
pub fn s_factor(setup: &ScalarGaussianSetup) -> f64 {
    1.0 - setup.one_minus_s()
}

/// `‖E θ̄_K − μ_p‖²`
/// `= b²/(K²h²a⁴(1+δ²)) · (1 + r^{2K} − 2r^K cos Kφ) · ‖S_X‖²`
/// with `r e^{iφ} = 1 − ah(1 + iδ)`.
pub fn linear_bias_sq(setup: &ScalarGaussianSetup) -> Result<f64> {
    setup.check_stable()?;
    let (re, im) = setup.w();
    let r = (re * re + im * im).sqrt();
    let phi = im.atan2(re);
    let k = setup.k as f64;
    let rk = r.powf(k);
    let factor = 1.0 + rk * rk - 2.0 * rk * (k * phi).cos();
    Ok(linear_bias_envelope(setup) * factor)
}

/// The `δ`-dependent prefactor `b²‖S_X‖²/(K²h²a⁴(1+δ²))` of the linear bias.
pub fn linear_bias_envelope(setup: &ScalarGaussianSetup) -> f64 {
    let s2 = setup.s_x[0] * setup.s_x[0] + setup.s_x[1] * setup.s_x[1];
    let kh = setup.k as f64 * setup.h;
    setup.b * setup.b * s2 / (kh * kh * setup.a.powi(4) * (1.0 + setup.delta * setup.delta))
}

/// `Tr Σ_k = 2h(1 − s^k)/(1 − s)`; equals `2hk` at `s = 1`.
pub fn trace_sigma_k(setup: &ScalarGaussianSetup, k: usize) -> f64 {
    2.0 * setup.h * geometric(setup.one_minus_s(), k as f64)
}

/// `Tr Var θ̄_K = K⁻²(2h(K/(1−s) − (1−s^K)/(1−s)²) + 2 Tr F)` with
/// `Tr F = Σ_i h(1−sⁱ)/(1−s) · Σ_{m=1}^{K−1−i} 2 Re wᵐ` evaluated term by term.
pub fn linear_avg_trace_var(setup: &ScalarGaussianSetup) -> Result<f64> {
    setup.check_stable()?;
    let oms = setup.one_minus_s();
    let h = setup.h;
    let kk = setup.k;
    let k = kk as f64;
    let diag = 2.0 * h * (k - geometric(oms, k)) / oms;

    // Σ_{m=1}^{M} wᵐ = w(1 − w^M)/(1 − w)
    let (wr, wi) = setup.w();
    let (dr, di) = (1.0 - wr, -wi);
    let den = dr * dr + di * di;
    let r = (wr * wr + wi * wi).sqrt();
    let phi = wi.atan2(wr);
    let mut tr_f = 0.0;
    for i in 0..kk {
        let m = (kk - 1 - i) as f64;
        if m == 0.0 {
            continue;
        }
        let rm = r.powf(m);
        let (pr, pi) = (1.0 - rm * (m * phi).cos(), -rm * (m * phi).sin());
        // w(1 − w^M)
        let (nr, ni) = (wr * pr - wi * pi, wr * pi + wi * pr);
        // divided by (1 − w), real part only
        let re = (nr * dr + ni * di) / den;
        tr_f += h * geometric(oms, i as f64) * 2.0 * re;
    }
    Ok((diag + 2.0 * tr_f) / (k * k))
}

/// `Tr Var θ_∞ = 2/(2a − ha²(1 + δ²))`.
pub fn asymptotic_trace_var(setup: &ScalarGaussianSetup) -> Result<f64> {
    let den = 2.0 * setup.a - setup.h * setup.a * setup.a * (1.0 + setup.delta * setup.delta);
    if !(den > 0.0) {
        return Err(Error::Unstable(format!(
            "2a − ha²(1+δ²) = {den:e} is not positive"
        )));
    }
    Ok(2.0 / den)
}

/// Moments of the time average of `φ(θ) = ‖θ‖²` (with `D = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub bias_sq: f64,
    pub variance: f64,
}

/// `E φ̄_K = 2h(1/(1−s) − (1−s^K)/(K(1−s)²))`,
/// `E φ̄_K² = K⁻² Σ_k (β_k + 2R_k)` with
/// `β_k = 16sh²/(1−s)·((1−s^{2k})/(1−s²) − s^{k−1}(1−s^k)/(1−s)) + 8h²(1−s^{2k})/(1−s²)` and
/// `R_k = β_k(s − s^{K−k})/(1−s) + 2h E‖θ_k‖²/(1−s)·(K−1−k − (s − s^{K−k})/(1−s))`.
/// The bias is taken against the exact value `E_π‖θ‖² = 1/a`.
pub fn quad_estimator_moments(setup: &ScalarGaussianSetup) -> Result<QuadMoments> {
    setup.check_stable()?;
    let oms = setup.one_minus_s();
    let s = 1.0 - oms;
    let h = setup.h;
    let kk = setup.k;
    let k = kk as f64;
    let mean = 2.0 * h * (1.0 / oms - geometric(oms, k) / (k * oms));
    // 1 − s² = (1 − s)(1 + s)
    let oms2 = oms * (1.0 + s);
    let geo2 = |n: f64| -(n * (-oms).ln_1p() * 2.0).exp_m1() / oms2;
    let mut acc = 0.0;
    for i in 0..kk {
        let kf = i as f64;
        let beta_k = if i == 0 {
            0.0
        } else {
            16.0 * s * h * h / oms * (geo2(kf) - s_pow(oms, kf - 1.0) * geometric(oms, kf))
                + 8.0 * h * h * geo2(kf)
        };
        let e_sq = 2.0 * h * geometric(oms, kf);
        // (s − s^{K−k})/(1−s) = s(1 − s^{K−k−1})/(1−s)
        let tail = s * geometric(oms, k - kf - 1.0);
        let r_k = beta_k * tail + 2.0 * h * e_sq / oms * (k - 1.0 - kf - tail);
        acc += beta_k + 2.0 * r_k;
    }
    let second_moment = acc / (k * k);
    let bias = mean - 1.0 / setup.a;
    Ok(QuadMoments {
        mean,
        second_moment,
        bias_sq: bias * bias,
        variance: second_moment - mean * mean,
    })
}

/// A closed-form value beside its Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEntry {
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
}

impl OracleEntry {
    /// `|closed − estimate|` in units of the standard error.
    pub fn z_score(&self) -> f64 {
        let diff = (self.closed_form - self.estimate).abs();
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.z_score() <= sigmas
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableKind {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub setup: ScalarGaussianSetup,
    pub replicates: usize,
    /// `(name, entry)` pairs.
    pub entries: Vec<(&'static str, OracleEntry)>,
}

impl OracleReport {
    pub fn get(&self, name: &str) -> Option<&OracleEntry> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, e)| e)
    }

    pub fn worst_z(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, e)| e.z_score())
            .fold(0.0, f64::max)
    }
}

/// Per-replicate raw output of the exact recurrence.
struct Replicate {
    avg: [f64; 2],
    /// Time average of `‖θ_k − m_k‖²`, the `D = 0` path.
    quad: f64,
}

fn simulate_replicates(
    setup: &ScalarGaussianSetup,
    replicates: usize,
    seed: u64,
) -> Vec<Replicate> {
    let (a, h, d) = (setup.a, setup.h, setup.delta);
    // I − hA = [[1 − ah, −ahδ], [ahδ, 1 − ah]]
    let (p, q) = (1.0 - a * h, a * h * d);
    let dv = [
        setup.b * (setup.s_x[0] + d * setup.s_x[1]),
        setup.b * (setup.s_x[1] - d * setup.s_x[0]),
    ];
    let sqrt_h = h.sqrt();
    (0..replicates)
        .map(|rep| {
            let mut rng = seeded(seed, rep as u64);
            let (mut x, mut m) = ([0.0f64; 2], [0.0f64; 2]);
            let (mut sum, mut quad) = ([0.0f64; 2], 0.0);
            for _ in 0..setup.k {
                sum[0] += x[0];
                sum[1] += x[1];
                let (e0, e1) = (x[0] - m[0], x[1] - m[1]);
                quad += e0 * e0 + e1 * e1;
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                x = [
                    p * x[0] - q * x[1] + h * dv[0] + sqrt_h * z0,
                    q * x[0] + p * x[1] + h * dv[1] + sqrt_h * z1,
                ];
                m = [
                    p * m[0] - q * m[1] + h * dv[0],
                    q * m[0] + p * m[1] + h * dv[1],
                ];
            }
            let k = setup.k as f64;
            Replicate {
                avg: [sum[0] / k, sum[1] / k],
                quad: quad / k,
            }
        })
        .collect()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Unbiased sample variance with a standard error taken from the spread of
/// the centred squares.
fn variance_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let sq: Vec<f64> = values
        .iter()
        .map(|x| (x - m) * (x - m) * n / (n - 1.0))
        .collect();
    mean_and_se(&sq)
}

/// Simulates the exact recurrence for `replicates` independent chains and
/// compares the empirical moments of the time average with the closed forms.
///
/// Linear: `bias_sq` (debiased `‖mean − μ_p‖²`) and `trace_var`.
/// Quadratic (on the `D = 0` path): `mean`, `bias_sq`, `variance`.
pub fn mc_crosscheck(
    setup: &ScalarGaussianSetup,
    kind: ObservableKind,
    replicates: usize,
    seed: u64,
) -> Result<OracleReport> {
    setup.check_stable()?;
    if replicates < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 replicates, got {replicates}"
        )));
    }
    let reps = simulate_replicates(setup, replicates, seed);
    let n = replicates as f64;
    let mut entries = Vec::new();
    match kind {
        ObservableKind::Linear => {
            let mu = setup.posterior_mean();
            let c0: Vec<f64> = reps.iter().map(|r| r.avg[0]).collect();
            let c1: Vec<f64> = reps.iter().map(|r| r.avg[1]).collect();
            let (m0, se0) = mean_and_se(&c0);
            let (m1, se1) = mean_and_se(&c1);
            let (v0, vse0) = variance_and_se(&c0);
            let (v1, vse1) = variance_and_se(&c1);
            let (e0, e1) = (m0 - mu[0], m1 - mu[1]);
            let trace = v0 + v1;
            let bias_sq = e0 * e0 + e1 * e1 - trace / n;
            let bias_se = (4.0 * (e0 * e0 * se0 * se0 + e1 * e1 * se1 * se1)
                + 2.0 * (se0.powi(4) + se1.powi(4)))
            .sqrt();
            entries.push((
                "bias_sq",
                OracleEntry {
                    closed_form: linear_bias_sq(setup)?,
                    estimate: bias_sq,
                    std_error: bias_se,
                },
            ));
            // The two coordinates' sample variances are strongly correlated
            // through the rotation, so add their errors linearly.
            entries.push((
                "trace_var",
                OracleEntry {
                    closed_form: linear_avg_trace_var(setup)?,
                    estimate: trace,
                    std_error: vse0 + vse1,
                },
            ));
        }
        ObservableKind::Quadratic => {
            let closed = quad_estimator_moments(setup)?;
            let q: Vec<f64> = reps.iter().map(|r| r.quad).collect();
            let (m, se) = mean_and_se(&q);
            let (v, vse) = variance_and_se(&q);
            let bias = m - 1.0 / setup.a;
            entries.push((
                "mean",
                OracleEntry {
                    closed_form: closed.mean,
                    estimate: m,
                    std_error: se,
                },
            ));
            entries.push((
                "bias_sq",
                OracleEntry {
                    closed_form: closed.bias_sq,
                    estimate: bias * bias - v / n,
                    std_error: (4.0 * bias * bias * se * se + 2.0 * se.powi(4)).sqrt(),
                },
            ));
            entries.push((
                "variance",
                OracleEntry {
                    closed_form: closed.variance,
                    estimate: v,
                    std_error: vse,
                },
            ));
        }
    }
    Ok(OracleReport {
        setup: *setup,
        replicates,
        entries,
    })
}

/// Checks `Tr Var θ_∞` by running each replicate until `s^k < 1e−10` and
/// taking the spread of the final state of the `D = 0` path.
pub fn mc_asymptotic_check(
    setup: &ScalarGaussianSetup,
    replicates: usize,
    seed: u64,
) -> Result<OracleEntry> {
    let closed = asymptotic_trace_var(setup)?;
    let oms = setup.one_minus_s();
    let steps = ((1e-10f64).ln() / (-oms).ln_1p()).ceil() as usize;
    let (a, h, d) = (setup.a, setup.h, setup.delta);
    let (p, q) = (1.0 - a * h, a * h * d);
    let sqrt_h = h.sqrt();
    let finals: Vec<f64> = (0..replicates)
        .map(|rep| {
            let mut rng = seeded(seed, rep as u64);
            let mut x = [0.0f64; 2];
            for _ in 0..steps {
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                x = [
                    p * x[0] - q * x[1] + sqrt_h * z0,
                    q * x[0] + p * x[1] + sqrt_h * z1,
                ];
            }
            x[0] * x[0] + x[1] * x[1]
        })
        .collect();
    let (m, se) = mean_and_se(&finals);
    Ok(OracleEntry {
        closed_form: closed,
        estimate: m,
        std_error: se,
    })
}

/// One `(h, K, δ)` row of closed-form values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub h: f64,
    pub k: usize,
    pub delta: f64,
    pub s: f64,
    pub linear_bias_sq: f64,
    pub linear_trace_var: f64,
    pub quad_mean: f64,
    pub quad_bias_sq: f64,
    pub quad_variance: f64,
    pub asymptotic_trace_var: f64,
}

/// Closed forms over a grid; `base` supplies `a`, `b` and `S_X`.
pub fn sweep(
    base: &ScalarGaussianSetup,
    hs: &[f64],
    ks: &[usize],
    deltas: &[f64],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(hs.len() * ks.len() * deltas.len());
    for &h in hs {
        for &k in ks {
            for &delta in deltas {
                let setup = ScalarGaussianSetup {
                    h,
                    k,
                    delta,
                    ..*base
                };
                let quad = quad_estimator_moments(&setup)?;
                rows.push(SweepRow {
                    h,
                    k,
                    delta,
                    s: s_factor(&setup),
                    linear_bias_sq: linear_bias_sq(&setup)?,
                    linear_trace_var: linear_avg_trace_var(&setup)?,
                    quad_mean: quad.mean,
                    quad_bias_sq: quad.bias_sq,
                    quad_variance: quad.variance,
                    asymptotic_trace_var: asymptotic_trace_var(&setup)?,
                });
            }
        }
    }
    Ok(rows)
}
