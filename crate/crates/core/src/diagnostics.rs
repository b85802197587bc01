//! Estimator diagnostics: running averages, ensemble bias and variance,
//! batch-means asymptotic variance and the kernelized Stein discrepancy.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result, Vector};

pub const DEFAULT_BATCHES: usize = 20;

/// Prefix means of `trace`.
pub fn running_average(trace: &[f64]) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(Error::Argument("running average of an empty trace".into()));
    }
    let mut acc = 0.0;
    Ok(trace
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            acc += v;
            acc / (i + 1) as f64
        })
        .collect())
}

/// Mean and population variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleStats {
    pub mean_estimate: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    /// `K h` times the across-chain variance.
    pub asymptotic_variance: f64,
    pub std_across_chains: f64,
}

/// Bias, variance and MSE of the final averages of `M ≥ 2` chains against
/// `reference`. Variances divide by `M`. `duration` is the simulated time
/// `K h` behind each average.
pub fn ensemble_stats(finals: &[f64], reference: f64, duration: f64) -> Result<EnsembleStats> {
    if finals.len() < 2 {
        return Err(Error::InsufficientChains {
            needed: 2,
            got: finals.len(),
        });
    }
    let (mean, variance) = mean_var(finals);
    let bias = mean - reference;
    Ok(EnsembleStats {
        mean_estimate: mean,
        bias,
        variance,
        mse: bias * bias + variance,
        asymptotic_variance: duration * variance,
        std_across_chains: variance.sqrt(),
    })
}

/// Batch-means estimate of the asymptotic variance of the time average.
///
/// The trace is cut into `batches` contiguous batches of equal length (the
/// remainder is dropped). The result is the batch duration `len·h` times the
/// unbiased variance of the batch means.
pub fn batch_means_avar(trace: &[f64], h: f64, batches: usize) -> Result<f64> {
    if batches < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 batches, got {batches}"
        )));
    }
    if trace.len() < 2 * batches {
        return Err(Error::Argument(format!(
            "trace of length {} is too short for {batches} batches",
            trace.len()
        )));
    }
    let len = trace.len() / batches;
    // Centre first so that adding a constant to the trace changes nothing
    // beyond rounding.
    let shift = trace[0];
    let means: Vec<f64> = trace[..len * batches]
        .chunks_exact(len)
        .map(|c| c.iter().map(|v| v - shift).sum::<f64>() / len as f64)
        .collect();
    let (_, pop) = mean_var(&means);
    let sample = pop * batches as f64 / (batches - 1) as f64;
    Ok(len as f64 * h * sample)
}

/// Inverse multiquadric kernel `(c² + ‖x−y‖²)^β` with closed-form
/// derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Imq {
    pub c: f64,
    pub beta: f64,
}

impl Default for Imq {
    fn default() -> Self {
        Self { c: 1.0, beta: -0.5 }
    }
}

impl Imq {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        if !(c > 0.0) || !(beta > -1.0 && beta < 0.0) {
            return Err(Error::Argument(format!(
                "IMQ kernel needs c > 0 and beta in (-1, 0), got c = {c}, beta = {beta}"
            )));
        }
        Ok(Self { c, beta })
    }

    /// `(q^β, q^{β−1}, q^{β−2})` for `q = c² + ‖u‖²`.
    #[inline]
    fn powers(&self, q: f64) -> (f64, f64, f64) {
        let r = if self.beta == -0.5 {
            1.0 / q.sqrt()
        } else {
            q.powf(self.beta)
        };
        let r1 = r / q;
        (r, r1, r1 / q)
    }

    pub fn value(&self, x: &Vector, y: &Vector) -> f64 {
        self.powers(self.c * self.c + (x - y).norm_squared()).0
    }

    /// `∂r/∂x_j`; the `y` derivative is its negative.
    pub fn grad_x(&self, j: usize, x: &Vector, y: &Vector) -> f64 {
        let u = x - y;
        let (_, r1, _) = self.powers(self.c * self.c + u.norm_squared());
        2.0 * self.beta * u[j] * r1
    }

    /// `∂²r/∂x_j∂y_j`.
    pub fn cross(&self, j: usize, x: &Vector, y: &Vector) -> f64 {
        let u = x - y;
        let (_, r1, r2) = self.powers(self.c * self.c + u.norm_squared());
        -2.0 * self.beta * r1 - 4.0 * self.beta * (self.beta - 1.0) * u[j] * u[j] * r2
    }
}

/// `r₀ʲ(x, y)` for every coordinate `j`, given `b = ∇log π` at both points.
/// Writes into `out`.
pub fn stein_kernel_all(
    kernel: &Imq,
    x: &[f64],
    y: &[f64],
    bx: &[f64],
    by: &[f64],
    out: &mut [f64],
) {
    let mut sq = 0.0;
    for (a, b) in x.iter().zip(y) {
        sq += (a - b) * (a - b);
    }
    let (r, r1, r2) = kernel.powers(kernel.c * kernel.c + sq);
    let beta = kernel.beta;
    for j in 0..x.len() {
        let u = x[j] - y[j];
        let dx = 2.0 * beta * u * r1;
        let cross = -2.0 * beta * r1 - 4.0 * beta * (beta - 1.0) * u * u * r2;
        out[j] = bx[j] * by[j] * r - bx[j] * dx + by[j] * dx + cross;
    }
}

/// Single Stein kernel component `r₀ʲ(x, y)`.
pub fn stein_kernel_component<G>(kernel: &Imq, j: usize, x: &Vector, y: &Vector, grad_log: G) -> f64
where
    G: Fn(&Vector) -> Vector,
{
    let (bx, by) = (grad_log(x), grad_log(y));
    let mut out = alloc::vec![0.0; x.len()];
    stein_kernel_all(
        kernel,
        x.as_slice(),
        y.as_slice(),
        bx.as_slice(),
        by.as_slice(),
        &mut out,
    );
    out[j]
}

fn check_samples(samples: &[Vector], grads: &[Vector]) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::Argument("KSD needs at least one sample".into()));
    }
    if samples.len() != grads.len() {
        return Err(Error::Dimension(format!(
            "{} samples but {} gradients",
            samples.len(),
            grads.len()
        )));
    }
    let d = samples[0].len();
    if samples.iter().chain(grads).any(|v| v.len() != d) {
        return Err(Error::Dimension(
            "samples and gradients must share one dimension".into(),
        ));
    }
    Ok(d)
}

fn ksd_from_sums(sums: &[f64], k: usize) -> f64 {
    let norm = 1.0 / (k as f64 * k as f64);
    sums.iter()
        .map(|&s| {
            let w2 = s * norm;
            if w2 < 0.0 {
                log::warn!("negative Stein double sum {w2:e} clamped to zero");
                0.0
            } else {
                w2
            }
        })
        .sum::<f64>()
        .sqrt()
}

/// KSD `‖w‖₂` with `w_j² = K⁻² Σ_{k,k'} r₀ʲ(x_k, x_k')`, diagonal terms
/// included. `grads[k]` is `∇log π(samples[k])`.
pub fn ksd(samples: &[Vector], grads: &[Vector], kernel: &Imq) -> Result<f64> {
    let out = ksd_prefixes(samples, grads, kernel, &[samples.len()])?;
    Ok(out[0].1)
}

/// KSD of each prefix `samples[..K]` for the increasing sizes in `sizes`,
/// accumulated incrementally in one `O(K_max² d)` pass.
pub fn ksd_prefixes(
    samples: &[Vector],
    grads: &[Vector],
    kernel: &Imq,
    sizes: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let d = check_samples(samples, grads)?;
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(
            "KSD sizes must be strictly increasing".into(),
        ));
    }
    if let Some(&last) = sizes.last() {
        if last > samples.len() || sizes[0] == 0 {
            return Err(Error::Argument(format!(
                "KSD sizes must lie in 1..={}",
                samples.len()
            )));
        }
    }
    let mut sums = alloc::vec![0.0; d];
    let mut row = alloc::vec![0.0; d];
    let mut term = alloc::vec![0.0; d];
    let mut out = Vec::with_capacity(sizes.len());
    let mut next = 0;
    for k in 0..samples.len() {
        if next == sizes.len() {
            break;
        }
        let (xk, bk) = (samples[k].as_slice(), grads[k].as_slice());
        row.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..k {
            stein_kernel_all(
                kernel,
                xk,
                samples[i].as_slice(),
                bk,
                grads[i].as_slice(),
                &mut term,
            );
            for (r, t) in row.iter_mut().zip(&term) {
                *r += t;
            }
        }
        stein_kernel_all(kernel, xk, xk, bk, bk, &mut term);
        for j in 0..d {
            sums[j] += 2.0 * row[j] + term[j];
        }
        if k + 1 == sizes[next] {
            out.push((k + 1, ksd_from_sums(&sums, k + 1)));
            next += 1;
        }
    }
    Ok(out)
}

/// Half-decade sizes `10², 10^2.5, …` up to and including `max` when it lies
/// on the grid.
pub fn ksd_schedule(min: usize, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut e = 0.0_f64;
    loop {
        let k = 10f64.powf(e).round() as usize;
        if k > max {
            break;
        }
        if k >= min && out.last() != Some(&k) {
            out.push(k);
        }
        e += 0.5;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsdReport {
    pub points: Vec<(usize, f64)>,
    pub slope: f64,
}

impl KsdReport {
    pub fn new(points: Vec<(usize, f64)>) -> Result<Self> {
        let slope = ksd_slope(&points)?;
        Ok(Self { points, slope })
    }
}

/// Least-squares slope of `log value` against `log K`. Non-positive values
/// are skipped.
pub fn ksd_slope(points: &[(usize, f64)]) -> Result<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(k, v)| {
            let keep = v > 0.0 && k > 0;
            if !keep {
                log::warn!("KSD point ({k}, {v}) excluded from the slope fit");
            }
            keep
        })
        .map(|&(k, v)| ((k as f64).ln(), v.ln()))
        .collect();
    if logs.len() < 3 {
        return Err(Error::Argument(format!(
            "slope fit needs 3 positive points, got {}",
            logs.len()
        )));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("slope fit needs distinct sizes".into()));
    }
    Ok(sxy / sxx)
}

/// Mean and population standard deviation, ignoring `NaN`s.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if finite.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let (m, v) = mean_var(&finite);
    (m, v.sqrt())
}
