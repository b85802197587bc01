#![allow(dead_code)]

use langevin_core::data::{
    gen_gaussian_dataset, gen_ica_sources, gen_logistic_dataset, random_precision,
};
use langevin_core::target::{
    GaussianLinearTarget, IcaTarget, LogisticRegressionTarget, NormalParamsTarget, TargetModel,
};
use langevin_core::{Matrix, Vector};

/// Three-dimensional linear Gaussian model with a rotated prior precision.
pub fn gaussian(n: usize) -> GaussianLinearTarget {
    let prior = random_precision(11, &[0.2, 0.01, 0.05]).unwrap();
    let data_precision = Matrix::identity(3, 3) * 0.25;
    let data = gen_gaussian_dataset(12, n, &Vector::from_element(3, 1.0), &data_precision).unwrap();
    GaussianLinearTarget::new(prior, data_precision, data.rows).unwrap()
}

pub fn normal_params(n: usize) -> NormalParamsTarget {
    let precision = Matrix::from_element(1, 1, 0.01);
    let data = gen_gaussian_dataset(5, n, &Vector::zeros(1), &precision).unwrap();
    NormalParamsTarget::new(data.rows.iter().map(|x| x[0]).collect()).unwrap()
}

pub fn logistic(n: usize, d: usize) -> LogisticRegressionTarget {
    let (data, _) = gen_logistic_dataset(3, n, d, true).unwrap();
    LogisticRegressionTarget::new(data.rows, data.labels.unwrap(), 1.0).unwrap()
}

pub fn ica(n: usize) -> IcaTarget {
    let s = gen_ica_sources(21, 3, n).unwrap();
    IcaTarget::new(3, s.mixed_columns(), 1.0).unwrap()
}

/// A point where every target above is finite and admissible.
pub fn interior_point(t: &dyn TargetModel, seed: u64) -> Vector {
    let d = t.dim();
    let mut v = Vector::from_fn(d, |i, _| {
        let x = ((seed as f64 + 1.0) * 0.7548776662 + i as f64 * 0.5698402910).fract();
        0.6 * (2.0 * x - 1.0)
    });
    if d == 9 {
        // ICA: keep W well away from singular
        for i in 0..3 {
            v[i * 4] += 1.5;
        }
    }
    if d == 2 {
        v[1] = 5.0 + 10.0 * v[1].abs();
    }
    v
}

/// Central-difference gradient of a scalar function.
pub fn fd_grad(f: impl Fn(&Vector) -> f64, x: &Vector, eps: f64) -> Vector {
    Vector::from_fn(x.len(), |i, _| {
        let mut p = x.clone();
        p[i] += eps;
        let mut m = x.clone();
        m[i] -= eps;
        (f(&p) - f(&m)) / (2.0 * eps)
    })
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}
