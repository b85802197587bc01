use langevin_core::diagnostics::{
    batch_means_avar, ensemble_stats, ksd, ksd_prefixes, ksd_schedule, ksd_slope, mean_std,
    running_average, stein_kernel_component, Imq,
};
use langevin_core::rng::seeded;
use langevin_core::{Error, Vector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

/// Stein kernel from the definition, with kernel derivatives by central
/// differences of the plain IMQ value.
fn stein_fd(k: &Imq, j: usize, x: &Vector, y: &Vector, bx: &Vector, by: &Vector) -> f64 {
    let e = 1e-4;
    let shift = |p: &Vector, s: f64| {
        let mut q = p.clone();
        q[j] += s;
        q
    };
    let dx = (k.value(&shift(x, e), y) - k.value(&shift(x, -e), y)) / (2.0 * e);
    let dy = (k.value(x, &shift(y, e)) - k.value(x, &shift(y, -e))) / (2.0 * e);
    let dxy = (k.value(&shift(x, e), &shift(y, e))
        - k.value(&shift(x, e), &shift(y, -e))
        - k.value(&shift(x, -e), &shift(y, e))
        + k.value(&shift(x, -e), &shift(y, -e)))
        / (4.0 * e * e);
    bx[j] * by[j] * k.value(x, y) + bx[j] * dy + by[j] * dx + dxy
}

fn gaussian_grad(x: &Vector) -> Vector {
    -x
}

fn normal_samples(seed: u64, n: usize, d: usize) -> Vec<Vector> {
    let mut rng = seeded(seed, 0);
    (0..n)
        .map(|_| Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

#[test]
fn stein_identity_holds_under_quadrature() {
    // E_{x~N(0,1)} r₀(x, y) = 0 for every y; trapezoid rule on a smooth,
    // Gaussian-decaying integrand.
    let k = Imq::default();
    let n = 40_001;
    let (lo, hi) = (-14.0, 14.0);
    let dx = (hi - lo) / (n - 1) as f64;
    for y0 in [-2.0, -0.3, 0.0, 0.7, 3.0] {
        let y = v(&[y0]);
        let mut acc = 0.0;
        for i in 0..n {
            let x = v(&[lo + i as f64 * dx]);
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let density = (-0.5 * x[0] * x[0]).exp() / (2.0 * std::f64::consts::PI).sqrt();
            acc += w * density * stein_kernel_component(&k, 0, &x, &y, gaussian_grad);
        }
        assert!((acc * dx).abs() < 1e-5, "y = {y0}: {}", acc * dx);
    }
}

#[test]
fn stein_kernel_matches_definition() {
    let samples = normal_samples(1, 12, 3);
    for k in [Imq::default(), Imq::new(2.0, -0.3).unwrap()] {
        for x in &samples {
            for y in &samples {
                for j in 0..3 {
                    let a = stein_kernel_component(&k, j, x, y, gaussian_grad);
                    let b = stein_fd(&k, j, x, y, &gaussian_grad(x), &gaussian_grad(y));
                    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn ksd_matches_brute_force() {
    let k = Imq::default();
    let xs = normal_samples(2, 30, 2);
    let gs: Vec<Vector> = xs.iter().map(gaussian_grad).collect();
    let mut total = 0.0;
    for j in 0..2 {
        let mut s = 0.0;
        for x in &xs {
            for y in &xs {
                s += stein_fd(&k, j, x, y, &gaussian_grad(x), &gaussian_grad(y));
            }
        }
        total += (s / (30.0 * 30.0)).max(0.0);
    }
    let brute = total.sqrt();
    let fast = ksd(&xs, &gs, &k).unwrap();
    assert!((brute - fast).abs() < 1e-6 * brute, "{brute} vs {fast}");
}

#[test]
fn ksd_prefixes_agree_with_direct_evaluation() {
    let k = Imq::default();
    let xs = normal_samples(3, 200, 3);
    let gs: Vec<Vector> = xs.iter().map(gaussian_grad).collect();
    let sizes = [1, 10, 57, 200];
    for (n, val) in ksd_prefixes(&xs, &gs, &k, &sizes).unwrap() {
        let direct = ksd(&xs[..n], &gs[..n], &k).unwrap();
        assert!((val - direct).abs() < 1e-12 * (1.0 + direct));
    }
    assert!(ksd_prefixes(&xs, &gs, &k, &[10, 10]).is_err());
    assert!(ksd_prefixes(&xs, &gs, &k, &[201]).is_err());
}

#[test]
fn ksd_detects_a_shifted_sample() {
    let k = Imq::default();
    let xs = normal_samples(4, 400, 2);
    let gs: Vec<Vector> = xs.iter().map(gaussian_grad).collect();
    let shifted: Vec<Vector> = xs.iter().map(|x| x.add_scalar(1.0)).collect();
    let gs2: Vec<Vector> = shifted.iter().map(gaussian_grad).collect();
    assert!(ksd(&shifted, &gs2, &k).unwrap() > 5.0 * ksd(&xs, &gs, &k).unwrap());
}

#[test]
fn iid_ksd_decays_at_root_k() {
    let k = Imq::default();
    let xs = normal_samples(5, 3162, 2);
    let gs: Vec<Vector> = xs.iter().map(gaussian_grad).collect();
    let pts = ksd_prefixes(&xs, &gs, &k, &ksd_schedule(100, 3162)).unwrap();
    let slope = ksd_slope(&pts).unwrap();
    assert!((slope + 0.5).abs() < 0.15, "slope {slope}");
}

#[test]
fn batch_means_iid_and_ar1_oracles() {
    let mut rng = seeded(6, 0);
    let h = 0.01;
    let n = 2_000_000;
    let iid: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let avar = batch_means_avar(&iid, h, 20).unwrap();
    // 20 batches: relative SE sqrt(2/19) ≈ 0.32; allow 3 SE.
    assert!((avar / h - 1.0).abs() < 1.0, "iid {avar}");

    for rho in [0.5f64, 0.9] {
        let mut x = 0.0;
        let sd = (1.0 - rho * rho).sqrt();
        let mut avars = Vec::new();
        for rep in 0..20 {
            let mut r = seeded(100 + rep, 0);
            let tr: Vec<f64> = (0..200_000)
                .map(|_| {
                    x = rho * x + sd * r.sample::<f64, _>(StandardNormal);
                    x
                })
                .collect();
            avars.push(batch_means_avar(&tr, h, 20).unwrap() / h);
        }
        let (m, s) = mean_std(&avars);
        let exact = (1.0 + rho) / (1.0 - rho);
        let se = s / (avars.len() as f64).sqrt();
        assert!(
            (m - exact).abs() < 3.0 * se + 0.05 * exact,
            "rho {rho}: {m} vs {exact}"
        );
    }
}

#[test]
fn batch_means_errors() {
    assert!(batch_means_avar(&[1.0; 39], 0.1, 20).is_err());
    assert!(batch_means_avar(&[1.0; 100], 0.1, 1).is_err());
    assert_eq!(batch_means_avar(&[3.0; 100], 0.1, 20).unwrap(), 0.0);
}

#[test]
fn ensemble_needs_two_chains() {
    assert_eq!(
        ensemble_stats(&[1.0], 0.0, 1.0),
        Err(Error::InsufficientChains { needed: 2, got: 1 })
    );
}

#[test]
fn imq_derivatives_match_finite_differences() {
    let k = Imq::new(1.5, -0.7).unwrap();
    let x = v(&[0.3, -1.2]);
    let y = v(&[1.0, 0.4]);
    let e = 1e-5;
    for j in 0..2 {
        let mut xp = x.clone();
        xp[j] += e;
        let mut xm = x.clone();
        xm[j] -= e;
        let fd = (k.value(&xp, &y) - k.value(&xm, &y)) / (2.0 * e);
        assert!((fd - k.grad_x(j, &x, &y)).abs() < 1e-9);
        let mut yp = y.clone();
        yp[j] += e;
        let mut ym = y.clone();
        ym[j] -= e;
        let fd2 = (k.grad_x(j, &x, &yp) - k.grad_x(j, &x, &ym)) / (2.0 * e);
        assert!((fd2 - k.cross(j, &x, &y)).abs() < 1e-8);
    }
    assert!(Imq::new(0.0, -0.5).is_err());
    assert!(Imq::new(1.0, 0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ksd_is_permutation_invariant(seed in 0u64..1000, perm_seed in 0u64..1000) {
        let k = Imq::default();
        let xs = normal_samples(seed, 25, 2);
        let gs: Vec<Vector> = xs.iter().map(gaussian_grad).collect();
        let mut idx: Vec<usize> = (0..25).collect();
        let mut r = seeded(perm_seed, 1);
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut r);
        let xs2: Vec<Vector> = idx.iter().map(|&i| xs[i].clone()).collect();
        let gs2: Vec<Vector> = idx.iter().map(|&i| gs[i].clone()).collect();
        let a = ksd(&xs, &gs, &k).unwrap();
        let b = ksd(&xs2, &gs2, &k).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a));
    }

    #[test]
    fn batch_means_is_shift_invariant(trace in prop::collection::vec(-10.0f64..10.0, 40..400), c in -1e3f64..1e3) {
        let a = batch_means_avar(&trace, 0.01, 20).unwrap();
        let shifted: Vec<f64> = trace.iter().map(|x| x + c).collect();
        let b = batch_means_avar(&shifted, 0.01, 20).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn mse_is_bias_squared_plus_variance(finals in prop::collection::vec(-10.0f64..10.0, 2..50), r in -5.0f64..5.0, t in 0.1f64..100.0) {
        let s = ensemble_stats(&finals, r, t).unwrap();
        prop_assert!((s.mse - (s.bias * s.bias + s.variance)).abs() < 1e-12 * (1.0 + s.mse));
        prop_assert!((s.asymptotic_variance - t * s.variance).abs() < 1e-12 * (1.0 + s.asymptotic_variance));
        prop_assert!(s.variance >= 0.0);
    }

    #[test]
    fn running_average_ends_at_mean(trace in prop::collection::vec(-10.0f64..10.0, 1..200)) {
        let ra = running_average(&trace).unwrap();
        let mean = trace.iter().sum::<f64>() / trace.len() as f64;
        prop_assert!((ra.last().unwrap() - mean).abs() < 1e-12);
        prop_assert!((ra[0] - trace[0]).abs() == 0.0);
    }

    #[test]
    fn slope_recovers_power_laws(c in 0.01f64..100.0, p in -2.0f64..1.0) {
        let pts: Vec<(usize, f64)> = ksd_schedule(100, 100_000).into_iter().map(|k| (k, c * (k as f64).powf(p))).collect();
        prop_assert!((ksd_slope(&pts).unwrap() - p).abs() < 1e-3);
    }
}
