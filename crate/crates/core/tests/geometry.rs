mod common;

use common::*;
use langevin_core::geometry::{
    giirr_matrix, irr_flux_divergence_fd, matrix_divergence_fd, metric_factor, sample_points,
    skew_fixed_pattern, skew_random_unit, validate_divergences, IrrField, MetricBundle, SkewMatrix,
};
use langevin_core::target::{ica_kronecker_skew, TargetModel};
use langevin_core::{Matrix, Vector};
use proptest::prelude::*;

const EPS: f64 = 1e-5;

/// Largest singular value by power iteration on `AᵀA`.
fn power_norm(a: &Matrix) -> f64 {
    let ata = a.transpose() * a;
    let mut v = Vector::from_fn(a.ncols(), |i, _| 1.0 + 0.01 * i as f64);
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let w = &ata * &v;
        lambda = w.norm() / v.norm();
        v = w.normalize();
    }
    lambda.sqrt()
}

#[test]
fn random_unit_skew_has_unit_spectral_norm() {
    for seed in 0..5 {
        let j = skew_random_unit(seed, 20).unwrap();
        let m = j.matrix();
        assert_eq!((m + m.transpose()).amax(), 0.0);
        assert!((power_norm(m) - 1.0).abs() < 1e-8);
    }
}

#[test]
fn fixed_pattern_scales_with_delta() {
    let one = skew_fixed_pattern(1.0, 5).unwrap();
    let three = skew_fixed_pattern(3.0, 5).unwrap();
    assert!((one.matrix() * 3.0 - three.matrix()).amax() < 1e-15);
    assert_eq!(three.delta(), 3.0);
}

fn check_bundle(name: &str, bundle: &dyn MetricBundle, points: &[Vector], skew: &SkewMatrix) {
    // Central differences carry O(eps²) truncation error.
    let check = validate_divergences(bundle, points, Some(skew), EPS, 1.0).unwrap();
    assert!(
        check.div_metric_error < 10.0 * EPS * EPS && check.div_giirr_error < 10.0 * EPS * EPS,
        "{name}: {check:?}"
    );
}

#[test]
fn analytic_divergences_match_finite_differences() {
    let np = normal_params(30);
    let pts: Vec<Vector> = (0..100).map(|s| interior_point(&np, s)).collect();
    check_bundle(
        "normal_params",
        &np,
        &pts,
        &skew_fixed_pattern(2.0, 2).unwrap(),
    );

    let lr = logistic(40, 4);
    let pts = sample_points(&Vector::zeros(4), 2.0, 100, 1);
    check_bundle("logistic", &lr, &pts, &skew_random_unit(3, 4).unwrap());

    let ic = ica(40);
    let pts: Vec<Vector> = (0..100).map(|s| interior_point(&ic, s)).collect();
    check_bundle("ica", &ic, &pts, &ica_kronecker_skew(3, 1.0).unwrap());
    check_bundle("ica-random", &ic, &pts, &skew_random_unit(8, 9).unwrap());
}

#[test]
fn giirr_field_is_skew_and_reduces_at_identity() {
    let j = skew_random_unit(4, 6).unwrap();
    let c = giirr_matrix(&Matrix::identity(6, 6), &j).unwrap();
    assert_eq!(c, j.matrix().clone());
    let lr = logistic(40, 6);
    for w in sample_points(&Vector::zeros(6), 1.5, 20, 2) {
        let c = IrrField::new(&lr, &j).c(&w).unwrap();
        assert!((&c + c.transpose()).amax() < 1e-14);
    }
}

/// `∇·(γπ)` relative to `‖γπ‖`, both scaled by `π` at the point.
fn flux_residuals(
    t: &dyn TargetModel,
    bundle: &dyn MetricBundle,
    skew: &SkewMatrix,
    points: &[Vector],
) -> f64 {
    let field = IrrField::new(bundle, skew);
    points
        .iter()
        .map(|p| {
            let (div, size) = irr_flux_divergence_fd(
                |x| t.log_density(x),
                |x| t.grad_log(x, None),
                |x| field.c(x),
                |x| field.div_c(x),
                p,
                EPS,
            )
            .unwrap();
            (div / size).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn giirr_perturbation_preserves_the_target() {
    let np = normal_params(30);
    let pts: Vec<Vector> = (0..100).map(|s| interior_point(&np, s)).collect();
    let r = flux_residuals(&np, &np, &skew_fixed_pattern(2.0, 2).unwrap(), &pts);
    assert!(r < 1e-4, "normal params residual {r:e}");

    let lr = logistic(40, 3);
    let pts = sample_points(&Vector::zeros(3), 1.0, 50, 5);
    let r = flux_residuals(&lr, &lr, &skew_random_unit(2, 3).unwrap(), &pts);
    assert!(r < 1e-4, "logistic residual {r:e}");
}

#[test]
fn dropping_the_correction_breaks_invariance() {
    // Same flux check without ∇·C must fail for a non-constant metric.
    let np = normal_params(30);
    let j = skew_fixed_pattern(2.0, 2).unwrap();
    let field = IrrField::new(&np, &j);
    let p = interior_point(&np, 7);
    let (div, _) = irr_flux_divergence_fd(
        |x| np.log_density(x),
        |x| np.grad_log(x, None),
        |x| field.c(x),
        |x| Ok(Vector::zeros(x.len())),
        &p,
        EPS,
    )
    .unwrap();
    assert!(div.abs() > 1e-3, "residual {div:e} should be visible");
}

#[test]
fn fd_divergence_of_linear_field() {
    // M(θ)_ij = θ_j a_ij, so (∇·M)_i = Σ_j a_ij.
    let a = Matrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
    let theta = Vector::from_column_slice(&[0.3, -0.2, 0.5]);
    let div = matrix_divergence_fd(
        |t| Ok(Matrix::from_fn(3, 3, |i, j| t[j] * a[(i, j)])),
        &theta,
        EPS,
    )
    .unwrap();
    let expected = Vector::from_fn(3, |i, _| (0..3).map(|j| a[(i, j)]).sum());
    assert!((div - expected).amax() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_factor_reconstructs(entries in prop::collection::vec(-1.0f64..1.0, 16), beta in 0.1f64..2.0) {
        let m = Matrix::from_vec(4, 4, entries);
        let b = &m * m.transpose() + Matrix::identity(4, 4) * 0.1;
        let s = metric_factor(&b, beta).unwrap();
        prop_assert!((&s * s.transpose() - b * (2.0 * beta)).amax() < 1e-12);
    }

    #[test]
    fn giirr_matrix_is_skew(entries in prop::collection::vec(-1.0f64..1.0, 25), seed in 0u64..1000) {
        let m = Matrix::from_vec(5, 5, entries);
        let b = &m * m.transpose() + Matrix::identity(5, 5);
        let j = skew_random_unit(seed, 5).unwrap();
        let c = giirr_matrix(&b, &j).unwrap();
        prop_assert!((&c + c.transpose()).amax() < 1e-14);
        let direct = (j.matrix() * &b + &b * j.matrix()) * 0.5;
        prop_assert!((c - direct).amax() < 1e-14);
    }

    #[test]
    fn sqrt_factors_reconstruct_metric(mu in -20.0f64..20.0, sigma in 1.0f64..30.0, beta in 0.1f64..2.0) {
        let np = normal_params(30);
        let x = Vector::from_column_slice(&[mu, sigma]);
        let s = np.sqrt_factor(&x, beta).unwrap();
        prop_assert!((&s * s.transpose() - np.metric(&x).unwrap() * (2.0 * beta)).amax() < 1e-9 * sigma * sigma);
    }
}

#[test]
fn ica_sqrt_factor_reconstructs_metric() {
    let ic = ica(40);
    for s in 0..20 {
        let p = interior_point(&ic, s);
        let f = ic.sqrt_factor(&p, 0.5).unwrap();
        assert!((&f * f.transpose() - ic.metric(&p).unwrap()).amax() < 1e-12);
    }
}
