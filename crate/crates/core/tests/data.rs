use langevin_core::data::{
    condition_number, gen_gaussian_dataset, gen_ica_sources, gen_logistic_dataset, parse_delimited,
    random_precision, random_rotation, sample_laplace, sample_sech2, standardize_columns,
    DelimitedSchema, MAX_MIXING_CONDITION,
};
use langevin_core::rng::seeded;
use langevin_core::{Error, Matrix, Vector};
use proptest::prelude::*;

#[test]
fn gaussian_dataset_moments() {
    let mean = Vector::from_column_slice(&[1.0, -2.0, 0.5]);
    let precision = random_precision(3, &[4.0, 1.0, 0.25]).unwrap();
    let n = 100_000;
    let data = gen_gaussian_dataset(7, n, &mean, &precision).unwrap();
    assert_eq!(data.len(), n);
    let cov = precision.clone().try_inverse().unwrap();
    let m = data.rows.iter().fold(Vector::zeros(3), |a, x| a + x) / n as f64;
    for i in 0..3 {
        let se = (cov[(i, i)] / n as f64).sqrt();
        assert!((m[i] - mean[i]).abs() < 3.0 * se, "coordinate {i}");
    }
    let emp = data.rows.iter().fold(Matrix::zeros(3, 3), |a, x| {
        a + (x - &m) * (x - &m).transpose()
    }) / n as f64;
    let emp_precision = emp.try_inverse().unwrap();
    assert!((&emp_precision - &precision).norm() / precision.norm() < 0.05);
    let again = gen_gaussian_dataset(7, n, &mean, &precision).unwrap();
    assert_eq!(again.rows, data.rows);
    assert!(gen_gaussian_dataset(7, 10, &mean, &(-precision)).is_err());
}

#[test]
fn sech2_sampler_passes_ks() {
    let mut rng = seeded(1, 0);
    let n = 100_000;
    let mut xs: Vec<f64> = (0..n).map(|_| sample_sech2(&mut rng)).collect();
    xs.sort_by(f64::total_cmp);
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 / (1.0 + (-x).exp());
            (f - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS statistic {ks}");
}

#[test]
fn laplace_sampler_moments() {
    let mut rng = seeded(2, 0);
    let n = 200_000;
    let xs: Vec<f64> = (0..n).map(|_| sample_laplace(&mut rng)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    // Var of the sample variance for Laplace(1) is (24 − 4)/n.
    assert!(
        (var - 2.0).abs() < 3.0 * (20.0 / n as f64).sqrt(),
        "variance {var}"
    );
    let mad = xs.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
    assert!((mad - 1.0).abs() < 0.01);
}

#[test]
fn ica_sources_are_independent_and_mixed_exactly() {
    let s = gen_ica_sources(4, 3, 100_000).unwrap();
    assert!(condition_number(&s.mixing) < MAX_MIXING_CONDITION);
    assert_eq!(s.mixed, &s.mixing * &s.sources);
    let n = s.sources.ncols() as f64;
    for i in 0..3 {
        for j in (i + 1)..3 {
            let (a, b) = (s.sources.row(i), s.sources.row(j));
            let (ma, mb) = (a.mean(), b.mean());
            let cov = a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / n;
            let corr = cov / (a.variance() * b.variance()).sqrt();
            assert!(corr.abs() < 0.02, "sources {i},{j}: {corr}");
        }
    }
    let cols = s.mixed_columns();
    assert_eq!(cols.len(), 100_000);
    assert_eq!(cols[5], Vector::from(s.mixed.column(5)));
}

#[test]
fn logistic_dataset_is_consistent() {
    let (data, w) = gen_logistic_dataset(5, 400, 5, true).unwrap();
    assert_eq!(data.dim(), 5);
    assert_eq!(w.len(), 5);
    let labels = data.labels.as_ref().unwrap();
    assert!(labels.iter().all(|&y| y == 0.0 || y == 1.0));
    assert!(data.rows.iter().all(|x| x[0] == 1.0));
    let frac = labels.iter().sum::<f64>() / 400.0;
    assert!(frac > 0.05 && frac < 0.95);
}

#[test]
fn rotation_is_orthogonal() {
    let q = random_rotation(8, 6);
    assert!((q.transpose() * &q - Matrix::identity(6, 6)).amax() < 1e-12);
    let p = random_precision(8, &[3.0, 2.0, 1.0]).unwrap();
    let mut ev: Vec<f64> = p.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[2] - 3.0).abs() < 1e-12);
}

#[test]
fn parses_toy_file_exactly() {
    let text = "# comment\n1.5, 2, 0\n\n-3, 4.25, 1\n";
    let schema = DelimitedSchema {
        label_column: 2,
        standardize: false,
        ..DelimitedSchema::default()
    };
    let d = parse_delimited(text, &schema, "toy").unwrap();
    assert_eq!(
        d.rows,
        vec![
            Vector::from_column_slice(&[1.5, 2.0]),
            Vector::from_column_slice(&[-3.0, 4.25])
        ]
    );
    assert_eq!(d.labels.unwrap(), vec![0.0, 1.0]);
}

#[test]
fn german_style_labels_and_standardisation() {
    // Whitespace separated, label 1/2 in the last column.
    let mut text = String::new();
    for i in 0..50 {
        let row: Vec<String> = (0..4).map(|j| format!("{}", (i * (j + 3)) % 11)).collect();
        text.push_str(&format!("{} {}\n", row.join(" "), 1 + i % 2));
    }
    let schema = DelimitedSchema {
        label_column: 4,
        intercept: true,
        max_rows: Some(40),
        ..DelimitedSchema::default()
    };
    let d = parse_delimited(&text, &schema, "german-like").unwrap();
    assert_eq!(d.len(), 40);
    assert_eq!(d.dim(), 5);
    for j in 1..5 {
        let col: Vec<f64> = d.rows.iter().map(|x| x[j]).collect();
        let m = col.iter().sum::<f64>() / 40.0;
        let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 40.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
    }
    assert!(d.rows.iter().all(|x| x[0] == 1.0));
    assert!(d.labels.unwrap().iter().all(|&y| y == 0.0 || y == 1.0));
}

#[test]
fn parse_errors_carry_position() {
    let schema = DelimitedSchema::default();
    match parse_delimited("1,2,0\n3,x,1\n", &schema, "bad") {
        Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 2)),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        parse_delimited("1,2,0\n3,1\n", &schema, "bad"),
        Err(Error::Parse { line: 2, .. })
    ));
}

proptest! {
    #[test]
    fn standardised_columns_have_unit_moments(rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 3..60)) {
        let mut rows: Vec<Vector> = rows.into_iter().map(Vector::from_vec).collect();
        let n = rows.len() as f64;
        let spread: Vec<f64> = (0..3).map(|j| {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n
        }).collect();
        prop_assume!(spread.iter().all(|&v| v > 1e-6));
        standardize_columns(&mut rows, &[]);
        for j in 0..3 {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let v = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            prop_assert!(m.abs() < 1e-12);
            prop_assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generators_are_deterministic(seed in 0u64..500) {
        let a = gen_ica_sources(seed, 3, 50).unwrap();
        let b = gen_ica_sources(seed, 3, 50).unwrap();
        prop_assert_eq!(a.mixed, b.mixed);
        let (x, w) = gen_logistic_dataset(seed, 20, 3, false).unwrap();
        let (y, v) = gen_logistic_dataset(seed, 20, 3, false).unwrap();
        prop_assert_eq!(x.rows, y.rows);
        prop_assert_eq!(w, v);
    }
}
