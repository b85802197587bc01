//! Small dense linear-algebra helpers on top of `nalgebra`.

use alloc::format;
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Matrix, Result, Vector};

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = a`.
///
/// Unlike `nalgebra::Cholesky` this reports the first pivot that is not
/// strictly positive, which is what callers print when a metric breaks down.
pub fn cholesky_lower(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "cholesky of a {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let l = cholesky_lower(a)?;
    let n = a.nrows();
    let mut inv = Matrix::identity(n, n);
    for col in 0..n {
        let mut x = inv.column(col).clone_owned();
        forward_substitute(&l, &mut x);
        backward_substitute_transpose(&l, &mut x);
        inv.set_column(col, &x);
    }
    // Symmetrise away the round-off of the two triangular solves.
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: &Matrix, b: &Vector) -> Result<Vector> {
    let l = cholesky_lower(a)?;
    let mut x = b.clone();
    forward_substitute(&l, &mut x);
    backward_substitute_transpose(&l, &mut x);
    Ok(x)
}

fn forward_substitute(l: &Matrix, x: &mut Vector) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
}

fn backward_substitute_transpose(l: &Matrix, x: &mut Vector) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
}

/// Largest absolute entry of `a - aᵀ`.
pub fn asymmetry(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Largest absolute entry.
pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Spectral norm, from the largest eigenvalue of `aᵀa`.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.ncols() == 0 {
        return 0.0;
    }
    let ata = a.transpose() * a;
    let top = ata
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |m, &v| m.max(v));
    top.sqrt()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Matrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Determinant and inverse through LU; `None` when the matrix is singular.
pub fn lu_inverse(a: &Matrix) -> Option<(f64, Matrix)> {
    let lu = a.clone().lu();
    let det = lu.determinant();
    let inv = lu.try_inverse()?;
    Some((det, inv))
}

/// Solves `Σ = AΣAᵀ + Q` through `(I − A⊗A) vec Σ = vec Q`; the stationary
/// covariance of `x' = Ax + ε` with `Cov ε = Q`. Sized for small `d`.
pub fn discrete_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let d = a.nrows();
    if a.shape() != (d, d) || q.shape() != (d, d) {
        return Err(Error::Dimension(
            "discrete Lyapunov needs square matrices of one size".into(),
        ));
    }
    let system = Matrix::identity(d * d, d * d) - kron(a, a);
    let rhs = Vector::from_column_slice(q.as_slice());
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("I − A⊗A (spectral radius of A reaches 1)".into()))?;
    let s = Matrix::from_column_slice(d, d, sol.as_slice());
    Ok((&s + s.transpose()) * 0.5)
}
