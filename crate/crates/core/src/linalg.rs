//! Dense symmetric solves backed by `faer`.

use faer::linalg::solvers::{Llt, PartialPivLu};
use faer::prelude::*;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Cholesky when the matrix is positive definite, partial-pivot LU otherwise.
pub(crate) enum Factor {
    Cholesky(Llt<f64>),
    Lu(PartialPivLu<f64>),
}

impl Factor {
    pub(crate) fn new(a: MatRef<'_, f64>) -> Self {
        match a.llt(Side::Lower) {
            Ok(llt) => Factor::Cholesky(llt),
            Err(_) => Factor::Lu(a.partial_piv_lu()),
        }
    }

    pub(crate) fn is_cholesky(&self) -> bool {
        matches!(self, Factor::Cholesky(_))
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = match self {
            Factor::Cholesky(f) => f.solve(&b),
            Factor::Lu(f) => f.solve(&b),
        };
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

fn residual_ok(a: MatRef<'_, f64>, x: &[f64], rhs: &[f64]) -> bool {
    let n = x.len();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = rhs.iter().fold(0.0, |m, v| m.max(v.abs()));
    let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        let mut s = 0.0;
        let mut row_abs = 0.0;
        for j in 0..n {
            s += a[(i, j)] * x[j];
            row_abs += a[(i, j)].abs();
        }
        worst = worst.max((s - rhs[i]).abs());
        scale = scale.max(row_abs * xmax);
    }
    x.iter().all(|v| v.is_finite()) && worst <= 1e-8 * scale.max(f64::MIN_POSITIVE)
}

/// Solves `A x = b` for each right-hand side with one factorization, and
/// rejects numerically singular systems.
pub(crate) fn solve_many(a: MatRef<'_, f64>, rhs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let f = Factor::new(a);
    let mut out = Vec::with_capacity(rhs.len());
    for b in rhs {
        let x = f.solve(b);
        if !residual_ok(a, &x, b) {
            return Err(Error::Singular(
                "linear system is numerically singular".into(),
            ));
        }
        out.push(x);
    }
    Ok(out)
}

/// Minimizer of `xᵀ A x` subject to `Σ x = 1`, for `A` conditionally
/// positive definite. Returns `(x, λ)` with `A x = λ 1` and `λ = xᵀ A x`.
pub(crate) fn simplex_plane_minimizer(a: MatRef<'_, f64>) -> Result<(Vec<f64>, f64)> {
    let n = a.nrows();
    let ones = vec![1.0; n];
    let f = Factor::new(a);
    if f.is_cholesky() {
        let y = f.solve(&ones);
        let s: f64 = y.iter().sum();
        if s > 0.0 && y.iter().all(|v| v.is_finite()) {
            let x: Vec<f64> = y.iter().map(|v| v / s).collect();
            return Ok((x, 1.0 / s));
        }
    }
    // Bordered saddle-point system [A 1; 1ᵀ 0] [x; -λ] = [0; 1].
    let b = Mat::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) => a[(i, j)],
        (false, false) => 0.0,
        _ => 1.0,
    });
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    let sol = solve_many(b.as_ref(), &[&rhs])?.remove(0);
    let lambda = -sol[n];
    Ok((sol[..n].to_vec(), lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_minimizer_on_indefinite_matrix() {
        // -log type matrix: indefinite but conditionally positive definite
        let a = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        let (x, l) = simplex_plane_minimizer(a.as_ref()).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-14 && (x[1] - 0.5).abs() < 1e-14);
        assert!((l - 1.5).abs() < 1e-14);
    }

    #[test]
    fn singular_system_rejected() {
        let a = Mat::from_fn(3, 3, |_, _| 1.0);
        assert!(matches!(
            solve_many(a.as_ref(), &[&[1.0, 0.0, 0.0]]),
            Err(Error::Singular(_))
        ));
    }
}
