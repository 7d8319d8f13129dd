//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn threshold(s: &[f64], tol_rel: f64, abs_floor: f64) -> f64 {
    let top = s.first().copied().unwrap_or(0.0);
    (tol_rel * top).max(abs_floor)
}

/// Number of singular values at or above `max(tol_rel·σ_max, abs_floor)`.
/// A zero matrix has rank 0.
pub fn numerical_rank(m: &DMatrix<f64>, tol_rel: f64, abs_floor: f64) -> usize {
    let s = singular_values(m);
    if s.first().is_none_or(|v| *v == 0.0) {
        return 0;
    }
    let t = threshold(&s, tol_rel, abs_floor);
    s.iter().filter(|v| **v >= t && **v > 0.0).count()
}

/// Rank of an antisymmetric matrix. Singular values of such a matrix come in
/// equal pairs, so an odd count means the threshold split a pair and the
/// partner is counted too.
pub fn antisymmetric_rank(m: &DMatrix<f64>, tol_rel: f64, abs_floor: f64) -> usize {
    let r = numerical_rank(m, tol_rel, abs_floor);
    if r % 2 == 1 {
        (r + 1).min(m.nrows())
    } else {
        r
    }
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn column_basis(m: &DMatrix<f64>, tol_rel: f64, abs_floor: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 || m.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let s = &svd.singular_values;
    let mut sorted: Vec<f64> = s.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted[0] == 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let t = threshold(&sorted, tol_rel, abs_floor);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= t && s[i] > 0.0).collect();
    DMatrix::from_fn(n, keep.len(), |r, c| u[(r, keep[c])])
}

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal bases of equal dimension, computed from sines so that small
/// angles are resolved accurately.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    if b.ncols() == 0 {
        return Vec::new();
    }
    let residual = b - a * (a.transpose() * b);
    let mut s: Vec<f64> = singular_values(&residual)
        .into_iter()
        .map(|v| v.min(1.0).asin())
        .collect();
    s.sort_by(|x, y| x.total_cmp(y));
    s
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Least-squares solution of `a x ≈ b`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-14 * svd.singular_values.max()).expect("U and V were computed")
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
