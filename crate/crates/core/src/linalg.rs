//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Residual accepted for `M * M^-1 - I` in the max-abs norm.
pub const INVERSE_RESIDUAL: f64 = 1e-10;

pub fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

/// Singular values in descending order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 1 && m.ncols() == 1 {
        return vec![m[(0, 0)].abs()];
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Operator 2-norm.
pub fn norm2(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn sigma_min(m: &Matrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Condition number measured against the unit scale of `I`:
/// `max(σ_max, 1) / σ_min`. Unlike the plain ratio this flags a 1×1 matrix
/// that has collapsed to rounding noise.
pub fn unit_condition(m: &Matrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi.max(1.0) / lo,
        _ => f64::INFINITY,
    }
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Inverse via LU with partial pivoting. Returns `None` when the
/// factorisation fails or the residual `M * M^-1 - I` exceeds `INVERSE_RESIDUAL`.
pub fn checked_inverse(m: &Matrix) -> Option<Matrix> {
    let n = m.nrows();
    let inv = m.clone().lu().try_inverse()?;
    if inv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let residual = max_abs(&(m * &inv - identity(n)));
    (residual <= INVERSE_RESIDUAL).then_some(inv)
}

/// Matrix exponential (Padé scaling and squaring).
pub fn expm(m: &Matrix) -> Matrix {
    if m.nrows() == 1 {
        return Matrix::from_element(1, 1, m[(0, 0)].exp());
    }
    m.exp()
}

pub fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}
