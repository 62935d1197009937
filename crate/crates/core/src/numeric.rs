//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1};

/// `log Σ exp(v)` with max-subtraction.
pub fn log_sum_exp(v: ArrayView1<f64>) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// In-place softmax with max-subtraction.
pub fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

pub(crate) fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Solves `A x = b` for symmetric positive definite `A`; `None` if the factorization fails.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let chol = to_dmatrix(a).cholesky()?;
    let x = chol.solve(&DVector::from_iterator(b.len(), b.iter().copied()));
    if x.iter().all(|v| v.is_finite()) {
        Some(Array1::from_iter(x.iter().copied()))
    } else {
        None
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(a: &Array2<f64>) -> Option<Array2<f64>> {
    let l = to_dmatrix(a).cholesky()?.unpack();
    Some(Array2::from_shape_fn((l.nrows(), l.ncols()), |(i, j)| l[(i, j)]))
}

/// Inverse of a symmetric positive definite matrix.
pub fn inverse_spd(a: &Array2<f64>) -> Option<Array2<f64>> {
    let inv = to_dmatrix(a).cholesky()?.inverse();
    Some(Array2::from_shape_fn((inv.nrows(), inv.ncols()), |(i, j)| inv[(i, j)]))
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n − 1 denominator); zero for fewer than two values.
pub fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn log_sum_exp_is_stable() {
        let v = array![1000.0, 1000.0];
        assert!((log_sum_exp(v.view()) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let mut s = [1000.0, 1000.0 + 3f64.ln()];
        softmax_in_place(&mut s);
        assert!((s[0] - 0.25).abs() < 1e-12 && (s[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn spd_solve_and_inverse() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let x = solve_spd(&a, &array![1.0, 2.0]).unwrap();
        assert!((a.dot(&x) - array![1.0, 2.0]).iter().all(|r| r.abs() < 1e-12));
        let inv = inverse_spd(&a).unwrap();
        let id = a.dot(&inv);
        assert!((id[[0, 0]] - 1.0).abs() < 1e-12 && id[[0, 1]].abs() < 1e-12);
        assert!(solve_spd(&array![[1.0, 2.0], [2.0, 1.0]], &array![1.0, 1.0]).is_none());
    }
}
