use ndarray::{Array1, Array2};

use super::{check_column_stochastic, check_simplex, SIMPLEX_TOL};
use crate::error::{Error, Result};

/// Both parameterizations of the noise mechanism with their marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseMatrices {
    /// `t[[l, k]] = P(noisy = l | true = k)`, columns sum to 1.
    pub t: Array2<f64>,
    /// `m[[l, k]] = P(true = k | noisy = l)`, rows sum to 1.
    pub m: Array2<f64>,
    pub w: Array1<f64>,
    pub w_tilde: Array1<f64>,
}

/// Noisy marginal and confusion matrix implied by `(T, w)`.
pub fn complete_noise_matrices(t: &Array2<f64>, w: &Array1<f64>) -> Result<NoiseMatrices> {
    let k = w.len();
    if t.dim() != (k, k) {
        return Err(Error::Dimension(format!("T is {:?}, w has {k} entries", t.dim())));
    }
    check_column_stochastic(t)?;
    check_simplex(w.view(), "w")?;
    let w_tilde = t.dot(w);
    if let Some(l) = w_tilde.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateNoisyClass(l));
    }
    let m = Array2::from_shape_fn((k, k), |(l, j)| t[[l, j]] * w[j] / w_tilde[l]);
    Ok(NoiseMatrices {
        t: t.clone(),
        m,
        w: w.clone(),
        w_tilde,
    })
}

impl NoiseMatrices {
    /// Reverse construction from `(M, w̃)`: `w_k = Σ_l M_lk w̃_l`, `T_lk = w̃_l M_lk / w_k`.
    pub fn from_confusion(m: &Array2<f64>, w_tilde: &Array1<f64>) -> Result<Self> {
        let k = w_tilde.len();
        if m.dim() != (k, k) {
            return Err(Error::Dimension(format!("M is {:?}, w̃ has {k} entries", m.dim())));
        }
        check_simplex(w_tilde.view(), "w_tilde")?;
        for (l, row) in m.rows().into_iter().enumerate() {
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (row.sum() - 1.0).abs() > SIMPLEX_TOL
            {
                return Err(Error::invalid(format!("row {l} of M is not a probability vector")));
            }
        }
        let w = m.t().dot(w_tilde);
        if let Some(j) = w.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::ZeroClassProportion(j));
        }
        let t = Array2::from_shape_fn((k, k), |(l, j)| w_tilde[l] * m[[l, j]] / w[j]);
        Ok(NoiseMatrices {
            t,
            m: m.clone(),
            w,
            w_tilde: w_tilde.clone(),
        })
    }

    /// Probability that a sample with noisy label `l` truly belongs to `l`.
    pub fn m_diag(&self, l: usize) -> f64 {
        self.m[[l, l]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn identity_noise() {
        let nm = complete_noise_matrices(&Array2::eye(2), &array![0.3, 0.7]).unwrap();
        assert_eq!(nm.w_tilde, array![0.3, 0.7]);
        assert_eq!(nm.m, Array2::<f64>::eye(2));
    }

    #[test]
    fn symmetric_flip_against_joint_table() {
        let t = array![[0.9, 0.1], [0.1, 0.9]];
        let w = array![0.5, 0.5];
        let nm = complete_noise_matrices(&t, &w).unwrap();
        // joint P(noisy = l, true = k) tabulated directly
        let joint = Array2::from_shape_fn((2, 2), |(l, k)| t[[l, k]] * w[k]);
        for l in 0..2 {
            let row = joint.row(l).sum();
            assert!((nm.w_tilde[l] - row).abs() < 1e-15);
            for k in 0..2 {
                assert!((nm.m[[l, k]] - joint[[l, k]] / row).abs() < 1e-15);
            }
        }
        assert!((nm.m[[0, 0]] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn degenerate_noisy_class() {
        let err = complete_noise_matrices(&Array2::eye(2), &array![1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateNoisyClass(1)));
    }

    fn column_stochastic(raw: &[f64], k: usize) -> Array2<f64> {
        let mut t = Array2::from_shape_vec((k, k), raw.to_vec()).unwrap();
        for mut c in t.columns_mut() {
            let s = c.sum();
            c /= s;
        }
        t
    }

    proptest! {
        #[test]
        fn links_and_involution(
            raw in prop::collection::vec(0.01f64..1.0, 9),
            wr in prop::collection::vec(0.01f64..1.0, 3),
        ) {
            let t = column_stochastic(&raw, 3);
            let w = Array1::from(wr.clone()) / wr.iter().sum::<f64>();
            let nm = complete_noise_matrices(&t, &w).unwrap();
            let w_back = nm.m.t().dot(&nm.w_tilde);
            for k in 0..3 {
                prop_assert!((w_back[k] - w[k]).abs() < 1e-10);
                prop_assert!((nm.m.row(k).sum() - 1.0).abs() < 1e-10);
            }
            let rev = NoiseMatrices::from_confusion(&nm.m, &nm.w_tilde).unwrap();
            for (a, b) in rev.t.iter().zip(t.iter()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in rev.w.iter().zip(w.iter()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
