//! Noise-adjusted Neyman–Pearson umbrella classifier.
//!
//! Calibration scores `T_(1) ≤ … ≤ T_(m)` from noisy class 0 are candidate
//! thresholds; `k* = min{k : α_{k,δ} − D̂⁺(T_(k)) ≤ α}` where
//! `1 − α_{k,δ}` solves `P(Bin(m, ·) ≥ k) = δ`.

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::function::beta::beta_reg;

use crate::em::{em_fit, EmConfig, ResponsibilityMatrix};
use crate::error::{Error, Result};
use crate::model::{complete_noise_matrices, Dataset, ModelParams, PosteriorModel};
use crate::wml::{design_matrix, wml_fit, WmlConfig, WmlProblem};

/// `P(Bin(m, a) ≥ k)` via the regularized incomplete beta function.
pub fn binomial_survival(k: usize, m: usize, a: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > m {
        return 0.0;
    }
    if a <= 0.0 {
        return 0.0;
    }
    if a >= 1.0 {
        return 1.0;
    }
    beta_reg(k as f64, (m - k + 1) as f64, a)
}

/// The `a ∈ (0, 1)` with `P(Bin(m, a) ≥ k) = δ`.
pub fn binomial_alpha(k: usize, m: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta = {delta} outside (0, 1)")));
    }
    if k == 0 || k > m {
        return Err(Error::invalid(format!("need 1 ≤ k ≤ m, got k = {k}, m = {m}")));
    }
    let mf = m as f64;
    if k == m {
        return Ok(delta.powf(1.0 / mf));
    }
    if k == 1 {
        return Ok(1.0 - (1.0 - delta).powf(1.0 / mf));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if binomial_survival(k, m, mid) < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn ecdf(sorted: &[f64], t: f64) -> f64 {
    sorted.partition_point(|&v| v <= t) as f64 / sorted.len() as f64
}

/// `D̂(t) = (1 − m0)/(m0 − m1) · (F̂₀(t) − F̂₁(t))`, unclipped.
pub fn d_hat(t: f64, est0: &[f64], est1: &[f64], m0: f64, m1: f64) -> f64 {
    let mut a = est0.to_vec();
    let mut b = est1.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    d_hat_sorted(t, &a, &b, m0, m1)
}

fn d_hat_sorted(t: f64, est0: &[f64], est1: &[f64], m0: f64, m1: f64) -> f64 {
    (1.0 - m0) / (m0 - m1) * (ecdf(est0, t) - ecdf(est1, t))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Corruption {
    Known { m0: f64, m1: f64 },
    Estimated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UmbrellaConfig {
    pub alpha: f64,
    pub delta: f64,
    /// Noisy class 0 into (train, est, cal).
    pub splits0: [f64; 3],
    /// Noisy class 1 into (train, est).
    pub splits1: [f64; 2],
    pub corruption: Corruption,
    pub ridge: f64,
}

impl UmbrellaConfig {
    pub fn new(alpha: f64, delta: f64, corruption: Corruption) -> Self {
        UmbrellaConfig {
            alpha,
            delta,
            splits0: [0.4, 0.3, 0.3],
            splits1: [0.5, 0.5],
            corruption,
            ridge: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("alpha and delta must lie in (0, 1)"));
        }
        for fr in [&self.splits0[..], &self.splits1[..]] {
            if fr.iter().any(|&f| !(f > 0.0)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("split fractions must be positive and sum to 1"));
            }
        }
        if let Corruption::Known { m0, m1 } = self.corruption {
            check_levels(m0, m1)?;
        }
        Ok(())
    }
}

fn check_levels(m0: f64, m1: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&m0) || !(0.0..=1.0).contains(&m1) || !(m0 > m1) {
        return Err(Error::invalid(format!("corruption levels need 0 ≤ m1 < m0 ≤ 1, got m0 = {m0}, m1 = {m1}")));
    }
    Ok(())
}

/// Known corruption levels loosened towards the no-noise bounds by `δ/3`.
pub fn npc_bounds(m0: f64, m1: f64, delta: f64) -> (f64, f64) {
    ((m0 + delta / 3.0).min(1.0), (m1 - delta / 3.0).max(0.0))
}

/// Threshold index selection on sorted calibration scores; returns `(k*, saturated)` with 1-based `k*`.
pub fn select_k_star(cal_sorted: &[f64], est0: &[f64], est1: &[f64], m0: f64, m1: f64, alpha: f64, delta: f64) -> Result<(usize, bool)> {
    check_levels(m0, m1)?;
    let m = cal_sorted.len();
    if m == 0 || est0.is_empty() || est1.is_empty() {
        return Err(Error::invalid("umbrella splits must be nonempty"));
    }
    let mut a = est0.to_vec();
    let mut b = est1.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    for k in 1..=m {
        let a_kd = 1.0 - binomial_alpha(k, m, delta)?;
        let d = d_hat_sorted(cal_sorted[k - 1], &a, &b, m0, m1).max(0.0);
        if a_kd - d <= alpha {
            return Ok((k, false));
        }
    }
    Ok((m, true))
}

#[derive(Clone, Debug, PartialEq)]
pub struct UmbrellaClassifier {
    /// Score model: `f(x) = P̂(noisy = 1 | x)`.
    pub score: ModelParams,
    pub k_star: usize,
    pub threshold: f64,
    pub m0_used: f64,
    pub m1_used: f64,
    pub saturated: bool,
    pub alpha: f64,
    pub delta: f64,
    posterior: PosteriorModel,
}

impl UmbrellaClassifier {
    #[allow(clippy::too_many_arguments)]
    pub fn new(score: ModelParams, k_star: usize, threshold: f64, m0_used: f64, m1_used: f64, saturated: bool, alpha: f64, delta: f64) -> Result<Self> {
        let posterior = PosteriorModel::from_params(&score)?;
        Ok(UmbrellaClassifier {
            score,
            k_star,
            threshold,
            m0_used,
            m1_used,
            saturated,
            alpha,
            delta,
            posterior,
        })
    }

    pub fn score_of(&self, gx: ArrayView1<f64>) -> f64 {
        self.posterior.probs(gx)[1]
    }

    pub fn classify(&self, gx: ArrayView1<f64>) -> usize {
        usize::from(self.score_of(gx) > self.threshold)
    }

    pub fn classify_all(&self, gx: ndarray::ArrayView2<f64>) -> Vec<usize> {
        self.posterior
            .probs_matrix(gx)
            .column(1)
            .iter()
            .map(|&s| usize::from(s > self.threshold))
            .collect()
    }
}

/// Logistic score on hard labels, stored with uniform `w` and `T = I`.
pub fn train_score(gx: ndarray::ArrayView2<f64>, labels: &[usize], ridge: f64) -> Result<ModelParams> {
    let omega = ResponsibilityMatrix::from_labels(labels, 2)?;
    if omega.col_means.iter().any(|&v| v == 0.0) {
        return Err(Error::invalid("score training split lacks one of the classes"));
    }
    let design = design_matrix(gx);
    let problem = WmlProblem::new(design.view(), omega.omega.view(), ridge)?;
    let coeffs = match wml_fit(&problem, &WmlConfig::default()) {
        Ok(sol) => sol.coeffs,
        Err(Error::NonConvergence { last, .. }) => *last,
        Err(e) => return Err(e),
    };
    let d = gx.ncols();
    let mut beta = Array2::zeros((2, d));
    beta.row_mut(1).assign(&coeffs.slice(ndarray::s![1, 1..]));
    Ok(ModelParams {
        w: Array1::from_elem(2, 0.5),
        gamma: Array1::from(vec![0.0, coeffs[[1, 0]]]),
        beta,
        t: Array2::eye(2),
    })
}

fn split_sizes(n: usize, fractions: &[f64]) -> Vec<usize> {
    let mut sizes: Vec<usize> = fractions.iter().map(|f| (f * n as f64).floor() as usize).collect();
    let used: usize = sizes.iter().sum();
    if let Some(last) = sizes.last_mut() {
        *last += n - used;
    }
    sizes
}

fn partition<R: Rng>(mut idx: Vec<usize>, fractions: &[f64], rng: &mut R) -> Result<Vec<Vec<usize>>> {
    idx.shuffle(rng);
    let sizes = split_sizes(idx.len(), fractions);
    if sizes.contains(&0) {
        return Err(Error::invalid("an umbrella split is empty"));
    }
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for s in sizes {
        out.push(idx[start..start + s].to_vec());
        start += s;
    }
    Ok(out)
}

/// Splits, trains the score, calibrates `k*`.
pub fn fit_umbrella<R: Rng>(data: &Dataset, config: &UmbrellaConfig, em_config: &EmConfig, rng: &mut R) -> Result<UmbrellaClassifier> {
    if data.k() != 2 {
        return Err(Error::invalid("umbrella needs K = 2"));
    }
    config.validate()?;
    let (m0, m1) = match config.corruption {
        Corruption::Known { m0, m1 } => (m0, m1),
        Corruption::Estimated => {
            let fit = em_fit(data, 2, em_config, None)?;
            let nm = complete_noise_matrices(&fit.params.t, &fit.params.w)?;
            (nm.m[[0, 0]], nm.m[[1, 0]])
        }
    };
    check_levels(m0, m1)?;
    umbrella_with_levels(data, config, m0, m1, rng)
}

/// Umbrella fit with corruption levels already decided.
pub fn umbrella_with_levels<R: Rng>(data: &Dataset, config: &UmbrellaConfig, m0: f64, m1: f64, rng: &mut R) -> Result<UmbrellaClassifier> {
    let labels = data.labels();
    let class0: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == 0).collect();
    let class1: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == 1).collect();
    let p0 = partition(class0, &config.splits0, rng)?;
    let p1 = partition(class1, &config.splits1, rng)?;
    let train: Vec<usize> = p0[0].iter().chain(&p1[0]).copied().collect();
    let gx = data.basis_view();
    let train_gx = gx.select(ndarray::Axis(0), &train);
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let score = train_score(train_gx.view(), &train_labels, config.ridge)?;
    let post = PosteriorModel::from_params(&score)?;
    let scores = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| post.probs(gx.row(i))[1]).collect() };
    let est0 = scores(&p0[1]);
    let mut cal = scores(&p0[2]);
    let est1 = scores(&p1[1]);
    cal.sort_by(f64::total_cmp);
    let (k_star, saturated) = select_k_star(&cal, &est0, &est1, m0, m1, config.alpha, config.delta)?;
    UmbrellaClassifier::new(score, k_star, cal[k_star - 1], m0, m1, saturated, config.alpha, config.delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf_survival(k: usize, m: usize, a: f64) -> f64 {
        let mut total = 0.0;
        for j in k..=m {
            let mut c = 1.0;
            for i in 0..j {
                c *= (m - i) as f64 / (i + 1) as f64;
            }
            total += c * a.powi(j as i32) * (1.0 - a).powi((m - j) as i32);
        }
        total
    }

    #[test]
    fn closed_forms() {
        assert_eq!(binomial_alpha(1, 1, 0.3).unwrap(), 0.3);
        assert!((binomial_alpha(2, 2, 0.49).unwrap() - 0.7).abs() < 1e-15);
        let a = binomial_alpha(5, 20, 0.05).unwrap();
        assert!((pmf_survival(5, 20, a) - 0.05).abs() < 1e-10);
        assert!(binomial_alpha(0, 3, 0.1).is_err());
        assert!(binomial_alpha(1, 3, 1.0).is_err());
    }

    #[test]
    fn d_hat_examples() {
        assert_eq!(d_hat(0.5, &[0.1, 0.9], &[0.2], 1.0, 0.0), 0.0);
        assert_eq!(d_hat(2.0, &[1.0, 3.0], &[2.0, 4.0], 0.9, 0.1), 0.0);
        assert!((d_hat(1.0, &[1.0, 3.0], &[2.0, 4.0], 0.9, 0.1) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn bounds_stay_in_unit_interval() {
        assert_eq!(npc_bounds(0.95, 0.05, 0.3), (1.0, 0.0));
        let (a, b) = npc_bounds(0.9, 0.1, 0.03);
        assert!((a - 0.91).abs() < 1e-12 && (b - 0.09).abs() < 1e-12);
    }

    #[test]
    fn clean_rule_without_noise() {
        let cal: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let (k, sat) = select_k_star(&cal, &[0.5], &[0.7], 1.0, 0.0, 0.1, 0.1).unwrap();
        assert!(!sat);
        // classic umbrella: smallest k with P(Bin(m, 1 − α) ≥ k) ≤ δ
        let brute = (1..=100).find(|&k| pmf_survival(k, 100, 0.9) <= 0.1 + 1e-12).unwrap();
        assert!((k as i64 - brute as i64).abs() <= 1);
    }

    #[test]
    fn saturates_on_tiny_calibration() {
        let (k, sat) = select_k_star(&[0.2, 0.4], &[0.1], &[0.9], 1.0, 0.0, 0.01, 0.01).unwrap();
        assert_eq!((k, sat), (2, true));
    }
}
