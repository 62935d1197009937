//! Binary Neyman–Pearson classification from estimated posteriors.
//!
//! With `ŵ = P(Y = 1)` the score `r = (1 − ŵ)π / {ŵ(1 − π)}` is thresholded at
//! the smallest jump point `λ̂` of `L(λ) = n⁻¹ Σ (1 − π_i) 1{λ ≤ r_i}` with
//! `L(λ̂) ≤ α(1 − ŵ)`.

use ndarray::ArrayView1;

use crate::em::{em_fit, EmConfig, EmFit};
use crate::error::{Error, Result};
use crate::model::{Dataset, ModelParams, PosteriorModel};

pub const PI_CLAMP: f64 = 1e-12;

pub fn clamp_pi(pi: f64) -> f64 {
    pi.clamp(PI_CLAMP, 1.0 - PI_CLAMP)
}

/// `(1 − w)π / {w(1 − π)}`; `π = 1` gives `+∞`.
pub fn density_ratio_score(pi: f64, w: f64) -> f64 {
    if pi >= 1.0 {
        return f64::INFINITY;
    }
    ((1.0 - w) * pi) / (w * (1.0 - pi))
}

/// Smallest `r_j` with `n⁻¹ Σ_i masses_i 1{r_j ≤ r_i} ≤ target`, or `+∞` if none.
pub fn solve_threshold_scores(r: &[f64], masses: &[f64], target: f64) -> f64 {
    let n = r.len() as f64;
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[a].total_cmp(&r[b]));
    // suffix sums over sorted scores; ties share one jump point
    let mut best = f64::INFINITY;
    let mut tail = 0.0;
    let mut j = order.len();
    while j > 0 {
        let v = r[order[j - 1]];
        let mut i = j;
        while i > 0 && r[order[i - 1]] == v {
            tail += masses[order[i - 1]];
            i -= 1;
        }
        if tail / n <= target {
            best = v;
        } else {
            break;
        }
        j = i;
    }
    best
}

/// `λ̂` on a sample of posteriors `π̂(X_i) = P(Y = 1 | X_i)`.
pub fn solve_threshold(pis: &[f64], w_hat: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    if !(w_hat > 0.0 && w_hat < 1.0) {
        return Err(Error::invalid(format!("class-1 proportion {w_hat} outside (0, 1)")));
    }
    if pis.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let clamped: Vec<f64> = pis.iter().map(|&p| clamp_pi(p)).collect();
    let r: Vec<f64> = clamped.iter().map(|&p| density_ratio_score(p, w_hat)).collect();
    let masses: Vec<f64> = clamped.iter().map(|&p| 1.0 - p).collect();
    Ok(solve_threshold_scores(&r, &masses, alpha * (1.0 - w_hat)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryNpClassifier {
    /// `+∞` means every point is assigned class 0.
    pub lambda_hat: f64,
    pub w_hat: f64,
    pub params: ModelParams,
    pub alpha: f64,
    posterior: PosteriorModel,
}

impl BinaryNpClassifier {
    /// Threshold on the training sample's posteriors under `params`.
    pub fn from_params(params: ModelParams, gx: ndarray::ArrayView2<f64>, alpha: f64) -> Result<Self> {
        if params.k() != 2 {
            return Err(Error::invalid("binary classifier needs K = 2"));
        }
        let posterior = PosteriorModel::from_params(&params)?;
        let probs = posterior.probs_matrix(gx);
        let pis: Vec<f64> = probs.column(1).to_vec();
        let w_hat = params.w[1];
        let lambda_hat = solve_threshold(&pis, w_hat, alpha)?;
        Ok(BinaryNpClassifier {
            lambda_hat,
            w_hat,
            params,
            alpha,
            posterior,
        })
    }

    /// Rebuilds a stored classifier.
    pub fn with_lambda(params: ModelParams, lambda_hat: f64, alpha: f64) -> Result<Self> {
        if params.k() != 2 {
            return Err(Error::invalid("binary classifier needs K = 2"));
        }
        let posterior = PosteriorModel::from_params(&params)?;
        Ok(BinaryNpClassifier {
            lambda_hat,
            w_hat: params.w[1],
            params,
            alpha,
            posterior,
        })
    }

    /// Posterior cut-off `t* = λ̂ŵ / (1 − ŵ + λ̂ŵ)`; `1` for the sentinel.
    pub fn posterior_threshold(&self) -> f64 {
        if self.lambda_hat.is_infinite() {
            return 1.0;
        }
        let lw = self.lambda_hat * self.w_hat;
        lw / (1.0 - self.w_hat + lw)
    }

    pub fn pi(&self, gx: ArrayView1<f64>) -> f64 {
        clamp_pi(self.posterior.probs(gx)[1])
    }

    pub fn classify(&self, gx: ArrayView1<f64>) -> usize {
        if self.lambda_hat.is_infinite() {
            return 0;
        }
        usize::from(self.pi(gx) >= self.posterior_threshold())
    }

    pub fn classify_all(&self, gx: ndarray::ArrayView2<f64>) -> Vec<usize> {
        if self.lambda_hat.is_infinite() {
            return vec![0; gx.nrows()];
        }
        let t = self.posterior_threshold();
        self.posterior
            .probs_matrix(gx)
            .column(1)
            .iter()
            .map(|&p| usize::from(clamp_pi(p) >= t))
            .collect()
    }
}

/// EM fit followed by thresholding on the training sample.
pub fn fit_np_binary(data: &Dataset, alpha: f64, config: &EmConfig) -> Result<(BinaryNpClassifier, EmFit)> {
    if data.k() != 2 {
        return Err(Error::invalid("np-binary needs K = 2"));
    }
    let fit = em_fit(data, 2, config, None)?;
    let clf = BinaryNpClassifier::from_params(fit.params.clone(), data.basis_view(), alpha)?;
    Ok((clf, fit))
}
