//! Shared domain types: bases, datasets, DRM parameters, noise matrices,
//! error-control specifications and model persistence.
//!
//! Labels are 0-based and class 0 is the reference class of the density
//! ratio model: `dP_k/dP_0(x) = exp(gamma[k] + beta[k]·g(x))` with
//! `gamma[0] = 0` and `beta[0] = 0`.
//!
//! The transition matrix is stored column-stochastic: `t[[l, k]] = P(noisy = l | true = k)`.

mod basis;
mod dataset;
mod noise;
pub mod persist;

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

pub use basis::Basis;
pub use dataset::{CsvTable, Dataset};
pub use noise::{complete_noise_matrices, NoiseMatrices};

use crate::error::{Error, Result};
use crate::numeric::softmax_in_place;

pub(crate) const SIMPLEX_TOL: f64 = 1e-10;

/// All estimable parameters of the noisy-label density ratio model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Clean class proportions.
    pub w: Array1<f64>,
    /// Tilt intercepts, `gamma[0] = 0`.
    pub gamma: Array1<f64>,
    /// Tilt slopes, `K × d`, row 0 zero.
    pub beta: Array2<f64>,
    /// Column-stochastic noise transition matrix.
    pub t: Array2<f64>,
}

impl ModelParams {
    pub fn k(&self) -> usize {
        self.w.len()
    }

    pub fn d(&self) -> usize {
        self.beta.ncols()
    }

    /// Uniform proportions, identity noise and zero tilts.
    pub fn symmetric(k: usize, d: usize) -> Self {
        ModelParams {
            w: Array1::from_elem(k, 1.0 / k as f64),
            gamma: Array1::zeros(k),
            beta: Array2::zeros((k, d)),
            t: Array2::eye(k),
        }
    }

    pub fn validate(&self, k: usize, d: usize) -> Result<()> {
        validate(self, k, d)
    }

    /// Log tilts `gamma[k] + beta[k]·gx` for every class.
    pub fn log_tilts(&self, gx: ArrayView1<f64>) -> Array1<f64> {
        &self.gamma + &self.beta.dot(&gx)
    }

    /// Posterior `P(Y = k | x)` at a basis-expanded point.
    pub fn posterior(&self, gx: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(PosteriorModel::from_params(self)?.probs(gx))
    }
}

/// Checks every [`ModelParams`] invariant for dimensions `(k, d)`.
pub fn validate(params: &ModelParams, k: usize, d: usize) -> Result<()> {
    let dims_ok = params.w.len() == k
        && params.gamma.len() == k
        && params.beta.dim() == (k, d)
        && params.t.dim() == (k, k);
    if !dims_ok {
        return Err(Error::Dimension(format!(
            "expected K={k}, d={d}; got w:{}, gamma:{}, beta:{:?}, T:{:?}",
            params.w.len(),
            params.gamma.len(),
            params.beta.dim(),
            params.t.dim()
        )));
    }
    check_simplex(params.w.view(), "w")?;
    check_column_stochastic(&params.t)?;
    if params.gamma[0] != 0.0 || params.beta.row(0).iter().any(|&b| b != 0.0) {
        return Err(Error::Anchoring(
            "reference class must have gamma[0] = 0 and beta[0] = 0".into(),
        ));
    }
    if params.gamma.iter().chain(params.beta.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite tilt parameter"));
    }
    Ok(())
}

pub(crate) fn check_simplex(v: ArrayView1<f64>, name: &str) -> Result<()> {
    if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Simplex(format!("{name} has a negative or non-finite entry")));
    }
    let s = v.sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Simplex(format!("{name} sums to {s}")));
    }
    Ok(())
}

pub(crate) fn check_column_stochastic(t: &Array2<f64>) -> Result<()> {
    for (k, col) in t.columns().into_iter().enumerate() {
        if col.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::ColumnStochastic(format!("column {k} has an entry outside [0, 1]")));
        }
        let s = col.sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::ColumnStochastic(format!("column {k} sums to {s}")));
        }
    }
    Ok(())
}

/// Softmax posterior coefficients: intercepts `gamma[k] + ln(w[k]/w[0])` and the slopes.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorModel {
    pub intercepts: Array1<f64>,
    pub slopes: Array2<f64>,
}

impl PosteriorModel {
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        if let Some(k) = params.w.iter().position(|&w| !(w > 0.0)) {
            return Err(Error::ZeroClassProportion(k));
        }
        let w0 = params.w[0];
        let intercepts = Array1::from_shape_fn(params.k(), |k| {
            params.gamma[k] + (params.w[k] / w0).ln()
        });
        Ok(PosteriorModel {
            intercepts,
            slopes: params.beta.clone(),
        })
    }

    pub fn k(&self) -> usize {
        self.intercepts.len()
    }

    pub fn probs(&self, gx: ArrayView1<f64>) -> Array1<f64> {
        let mut eta = &self.intercepts + &self.slopes.dot(&gx);
        softmax_in_place(eta.as_slice_mut().expect("contiguous"));
        eta
    }

    /// Posterior matrix for every row of a basis view.
    pub fn probs_matrix(&self, gx: ndarray::ArrayView2<f64>) -> Array2<f64> {
        let mut eta = gx.dot(&self.slopes.t()) + &self.intercepts;
        if !eta.is_standard_layout() {
            eta = eta.as_standard_layout().into_owned();
        }
        for mut row in eta.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("row-major"));
        }
        eta
    }
}

/// Neyman–Pearson multiclass problem: minimize `Σ rho[k]·R_k` subject to
/// `R_k ≤ alpha[k]` for `k ∈ S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NpmcSpec {
    pub rho: Vec<f64>,
    #[serde(deserialize_with = "class_keyed")]
    pub alpha: BTreeMap<usize, f64>,
    #[serde(rename = "S")]
    pub s: Vec<usize>,
}

impl NpmcSpec {
    pub fn new(rho: Vec<f64>, constraints: &[(usize, f64)]) -> Result<Self> {
        let spec = NpmcSpec {
            rho,
            alpha: constraints.iter().copied().collect(),
            s: constraints.iter().map(|&(k, _)| k).collect(),
        };
        spec.validate(spec.rho.len())?;
        Ok(spec.normalized())
    }

    fn normalized(mut self) -> Self {
        self.s.sort_unstable();
        self.s.dedup();
        self
    }

    pub fn k(&self) -> usize {
        self.rho.len()
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.rho.len() != k {
            return Err(Error::Dimension(format!("rho has {} entries, K = {k}", self.rho.len())));
        }
        if self.rho.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
            return Err(Error::invalid("rho must be finite and nonnegative"));
        }
        if !self.rho.iter().any(|&r| r > 0.0) {
            return Err(Error::invalid("rho needs at least one positive entry"));
        }
        for &c in &self.s {
            if c >= k {
                return Err(Error::invalid(format!("constrained class {c} outside [0, {k})")));
            }
            match self.alpha.get(&c) {
                Some(&a) if a > 0.0 && a < 1.0 => {}
                Some(&a) => {
                    return Err(Error::invalid(format!("alpha[{c}] = {a} outside (0, 1)")))
                }
                None => return Err(Error::invalid(format!("no target level for class {c}"))),
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NpmcSpec = serde_json::from_str(text)?;
        spec.validate(spec.rho.len())?;
        Ok(spec.normalized())
    }

    /// `alpha[k]` for each class in `S`, in `S` order.
    pub fn alphas(&self) -> Vec<f64> {
        self.s.iter().map(|k| self.alpha[k]).collect()
    }
}

// Keys arrive as strings, also when buffered inside a tagged enum.
fn class_keyed<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<usize, f64>, D::Error> {
    let raw: BTreeMap<String, f64> = BTreeMap::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.trim()
                .parse::<usize>()
                .map(|k| (k, v))
                .map_err(|_| serde::de::Error::custom(format!("class key {k:?} is not an integer")))
        })
        .collect()
}

/// Empirical-likelihood point masses and their multipliers (`nu[j]` belongs to class `j + 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileWeights {
    pub p: Array1<f64>,
    pub nu: Array1<f64>,
}
