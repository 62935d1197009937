//! Versioned JSON model documents.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{validate, Basis, ModelParams, NpmcSpec};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: String,
    pub p: usize,
}

impl BasisSpec {
    pub fn of(basis: &Basis) -> Self {
        BasisSpec {
            kind: basis.kind_name().to_string(),
            p: basis.input_dim(),
        }
    }

    pub fn to_basis(&self) -> Result<Basis> {
        Basis::from_kind(&self.kind, self.p)
    }
}

/// Per-feature affine transform applied before basis expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardize {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardize {
    pub fn fit(features: ndarray::ArrayView2<f64>) -> Self {
        let mut mean = Vec::with_capacity(features.ncols());
        let mut sd = Vec::with_capacity(features.ncols());
        for col in features.columns() {
            let v = col.to_vec();
            let s = crate::numeric::sd(&v);
            mean.push(crate::numeric::mean(&v));
            sd.push(if s > 0.0 && s.is_finite() { s } else { 1.0 });
        }
        Standardize { mean, sd }
    }

    pub fn apply(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "standardization expects {} features, got {}",
                self.mean.len(),
                features.ncols()
            )));
        }
        let mut out = features.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.mean[j]) / self.sd[j]);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    SuspectInfeasible,
}

/// Decision rule stored next to the fitted parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassifierDoc {
    NpBinary {
        /// `None` encodes the "always predict 0" sentinel.
        lambda_hat: Option<f64>,
        alpha: f64,
    },
    Npmc {
        lambda_hat: Vec<f64>,
        spec: NpmcSpec,
        g_value: f64,
        feasibility: Feasibility,
        truncated: bool,
    },
    Umbrella {
        k_star: usize,
        threshold: f64,
        m0_used: f64,
        m1_used: f64,
        saturated: bool,
        alpha: f64,
        delta: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub version: u32,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub w: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    /// One inner array per column of `T`.
    #[serde(rename = "T_colmajor")]
    pub t_colmajor: Vec<Vec<f64>>,
    pub basis: BasisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardize: Option<Standardize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierDoc>,
}

impl ModelDoc {
    pub fn new(params: &ModelParams, basis: &Basis) -> Self {
        ModelDoc {
            version: FORMAT_VERSION,
            k: params.k(),
            d: params.d(),
            w: params.w.to_vec(),
            gamma: params.gamma.to_vec(),
            beta: params.beta.rows().into_iter().map(|r| r.to_vec()).collect(),
            t_colmajor: params.t.columns().into_iter().map(|c| c.to_vec()).collect(),
            basis: BasisSpec::of(basis),
            standardize: None,
            converged: None,
            classifier: None,
        }
    }

    /// Rebuilds and validates the parameters.
    pub fn params(&self) -> Result<ModelParams> {
        let k = self.k;
        let d = self.d;
        if self.beta.len() != k || self.beta.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension(format!("beta must be {k}×{d}")));
        }
        if self.t_colmajor.len() != k || self.t_colmajor.iter().any(|c| c.len() != k) {
            return Err(Error::Dimension(format!("T_colmajor must be {k}×{k}")));
        }
        let beta = Array2::from_shape_fn((k, d), |(i, j)| self.beta[i][j]);
        let t = Array2::from_shape_fn((k, k), |(l, j)| self.t_colmajor[j][l]);
        let params = ModelParams {
            w: Array1::from(self.w.clone()),
            gamma: Array1::from(self.gamma.clone()),
            beta,
            t,
        };
        validate(&params, k, d)?;
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.version != FORMAT_VERSION {
            return Err(Error::Unsupported(format!("model format version {}", doc.version)));
        }
        doc.params()?;
        if doc.basis.kind != "custom-table" {
            let b = doc.basis.to_basis()?;
            if b.output_dim() != doc.d {
                return Err(Error::Dimension(format!(
                    "basis {} on {} features gives d={}, model has d={}",
                    doc.basis.kind,
                    doc.basis.p,
                    b.output_dim(),
                    doc.d
                )));
            }
        }
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
