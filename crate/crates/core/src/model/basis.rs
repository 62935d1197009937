use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Feature representation `g(x)` used by the tilts.
#[derive(Clone, Debug, PartialEq)]
pub enum Basis {
    /// `g(x) = x`.
    Identity { p: usize },
    /// `g(x) = (x, x ⊙ x)`, elementwise squares appended.
    QuadraticDiagonal { p: usize },
    /// A precomputed `n × d` table, valid only for the dataset it was built for.
    CustomTable(Array2<f64>),
}

impl Basis {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Basis::Identity { .. } => "identity",
            Basis::QuadraticDiagonal { .. } => "quadratic-diagonal",
            Basis::CustomTable(_) => "custom-table",
        }
    }

    pub fn from_kind(kind: &str, p: usize) -> Result<Self> {
        match kind {
            "identity" => Ok(Basis::Identity { p }),
            "quadratic-diagonal" | "quad" | "quadratic" => Ok(Basis::QuadraticDiagonal { p }),
            "custom-table" => Err(Error::Unsupported(
                "custom-table bases cannot be rebuilt from a kind name".into(),
            )),
            other => Err(Error::invalid(format!("unknown basis kind {other:?}"))),
        }
    }

    /// Raw feature dimension the basis expects (column count of the table for custom bases).
    pub fn input_dim(&self) -> usize {
        match self {
            Basis::Identity { p } | Basis::QuadraticDiagonal { p } => *p,
            Basis::CustomTable(t) => t.ncols(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Basis::Identity { p } => *p,
            Basis::QuadraticDiagonal { p } => 2 * p,
            Basis::CustomTable(t) => t.ncols(),
        }
    }

    /// Expands a single feature row. Custom tables have no closed form and are rejected.
    pub fn apply_row(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        match self {
            Basis::Identity { p } => {
                check_len(x.len(), *p)?;
                Ok(x.to_owned())
            }
            Basis::QuadraticDiagonal { p } => {
                check_len(x.len(), *p)?;
                let mut g = Array1::zeros(2 * p);
                for (j, &v) in x.iter().enumerate() {
                    g[j] = v;
                    g[p + j] = v * v;
                }
                Ok(g)
            }
            Basis::CustomTable(_) => Err(Error::Unsupported(
                "custom-table basis cannot expand unseen rows".into(),
            )),
        }
    }

    /// Expands every row of `features`.
    pub fn expand(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            Basis::Identity { p } => {
                check_len(features.ncols(), *p)?;
                Ok(features.to_owned())
            }
            Basis::QuadraticDiagonal { p } => {
                check_len(features.ncols(), *p)?;
                let sq = features.mapv(|v| v * v);
                Ok(ndarray::concatenate(Axis(1), &[features, sq.view()])
                    .expect("row counts agree"))
            }
            Basis::CustomTable(table) => {
                if table.nrows() != features.nrows() {
                    return Err(Error::Dimension(format!(
                        "custom basis table has {} rows but the dataset has {}",
                        table.nrows(),
                        features.nrows()
                    )));
                }
                Ok(table.clone())
            }
        }
    }
}

fn check_len(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!(
            "basis expects {want} features, got {got}"
        )));
    }
    Ok(())
}
