use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::basis::Basis;
use crate::error::{Error, Result};

/// Features with noisy integer labels and the basis-expanded view `g(X_i)`.
#[derive(Clone, Debug)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    k: usize,
    basis: Basis,
    basis_view: Array2<f64>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, k: usize, basis: Basis) -> Result<Self> {
        let n = features.nrows();
        if k < 2 {
            return Err(Error::invalid(format!("class count must be at least 2, got {k}")));
        }
        if labels.len() != n {
            return Err(Error::Dimension(format!(
                "{} labels for {} feature rows",
                labels.len(),
                n
            )));
        }
        if n < k {
            return Err(Error::invalid(format!("need at least K={k} samples, got {n}")));
        }
        if let Some(i) = labels.iter().position(|&y| y >= k) {
            return Err(Error::invalid(format!(
                "sample {i}: label {} outside [0, {k})",
                labels[i]
            )));
        }
        if let Some(((i, j), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i}: feature {j} is not finite")));
        }
        let basis_view = basis.expand(features.view())?;
        if basis_view.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("basis expansion produced non-finite values"));
        }
        Ok(Dataset {
            features,
            labels,
            k,
            basis,
            basis_view,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Basis output dimension `d`.
    pub fn d(&self) -> usize {
        self.basis_view.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn basis_view(&self) -> ArrayView2<'_, f64> {
        self.basis_view.view()
    }

    pub fn gx(&self, i: usize) -> ArrayView1<'_, f64> {
        self.basis_view.row(i)
    }

    /// Same features and basis, different labels (e.g. clean labels for an oracle fit).
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Dimension("label vector length differs".into()));
        }
        if let Some(i) = labels.iter().position(|&y| y >= self.k) {
            return Err(Error::invalid(format!("sample {i}: label outside [0, {})", self.k)));
        }
        Ok(Dataset {
            labels,
            ..self.clone()
        })
    }

    /// Row subset, preserving order of `idx`. Custom-table bases are subset alongside.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let features = self.features.select(ndarray::Axis(0), idx);
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        let basis = match &self.basis {
            Basis::CustomTable(t) => Basis::CustomTable(t.select(ndarray::Axis(0), idx)),
            b => b.clone(),
        };
        Dataset::new(features, labels, self.k, basis)
    }

    /// Empirical label frequencies.
    pub fn label_frequencies(&self) -> Array1<f64> {
        let mut f = Array1::zeros(self.k);
        for &y in &self.labels {
            f[y] += 1.0;
        }
        f / self.n() as f64
    }
}

/// Rows read from the CSV dataset schema: header, `f0..f{p-1}`, optional `y`
/// (noisy label) and optional `y_true`.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub features: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub true_labels: Option<Vec<usize>>,
}

impl CsvTable {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut feature_cols: Vec<(usize, usize)> = Vec::new();
        let mut y_col = None;
        let mut y_true_col = None;
        for (c, h) in headers.iter().enumerate() {
            match h {
                "y" => y_col = Some(c),
                "y_true" => y_true_col = Some(c),
                _ => {
                    let j = h
                        .strip_prefix('f')
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| Error::Parse {
                            line: 1,
                            msg: format!("unexpected column {h:?}"),
                        })?;
                    feature_cols.push((j, c));
                }
            }
        }
        let p = feature_cols.len();
        feature_cols.sort();
        for (want, &(j, _)) in feature_cols.iter().enumerate() {
            if j != want {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("feature columns must be f0..f{}; missing f{want}", p.max(1) - 1),
                });
            }
        }
        if p == 0 {
            return Err(Error::Parse {
                line: 1,
                msg: "no feature columns".into(),
            });
        }

        let mut values = Vec::new();
        let mut labels = y_col.map(|_| Vec::new());
        let mut true_labels = y_true_col.map(|_| Vec::new());
        for (r, rec) in rdr.records().enumerate() {
            let line = r + 2;
            let rec = rec?;
            for &(j, c) in &feature_cols {
                let raw = rec.get(c).unwrap_or("");
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("f{j}: cannot parse {raw:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        msg: format!("f{j}: non-finite value"),
                    });
                }
                values.push(v);
            }
            if let (Some(c), Some(out)) = (y_col, labels.as_mut()) {
                out.push(parse_label(rec.get(c).unwrap_or(""), line, "y")?);
            }
            if let (Some(c), Some(out)) = (y_true_col, true_labels.as_mut()) {
                out.push(parse_label(rec.get(c).unwrap_or(""), line, "y_true")?);
            }
        }
        let n = values.len() / p;
        let features = Array2::from_shape_vec((n, p), values).expect("row-major buffer");
        Ok(CsvTable {
            features,
            labels,
            true_labels,
        })
    }

    /// Builds a dataset, reporting out-of-range labels by CSV line number.
    pub fn into_dataset(self, k: usize, basis: Basis) -> Result<Dataset> {
        let labels = self.labels.ok_or_else(|| Error::Parse {
            line: 1,
            msg: "missing label column y".into(),
        })?;
        if let Some(i) = labels.iter().position(|&y| y >= k) {
            return Err(Error::Parse {
                line: i + 2,
                msg: format!("label {} outside [0, {k})", labels[i]),
            });
        }
        Dataset::new(self.features, labels, k, basis)
    }

    pub fn write(
        path: impl AsRef<Path>,
        features: ArrayView2<f64>,
        labels: Option<&[usize]>,
        true_labels: Option<&[usize]>,
    ) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let p = features.ncols();
        let mut header: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
        if labels.is_some() {
            header.push("y".into());
        }
        if true_labels.is_some() {
            header.push("y_true".into());
        }
        w.write_record(&header)?;
        for (i, row) in features.outer_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            if let Some(l) = labels {
                rec.push(l[i].to_string());
            }
            if let Some(l) = true_labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_label(raw: &str, line: usize, col: &str) -> Result<usize> {
    raw.parse::<usize>().map_err(|_| Error::Parse {
        line,
        msg: format!("{col}: {raw:?} is not a non-negative integer label"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_out_of_range_label() {
        let x = array![[0.0], [1.0], [2.0]];
        assert!(Dataset::new(x, vec![0, 1, 2], 2, Basis::Identity { p: 1 }).is_err());
    }

    #[test]
    fn rejects_non_finite_features() {
        let x = array![[0.0], [f64::NAN]];
        assert!(Dataset::new(x, vec![0, 1], 2, Basis::Identity { p: 1 }).is_err());
    }

    #[test]
    fn basis_view_matches_rows() {
        let x = array![[1.0, 2.0], [3.0, -1.0]];
        let ds = Dataset::new(x, vec![0, 1], 2, Basis::QuadraticDiagonal { p: 2 }).unwrap();
        for i in 0..2 {
            let g = ds.basis().apply_row(ds.features().row(i)).unwrap();
            assert_eq!(ds.gx(i), g);
        }
    }

    #[test]
    fn csv_reports_line_numbers() {
        let text = "f0,f1,y\n0.5,1.0,0\n0.1,0.2,7\n";
        let t = CsvTable::from_reader(text.as_bytes()).unwrap();
        match t.into_dataset(3, Basis::Identity { p: 2 }) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let missing = "f0,y\n0.5,0\n,1\n";
        match CsvTable::from_reader(missing.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let x = array![[0.1, -3.25], [1e-17, 4.0]];
        CsvTable::write(&path, x.view(), Some(&[1, 0]), None).unwrap();
        let t = CsvTable::read(&path).unwrap();
        assert_eq!(t.features, x);
        assert_eq!(t.labels, Some(vec![1, 0]));
        assert_eq!(t.true_labels, None);
    }
}
