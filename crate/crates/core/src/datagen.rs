//! Synthetic scenarios, label-noise injection and closed-form oracle tilts.
//!
//! Random streams: every draw comes from `ChaCha8Rng::seed_from_u64(root)`
//! with stream `16 · rep + purpose` (see [`Purpose`]), so a root seed and a
//! repetition index reproduce the same data on every platform.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{complete_noise_matrices, check_simplex, Basis, CsvTable, NoiseMatrices, NpmcSpec};
use crate::numeric::{cholesky_lower, inverse_spd};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Train = 0,
    Noise = 1,
    Eval = 2,
    Split = 3,
    Fit = 4,
}

pub fn rng_for(root: u64, rep: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(rep * 16 + purpose as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariance {
    Shared(Vec<Vec<f64>>),
    PerClass(Vec<Vec<Vec<f64>>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Family {
    Gaussian {
        means: Vec<Vec<f64>>,
        cov: Covariance,
    },
    UniformCircle {
        centers: Vec<Vec<f64>>,
        radius: f64,
    },
    StudentT {
        means: Vec<Vec<f64>>,
        shape: Vec<Vec<f64>>,
        #[serde(default = "default_dof")]
        dof: f64,
    },
    /// Rows of a CSV file with `f*` columns and a `y_true` (or `y`) column, drawn with replacement.
    Custom { path: PathBuf },
}

fn default_dof() -> f64 {
    15.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Row `l` is `P(true = · | noisy = l)`; noisy classes are drawn in equal fixed counts.
    ConfusionRows { m: Vec<Vec<f64>> },
    TransitionEta { eta: f64 },
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Task {
    Binary {
        alpha: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    Npmc { spec: NpmcSpec },
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    /// Fixed number of clean points per class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class: Option<usize>,
    /// Total size drawn from the class proportions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_probs: Option<Vec<f64>>,
    pub noise: NoiseSpec,
    #[serde(default = "default_basis")]
    pub basis: String,
    pub task: Task,
    /// Training size; per noisy class under `confusion_rows`.
    pub n: usize,
    pub eval: EvalSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_basis() -> String {
    "identity".into()
}

/// Features with clean labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub features: Array2<f64>,
    pub true_labels: Vec<usize>,
}

/// Training data: features, observed noisy labels, hidden clean labels and the generating noise.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisySample {
    pub features: Array2<f64>,
    pub noisy_labels: Vec<usize>,
    pub true_labels: Vec<usize>,
    pub noise: NoiseMatrices,
}

impl NoisySample {
    pub fn dataset(&self, basis: Basis) -> Result<crate::model::Dataset> {
        crate::model::Dataset::new(self.features.clone(), self.noisy_labels.clone(), self.noise.w.len(), basis)
    }

    pub fn clean_dataset(&self, basis: Basis) -> Result<crate::model::Dataset> {
        crate::model::Dataset::new(self.features.clone(), self.true_labels.clone(), self.noise.w.len(), basis)
    }
}

/// `T_lk = η/K` off the diagonal and `1 − (K − 1)η/K` on it.
pub fn transition_eta(k: usize, eta: f64) -> Result<Array2<f64>> {
    let off = eta / k as f64;
    let diag = 1.0 - (k - 1) as f64 * off;
    if !(0.0..=1.0).contains(&off) || !(0.0..=1.0).contains(&diag) {
        return Err(Error::invalid(format!("eta = {eta} gives probabilities outside [0, 1]")));
    }
    Ok(Array2::from_shape_fn((k, k), |(l, j)| if l == j { diag } else { off }))
}

enum Sampler {
    Gaussian { means: Array2<f64>, chols: Vec<Array2<f64>> },
    Circle { centers: Array2<f64>, radius: f64 },
    T { means: Array2<f64>, chol: Array2<f64>, chi: ChiSquared<f64>, dof: f64 },
    Table { features: Array2<f64>, by_class: Vec<Vec<usize>> },
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::invalid(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(Array2::from_shape_fn((r, c), |(i, j)| rows[i][j]))
}

fn square_chol(rows: &[Vec<f64>], p: usize, what: &str) -> Result<Array2<f64>> {
    let m = matrix(rows, what)?;
    if m.dim() != (p, p) {
        return Err(Error::Dimension(format!("{what} must be {p}×{p}")));
    }
    cholesky_lower(&m).ok_or_else(|| Error::invalid(format!("{what} is not positive definite")))
}

impl Family {
    /// Feature dimension.
    pub fn dim(&self) -> Result<usize> {
        Ok(match self {
            Family::Gaussian { means, .. } | Family::StudentT { means, .. } => matrix(means, "means")?.ncols(),
            Family::UniformCircle { .. } => 2,
            Family::Custom { path } => CsvTable::read(path)?.features.ncols(),
        })
    }

    fn sampler(&self, k: usize) -> Result<Sampler> {
        match self {
            Family::Gaussian { means, cov } => {
                let means = matrix(means, "means")?;
                check_classes(means.nrows(), k)?;
                let p = means.ncols();
                let chols = match cov {
                    Covariance::Shared(c) => vec![square_chol(c, p, "covariance")?; k],
                    Covariance::PerClass(cs) => {
                        check_classes(cs.len(), k)?;
                        cs.iter().map(|c| square_chol(c, p, "covariance")).collect::<Result<_>>()?
                    }
                };
                Ok(Sampler::Gaussian { means, chols })
            }
            Family::UniformCircle { centers, radius } => {
                let centers = matrix(centers, "centers")?;
                check_classes(centers.nrows(), k)?;
                if centers.ncols() != 2 || !(*radius > 0.0) {
                    return Err(Error::invalid("circle centers must be 2-D with a positive radius"));
                }
                Ok(Sampler::Circle { centers, radius: *radius })
            }
            Family::StudentT { means, shape, dof } => {
                let means = matrix(means, "means")?;
                check_classes(means.nrows(), k)?;
                let chol = square_chol(shape, means.ncols(), "shape matrix")?;
                let chi = ChiSquared::new(*dof).map_err(|e| Error::invalid(format!("dof: {e}")))?;
                Ok(Sampler::T { means, chol, chi, dof: *dof })
            }
            Family::Custom { path } => {
                let table = CsvTable::read(path)?;
                let labels = table
                    .true_labels
                    .or(table.labels)
                    .ok_or_else(|| Error::invalid("custom data needs a y_true or y column"))?;
                let mut by_class = vec![Vec::new(); k];
                for (i, &y) in labels.iter().enumerate() {
                    if y >= k {
                        return Err(Error::Parse { line: i + 2, msg: format!("label {y} outside [0, {k})") });
                    }
                    by_class[y].push(i);
                }
                if let Some(c) = by_class.iter().position(Vec::is_empty) {
                    return Err(Error::EmptyClass(c));
                }
                Ok(Sampler::Table { features: table.features, by_class })
            }
        }
    }
}

fn check_classes(got: usize, k: usize) -> Result<()> {
    if got != k {
        return Err(Error::Dimension(format!("{got} class locations for K={k}")));
    }
    Ok(())
}

impl Sampler {
    fn dim(&self) -> usize {
        match self {
            Sampler::Gaussian { means, .. } | Sampler::T { means, .. } => means.ncols(),
            Sampler::Circle { .. } => 2,
            Sampler::Table { features, .. } => features.ncols(),
        }
    }

    fn draw<R: Rng>(&self, class: usize, rng: &mut R, out: &mut [f64]) {
        match self {
            Sampler::Gaussian { means, chols } => {
                correlated_normal(rng, &chols[class], means.row(class), 1.0, out);
            }
            Sampler::T { means, chol, chi, dof } => {
                let scale = (chi.sample(rng) / dof).sqrt().recip();
                correlated_normal(rng, chol, means.row(class), scale, out);
            }
            Sampler::Circle { centers, radius } => {
                let u: f64 = rng.sample(Uniform::new(0.0, 1.0).expect("valid range"));
                let theta: f64 = rng.sample(Uniform::new(0.0, std::f64::consts::TAU).expect("valid range"));
                let r = radius * u.sqrt();
                out[0] = centers[[class, 0]] + r * theta.cos();
                out[1] = centers[[class, 1]] + r * theta.sin();
            }
            Sampler::Table { features, by_class } => {
                let rows = &by_class[class];
                let i = rows[rng.random_range(0..rows.len())];
                for (o, v) in out.iter_mut().zip(features.row(i)) {
                    *o = *v;
                }
            }
        }
    }

    fn draw_all<R: Rng>(&self, labels: &[usize], rng: &mut R) -> Array2<f64> {
        let p = self.dim();
        let mut x = Array2::zeros((labels.len(), p));
        let mut buf = vec![0.0; p];
        for (i, &y) in labels.iter().enumerate() {
            self.draw(y, rng, &mut buf);
            x.row_mut(i).assign(&ArrayView1::from(&buf[..]));
        }
        x
    }
}

fn correlated_normal<R: Rng>(rng: &mut R, chol: &Array2<f64>, mean: ArrayView1<f64>, scale: f64, out: &mut [f64]) {
    let p = mean.len();
    let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    for i in 0..p {
        let mut v = 0.0;
        for j in 0..=i {
            v += chol[[i, j]] * z[j];
        }
        out[i] = mean[i] + scale * v;
    }
}

fn draw_categorical<R: Rng>(probs: ArrayView1<f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding left u above the cumulative sum: return the last positive class
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Labels in fixed counts, class by class.
pub fn fixed_count_labels(counts: &[usize]) -> Vec<usize> {
    counts.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat_n(k, c)).collect()
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("scenario needs K ≥ 2"));
        }
        if let Some(w) = &self.class_probs {
            check_classes(w.len(), self.k)?;
            check_simplex(ArrayView1::from(&w[..]), "class_probs")?;
        }
        match &self.noise {
            NoiseSpec::ConfusionRows { m } => {
                let m = matrix(m, "confusion rows")?;
                if m.dim() != (self.k, self.k) {
                    return Err(Error::Dimension("confusion rows must be K×K".into()));
                }
                for (l, row) in m.rows().into_iter().enumerate() {
                    check_simplex(row, &format!("confusion row {l}"))?;
                }
            }
            NoiseSpec::TransitionEta { eta } => {
                transition_eta(self.k, *eta)?;
                if self.class_probs.is_none() && !matches!(self.family, Family::Custom { .. }) {
                    return Err(Error::invalid("transition noise needs class_probs"));
                }
            }
            NoiseSpec::None => {
                if self.class_probs.is_none() && !matches!(self.family, Family::Custom { .. }) {
                    return Err(Error::invalid("scenario needs class_probs"));
                }
            }
        }
        match &self.task {
            Task::Binary { alpha, delta } => {
                if self.k != 2 {
                    return Err(Error::invalid("binary task needs K = 2"));
                }
                if !(*alpha > 0.0 && *alpha < 1.0) || !(*delta > 0.0 && *delta < 1.0) {
                    return Err(Error::invalid("alpha and delta must lie in (0, 1)"));
                }
            }
            Task::Npmc { spec } => spec.validate(self.k)?,
        }
        if self.eval.per_class.is_none() && self.eval.size.is_none() {
            return Err(Error::invalid("eval needs per_class or size"));
        }
        self.family.sampler(self.k)?;
        self.basis_for(self.family.dim()?)?;
        Ok(())
    }

    pub fn basis_for(&self, p: usize) -> Result<Basis> {
        Basis::from_kind(&self.basis, p)
    }

    /// Clean class proportions; uniform when only confusion rows are given.
    pub fn class_weights(&self) -> Result<Array1<f64>> {
        match (&self.class_probs, &self.noise) {
            (Some(w), _) => Ok(Array1::from(w.clone())),
            (None, NoiseSpec::ConfusionRows { m }) => {
                let m = matrix(m, "confusion rows")?;
                Ok(m.t().dot(&Array1::from_elem(self.k, 1.0 / self.k as f64)))
            }
            (None, _) => Ok(Array1::from_elem(self.k, 1.0 / self.k as f64)),
        }
    }

    /// Draws `n` clean points with labels from the class proportions.
    pub fn sample_clean<R: Rng>(&self, n: usize, rng: &mut R) -> Result<LabeledSample> {
        let sampler = self.family.sampler(self.k)?;
        let w = self.class_weights()?;
        let labels: Vec<usize> = (0..n).map(|_| draw_categorical(w.view(), rng)).collect();
        let features = sampler.draw_all(&labels, rng);
        Ok(LabeledSample { features, true_labels: labels })
    }

    /// Clean points in fixed per-class counts.
    pub fn sample_clean_counts<R: Rng>(&self, counts: &[usize], rng: &mut R) -> Result<LabeledSample> {
        check_classes(counts.len(), self.k)?;
        let sampler = self.family.sampler(self.k)?;
        let labels = fixed_count_labels(counts);
        let features = sampler.draw_all(&labels, rng);
        Ok(LabeledSample { features, true_labels: labels })
    }

    /// Training sample of the given size (per noisy class for confusion rows).
    pub fn sample_training(&self, n: usize, root: u64, rep: u64) -> Result<NoisySample> {
        let mut rng = rng_for(root, rep, Purpose::Train);
        match &self.noise {
            NoiseSpec::ConfusionRows { m } => {
                let m = matrix(m, "confusion rows")?;
                let sampler = self.family.sampler(self.k)?;
                let noisy = fixed_count_labels(&vec![n; self.k]);
                let truth: Vec<usize> = noisy.iter().map(|&l| draw_categorical(m.row(l), &mut rng)).collect();
                let features = sampler.draw_all(&truth, &mut rng);
                let w_tilde = Array1::from_elem(self.k, 1.0 / self.k as f64);
                let noise = NoiseMatrices::from_confusion(&m, &w_tilde)?;
                Ok(NoisySample { features, noisy_labels: noisy, true_labels: truth, noise })
            }
            spec => {
                let clean = self.sample_clean(n, &mut rng)?;
                let mut noise_rng = rng_for(root, rep, Purpose::Noise);
                let (noisy, noise) = inject_noise(&clean.true_labels, self.k, spec, &self.class_weights()?, &mut noise_rng)?;
                Ok(NoisySample {
                    features: clean.features,
                    noisy_labels: noisy,
                    true_labels: clean.true_labels,
                    noise,
                })
            }
        }
    }

    /// Clean evaluation set.
    pub fn sample_eval(&self, root: u64, rep: u64) -> Result<LabeledSample> {
        let mut rng = rng_for(root, rep, Purpose::Eval);
        match (self.eval.per_class, self.eval.size) {
            (Some(c), _) => self.sample_clean_counts(&vec![c; self.k], &mut rng),
            (None, Some(m)) => self.sample_clean(m, &mut rng),
            (None, None) => Err(Error::invalid("eval needs per_class or size")),
        }
    }

    /// Generating transition matrix and class proportions.
    pub fn true_noise(&self) -> Result<NoiseMatrices> {
        match &self.noise {
            NoiseSpec::ConfusionRows { m } => {
                let m = matrix(m, "confusion rows")?;
                NoiseMatrices::from_confusion(&m, &Array1::from_elem(self.k, 1.0 / self.k as f64))
            }
            NoiseSpec::TransitionEta { eta } => complete_noise_matrices(&transition_eta(self.k, *eta)?, &self.class_weights()?),
            NoiseSpec::None => complete_noise_matrices(&Array2::eye(self.k), &self.class_weights()?),
        }
    }
}

/// Flips each clean label `k` to `l` with probability `T_lk`.
///
/// Confusion rows are converted to the equivalent transition matrix under
/// equal noisy-class proportions.
pub fn inject_noise<R: Rng>(
    true_labels: &[usize],
    k: usize,
    spec: &NoiseSpec,
    w: &Array1<f64>,
    rng: &mut R,
) -> Result<(Vec<usize>, NoiseMatrices)> {
    let noise = match spec {
        NoiseSpec::TransitionEta { eta } => complete_noise_matrices(&transition_eta(k, *eta)?, w)?,
        NoiseSpec::None => complete_noise_matrices(&Array2::eye(k), w)?,
        NoiseSpec::ConfusionRows { m } => {
            let m = matrix(m, "confusion rows")?;
            NoiseMatrices::from_confusion(&m, &Array1::from_elem(k, 1.0 / k as f64))?
        }
    };
    if let Some(&y) = true_labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid(format!("label {y} outside [0, {k})")));
    }
    let noisy = true_labels.iter().map(|&y| draw_categorical(noise.t.column(y), rng)).collect();
    Ok((noisy, noise))
}

/// Exact tilts for a Gaussian family and the basis they require.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleTilts {
    pub gamma: Array1<f64>,
    pub beta: Array2<f64>,
    pub basis: Basis,
}

pub fn oracle_drm_params(family: &Family) -> Result<OracleTilts> {
    let Family::Gaussian { means, cov } = family else {
        return Err(Error::Unsupported("closed-form tilts exist only for Gaussian families".into()));
    };
    let mu = matrix(means, "means")?;
    let (k, p) = mu.dim();
    let covs: Vec<Array2<f64>> = match cov {
        Covariance::Shared(c) => vec![matrix(c, "covariance")?; k],
        Covariance::PerClass(cs) => cs.iter().map(|c| matrix(c, "covariance")).collect::<Result<_>>()?,
    };
    check_classes(covs.len(), k)?;
    if covs.iter().all(|c| c == &covs[0]) {
        let inv = inverse_spd(&covs[0]).ok_or_else(|| Error::invalid("covariance is not positive definite"))?;
        let quad = |j: usize| mu.row(j).dot(&inv.dot(&mu.row(j)));
        let mut gamma = Array1::zeros(k);
        let mut beta = Array2::zeros((k, p));
        for j in 1..k {
            gamma[j] = -0.5 * (quad(j) - quad(0));
            beta.row_mut(j).assign(&inv.dot(&(&mu.row(j) - &mu.row(0))));
        }
        return Ok(OracleTilts { gamma, beta, basis: Basis::Identity { p } });
    }
    let mut var = Vec::with_capacity(k);
    for c in &covs {
        let s = c[[0, 0]];
        if c != &(Array2::<f64>::eye(p) * s) || !(s > 0.0) {
            return Err(Error::Unsupported("unequal covariances must be spherical".into()));
        }
        var.push(s);
    }
    let mut gamma = Array1::zeros(k);
    let mut beta = Array2::zeros((k, 2 * p));
    let sq0 = mu.row(0).dot(&mu.row(0));
    for j in 1..k {
        let sqj = mu.row(j).dot(&mu.row(j));
        gamma[j] = sq0 / (2.0 * var[0]) - sqj / (2.0 * var[j]) + 0.5 * p as f64 * (var[0] / var[j]).ln();
        for c in 0..p {
            beta[[j, c]] = mu[[j, c]] / var[j] - mu[[0, c]] / var[0];
            beta[[j, p + c]] = 0.5 * (1.0 / var[0] - 1.0 / var[j]);
        }
    }
    Ok(OracleTilts { gamma, beta, basis: Basis::QuadraticDiagonal { p } })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(means: Vec<Vec<f64>>, cov: Covariance) -> Family {
        Family::Gaussian { means, cov }
    }

    #[test]
    fn eta_matrix_columns() {
        let t = transition_eta(3, 0.1).unwrap();
        assert!((t[[0, 1]] - 0.1 / 3.0).abs() < 1e-15);
        assert!((t[[1, 1]] - (1.0 - 0.2 / 3.0)).abs() < 1e-15);
        assert_eq!(transition_eta(4, 0.0).unwrap(), Array2::<f64>::eye(4));
        assert!(transition_eta(2, 3.0).is_err());
    }

    #[test]
    fn identical_classes_have_zero_tilt() {
        let f = gauss(vec![vec![1.0, 2.0]; 2], Covariance::Shared(vec![vec![1.0, 0.3], vec![0.3, 2.0]]));
        let o = oracle_drm_params(&f).unwrap();
        assert!(o.gamma.iter().chain(o.beta.iter()).all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn non_spherical_unequal_is_unsupported() {
        let f = gauss(
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            Covariance::PerClass(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![2.0, 0.5], vec![0.5, 2.0]]]),
        );
        assert!(matches!(oracle_drm_params(&f), Err(Error::Unsupported(_))));
    }

    #[test]
    fn circle_points_stay_inside() {
        let s = Scenario::from_json(
            r#"{"name":"c","K":2,"family":{"type":"uniform_circle","centers":[[0,0],[1,1]],"radius":1.0},
                "class_probs":[0.5,0.5],"noise":{"type":"none"},"task":{"type":"binary","alpha":0.05},
                "n":100,"eval":{"per_class":10}}"#,
        )
        .unwrap();
        let d = s.sample_clean(5000, &mut rng_for(3, 0, Purpose::Train)).unwrap();
        for (x, &y) in d.features.outer_iter().zip(&d.true_labels) {
            let c = y as f64;
            assert!(((x[0] - c).powi(2) + (x[1] - c).powi(2)).sqrt() <= 1.0);
        }
    }

    #[test]
    fn confusion_rows_fixed_counts() {
        let s = Scenario::from_json(
            r#"{"name":"a","K":2,"family":{"type":"gaussian","means":[[0,0],[1,1]],"cov":[[1,0],[0,1]]},
                "noise":{"type":"confusion_rows","m":[[1,0],[0,1]]},"task":{"type":"binary","alpha":0.05},
                "n":50,"eval":{"per_class":10}}"#,
        )
        .unwrap();
        let d = s.sample_training(50, 1, 0).unwrap();
        assert_eq!(d.noisy_labels.iter().filter(|&&y| y == 0).count(), 50);
        assert_eq!(d.noisy_labels.len(), 100);
        assert_eq!(d.noisy_labels, d.true_labels);
        let e = s.sample_eval(1, 0).unwrap();
        assert_eq!(e.true_labels.iter().filter(|&&y| y == 1).count(), 10);
    }
}
