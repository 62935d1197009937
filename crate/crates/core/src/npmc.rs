//! Neyman–Pearson multiclass classification through the empirical dual.
//!
//! `Ĝ(λ) = −n⁻¹ Σ_i max_k c_k(λ) π̂_k(X_i) + Σ_k ρ_k + Σ_{k∈S} λ_k(1 − α_k)`
//! with `c_k(λ) = {ρ_k + λ_k 1(k ∈ S)} / ŵ_k`, maximized by pattern search
//! over `[0, box_hi]^{|S|}`.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::em::{em_fit, EmConfig, EmFit};
use crate::error::{Error, Result};
use crate::model::persist::Feasibility;
use crate::model::{Dataset, ModelParams, NpmcSpec, PosteriorModel};

/// `{ρ_k + λ_k 1(k ∈ S)} / w_k`; `lambda` is indexed in `S` order.
pub fn coefficient(spec: &NpmcSpec, lambda: &[f64], w: ArrayView1<f64>, k: usize) -> Result<f64> {
    if k >= spec.k() || w.len() != spec.k() {
        return Err(Error::Dimension(format!("class {k} for K = {}", spec.k())));
    }
    if !(w[k] > 0.0) {
        return Err(Error::ZeroClassProportion(k));
    }
    let mult = spec.s.iter().position(|&c| c == k).map_or(0.0, |j| lambda[j]);
    Ok((spec.rho[k] + mult) / w[k])
}

fn coefficients(spec: &NpmcSpec, lambda: &[f64], w: ArrayView1<f64>) -> Result<Vec<f64>> {
    (0..spec.k()).map(|k| coefficient(spec, lambda, w, k)).collect()
}

fn argmax_first(v: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, x) in v.enumerate() {
        if x > best.1 {
            best = (k, x);
        }
    }
    best
}

/// Posteriors divided by class proportions, the only data the dual needs.
#[derive(Clone, Debug)]
pub struct DualData {
    scaled: Array2<f64>,
    rho: Vec<f64>,
    s: Vec<usize>,
    slack: Vec<f64>,
}

impl DualData {
    pub fn new(spec: &NpmcSpec, w: ArrayView1<f64>, probs: ArrayView2<f64>) -> Result<Self> {
        spec.validate(w.len())?;
        if probs.ncols() != w.len() {
            return Err(Error::Dimension("posterior width differs from K".into()));
        }
        if let Some(k) = w.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::ZeroClassProportion(k));
        }
        let mut scaled = probs.to_owned();
        for (k, mut col) in scaled.columns_mut().into_iter().enumerate() {
            col /= w[k];
        }
        Ok(DualData {
            scaled,
            rho: spec.rho.clone(),
            s: spec.s.clone(),
            slack: spec.alphas().iter().map(|a| 1.0 - a).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    fn weights(&self, lambda: &[f64]) -> Vec<f64> {
        let mut c = self.rho.clone();
        for (j, &k) in self.s.iter().enumerate() {
            c[k] += lambda[j];
        }
        c
    }

    pub fn value(&self, lambda: &[f64]) -> f64 {
        let c = self.weights(lambda);
        let n = self.scaled.nrows() as f64;
        let mut total = 0.0;
        for row in self.scaled.outer_iter() {
            total += argmax_first(row.iter().zip(&c).map(|(a, b)| a * b)).1;
        }
        let linear: f64 = lambda.iter().zip(&self.slack).map(|(l, s)| l * s).sum();
        -total / n + self.rho.iter().sum::<f64>() + linear
    }

    /// Realized `max_k c_k π̂_k / ŵ_k` per sample, for consistency checks.
    pub fn realized_scores(&self, lambda: &[f64]) -> Vec<(usize, f64)> {
        let c = self.weights(lambda);
        self.scaled
            .outer_iter()
            .map(|row| argmax_first(row.iter().zip(&c).map(|(a, b)| a * b)))
            .collect()
    }
}

/// `Ĝ(λ)` for a fitted model on a dataset.
pub fn dual_objective(spec: &NpmcSpec, params: &ModelParams, data: &Dataset, lambda: &[f64]) -> Result<f64> {
    if lambda.len() != spec.s.len() || lambda.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::invalid("lambda must be nonnegative with one entry per constrained class"));
    }
    let probs = PosteriorModel::from_params(params)?.probs_matrix(data.basis_view());
    Ok(DualData::new(spec, params.w.view(), probs.view())?.value(lambda))
}

#[derive(Clone, Debug)]
pub struct HjConfig {
    pub box_hi: f64,
    /// Defaults to `box_hi / 10`.
    pub init_step: Option<f64>,
    pub shrink: f64,
    pub tol_step: f64,
    pub max_evals: usize,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for HjConfig {
    fn default() -> Self {
        HjConfig {
            box_hi: 200.0,
            init_step: None,
            shrink: 0.5,
            tol_step: 1e-4,
            max_evals: 200_000,
            n_starts: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub g_value: f64,
    pub box_hi: f64,
    pub truncated: bool,
    pub evals: usize,
}

struct Search<'f, F: Fn(&[f64]) -> f64> {
    f: &'f F,
    hi: f64,
    evals: usize,
    max_evals: usize,
}

impl<F: Fn(&[f64]) -> f64> Search<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        (self.f)(x)
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.max_evals
    }

    fn clip(&self, v: f64) -> f64 {
        v.clamp(0.0, self.hi)
    }

    fn explore(&mut self, base: &[f64], fbase: f64, step: f64) -> (Vec<f64>, f64) {
        let mut x = base.to_vec();
        let mut fx = fbase;
        for i in 0..x.len() {
            let orig = x[i];
            for dir in [1.0, -1.0] {
                let cand = self.clip(orig + dir * step);
                if cand == orig {
                    continue;
                }
                x[i] = cand;
                let fc = self.eval(&x);
                if fc > fx {
                    fx = fc;
                    break;
                }
                x[i] = orig;
            }
        }
        (x, fx)
    }

    fn run(&mut self, start: Vec<f64>, init_step: f64, shrink: f64, tol: f64) -> (Vec<f64>, f64) {
        let mut x0 = start;
        let mut f0 = self.eval(&x0);
        let mut step = init_step;
        while step >= tol && !self.exhausted() {
            let (mut x1, mut f1) = self.explore(&x0, f0, step);
            if f1 > f0 {
                loop {
                    let xp: Vec<f64> = x1.iter().zip(&x0).map(|(a, b)| self.clip(2.0 * a - b)).collect();
                    x0 = x1;
                    f0 = f1;
                    if self.exhausted() {
                        break;
                    }
                    let fp = self.eval(&xp);
                    let (x2, f2) = self.explore(&xp, fp, step);
                    if f2 > f0 {
                        x1 = x2;
                        f1 = f2;
                    } else {
                        break;
                    }
                }
            } else {
                step *= shrink;
            }
        }
        // final sweeps at the resolution itself
        loop {
            if self.exhausted() {
                break;
            }
            let (x1, f1) = self.explore(&x0, f0, tol);
            if f1 > f0 {
                x0 = x1;
                f0 = f1;
            } else {
                break;
            }
        }
        (x0, f0)
    }
}

/// Multi-start Hooke–Jeeves pattern search maximizing `f` over `[0, box_hi]^dim`.
///
/// Starts: the origin, the far corner, the axis corners, then uniform draws.
pub fn hooke_jeeves_max<F: Fn(&[f64]) -> f64>(f: F, dim: usize, config: &HjConfig) -> Result<DualState> {
    if dim == 0 {
        return Err(Error::invalid("pattern search needs at least one coordinate"));
    }
    if !(config.box_hi > 0.0) || !(config.tol_step > 0.0) || !(config.shrink > 0.0 && config.shrink < 1.0) {
        return Err(Error::invalid("box_hi, tol_step must be positive and shrink in (0, 1)"));
    }
    let hi = config.box_hi;
    let init_step = config.init_step.unwrap_or(hi / 10.0);
    let mut starts = vec![vec![0.0; dim], vec![hi; dim]];
    for i in 0..dim {
        let mut c = vec![0.0; dim];
        c[i] = hi;
        starts.push(c);
    }
    starts.truncate(config.n_starts.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    while starts.len() < config.n_starts {
        starts.push((0..dim).map(|_| rng.random_range(0.0..=hi)).collect());
    }
    let mut search = Search {
        f: &f,
        hi,
        evals: 0,
        max_evals: config.max_evals,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        if search.exhausted() {
            break;
        }
        let (x, fx) = search.run(start, init_step, config.shrink, config.tol_step);
        if best.as_ref().is_none_or(|(_, fb)| fx > *fb) {
            best = Some((x, fx));
        }
    }
    let (lambda, g_value) = best.expect("at least one start");
    Ok(DualState {
        lambda,
        g_value,
        box_hi: hi,
        truncated: search.exhausted(),
        evals: search.evals,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NpmcClassifier {
    pub lambda_hat: DualState,
    pub spec: NpmcSpec,
    pub params: ModelParams,
    pub feasibility: Feasibility,
    pub coeffs: Vec<f64>,
    posterior: PosteriorModel,
}

impl NpmcClassifier {
    pub fn new(params: ModelParams, spec: NpmcSpec, lambda_hat: DualState, feas_margin: f64) -> Result<Self> {
        spec.validate(params.k())?;
        let posterior = PosteriorModel::from_params(&params)?;
        let coeffs = coefficients(&spec, &lambda_hat.lambda, params.w.view())?;
        let ceiling: f64 = spec.rho.iter().sum();
        let feasibility = if lambda_hat.g_value >= ceiling - feas_margin && !spec.s.is_empty() {
            Feasibility::SuspectInfeasible
        } else {
            Feasibility::Feasible
        };
        Ok(NpmcClassifier {
            lambda_hat,
            spec,
            params,
            feasibility,
            coeffs,
            posterior,
        })
    }

    /// `argmax_k c_k π̂_k(x)`, ties to the smallest index.
    pub fn classify(&self, gx: ArrayView1<f64>) -> usize {
        let p = self.posterior.probs(gx);
        argmax_first(p.iter().zip(&self.coeffs).map(|(a, b)| a * b)).0
    }

    pub fn classify_all(&self, gx: ArrayView2<f64>) -> Vec<usize> {
        self.posterior
            .probs_matrix(gx)
            .outer_iter()
            .map(|p| argmax_first(p.iter().zip(&self.coeffs).map(|(a, b)| a * b)).0)
            .collect()
    }
}

pub const DEFAULT_FEAS_MARGIN: f64 = 1e-6;

/// Dual maximization for fixed parameters on the basis view `gx`.
pub fn npmc_from_params(
    params: ModelParams,
    gx: ArrayView2<f64>,
    spec: &NpmcSpec,
    hj: &HjConfig,
    feas_margin: f64,
) -> Result<NpmcClassifier> {
    spec.validate(params.k())?;
    let probs = PosteriorModel::from_params(&params)?.probs_matrix(gx);
    let dual = DualData::new(spec, params.w.view(), probs.view())?;
    let state = if dual.dim() == 0 {
        DualState {
            lambda: Vec::new(),
            g_value: dual.value(&[]),
            box_hi: hj.box_hi,
            truncated: false,
            evals: 1,
        }
    } else {
        hooke_jeeves_max(|l| dual.value(l), dual.dim(), hj)?
    };
    NpmcClassifier::new(params, spec.clone(), state, feas_margin)
}

pub fn fit_npmc(
    data: &Dataset,
    spec: &NpmcSpec,
    em_config: &EmConfig,
    hj: &HjConfig,
) -> Result<(NpmcClassifier, EmFit)> {
    spec.validate(data.k())?;
    let fit = em_fit(data, data.k(), em_config, None)?;
    let clf = npmc_from_params(fit.params.clone(), data.basis_view(), spec, hj, DEFAULT_FEAS_MARGIN)?;
    Ok((clf, fit))
}
