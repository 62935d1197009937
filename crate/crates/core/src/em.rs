//! EM maximization of the profile empirical likelihood under label noise.
//!
//! One iteration maps `θ_t` to `θ_{t+1}`:
//! responsibilities `ω` from `θ_t`, then `w = ω_·k`, a transition update,
//! a weighted multinomial logistic fit for the tilts, and point masses
//! `p_i = 1 / (n Σ_k ω_·k exp(γ_k + β_k·g_i))`.
//!
//! Restart `r` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `r`.

use std::io::Write;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{validate, Dataset, ModelParams, ProfileWeights};
use crate::numeric::log_sum_exp;
use crate::wml::{design_matrix, wml_fit, WmlConfig, WmlProblem};

/// Responsibilities below this mass abort a restart.
pub const MIN_CLASS_MASS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum TUpdate {
    Plain,
    /// Lower bounds `ξ_k` on the diagonal.
    Constrained(Vec<f64>),
    /// Diagonal penalty weights `η_k`.
    Penalized(Vec<f64>),
    /// `T` stays at its initial value (identity unless an init is given).
    Frozen,
}

#[derive(Clone, Debug)]
pub struct EmConfig {
    pub epsilon: f64,
    pub max_iter: usize,
    pub n_restarts: usize,
    pub seed: u64,
    pub t_update: TUpdate,
    pub ridge: f64,
    pub wml_tol: f64,
    pub wml_max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            epsilon: 1e-6,
            max_iter: 2000,
            n_restarts: 5,
            seed: 0,
            t_update: TUpdate::Plain,
            ridge: 0.0,
            wml_tol: 1e-9,
            wml_max_iter: 200,
        }
    }
}

impl EmConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.n_restarts == 0 {
            return Err(Error::invalid("at least one restart is required"));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::invalid("ridge must be nonnegative"));
        }
        match &self.t_update {
            TUpdate::Constrained(xi) => {
                if xi.len() != k || xi.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::invalid(format!("need {k} lower bounds in [0, 1]")));
                }
            }
            TUpdate::Penalized(eta) => {
                if eta.len() != k || eta.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
                    return Err(Error::invalid(format!("need {k} finite nonnegative penalties")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn penalized(&self) -> bool {
        self.ridge > 0.0 || matches!(&self.t_update, TUpdate::Penalized(e) if e.iter().any(|&v| v > 0.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResponsibilityMatrix {
    pub omega: Array2<f64>,
    pub col_means: Array1<f64>,
}

impl ResponsibilityMatrix {
    pub fn new(omega: Array2<f64>) -> Result<Self> {
        for (i, row) in omega.outer_iter().enumerate() {
            if row.iter().any(|&v| !(v >= 0.0)) || (row.sum() - 1.0).abs() > 1e-10 {
                return Err(Error::invalid(format!("responsibility row {i} is not on the simplex")));
            }
        }
        let col_means = omega.mean_axis(Axis(0)).ok_or_else(|| Error::invalid("empty responsibilities"))?;
        Ok(ResponsibilityMatrix { omega, col_means })
    }

    /// One-hot rows for hard labels.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        let mut omega = Array2::zeros((labels.len(), k));
        for (i, &y) in labels.iter().enumerate() {
            if y >= k {
                return Err(Error::invalid(format!("label {y} outside [0, {k})")));
            }
            omega[[i, y]] = 1.0;
        }
        Self::new(omega)
    }

    pub fn n(&self) -> usize {
        self.omega.nrows()
    }

    pub fn k(&self) -> usize {
        self.omega.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmTrace {
    pub profile_logel_per_iter: Vec<f64>,
    /// Penalized objective actually ascended; equal to the log-EL without penalties.
    pub objective_per_iter: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index_of_best: usize,
    /// Final objective of every restart, `None` for failed ones.
    pub restart_objectives: Vec<Option<f64>>,
}

impl EmTrace {
    pub fn final_logel(&self) -> f64 {
        *self.profile_logel_per_iter.last().unwrap_or(&f64::NEG_INFINITY)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "logel"])?;
        for (t, v) in self.profile_logel_per_iter.iter().enumerate() {
            w.write_record([t.to_string(), format!("{v:?}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Clone, Debug)]
pub struct EmFit {
    pub params: ModelParams,
    pub weights: ProfileWeights,
    pub trace: EmTrace,
    pub omega: ResponsibilityMatrix,
}

fn log_tilts(params: &ModelParams, gx: ArrayView2<f64>) -> Array2<f64> {
    gx.dot(&params.beta.t()) + &params.gamma
}

fn e_step_from_tilts(
    params: &ModelParams,
    tilts: &Array2<f64>,
    labels: &[usize],
) -> Result<ResponsibilityMatrix> {
    let k = params.k();
    let log_w = params.w.mapv(f64::ln);
    let log_t = params.t.mapv(f64::ln);
    let mut omega = Array2::zeros((labels.len(), k));
    let mut buf = Array1::zeros(k);
    for (i, (&y, e)) in labels.iter().zip(tilts.outer_iter()).enumerate() {
        for j in 0..k {
            buf[j] = e[j] + log_t[[y, j]] + log_w[j];
        }
        let lse = log_sum_exp(buf.view());
        if !lse.is_finite() {
            return Err(Error::DegenerateResponsibility(i));
        }
        for j in 0..k {
            omega[[i, j]] = (buf[j] - lse).exp();
        }
    }
    let col_means = omega.mean_axis(Axis(0)).expect("n ≥ 1");
    Ok(ResponsibilityMatrix { omega, col_means })
}

/// `ω_ik ∝ exp(γ_k + β_k·g_i) T[ỹ_i][k] w_k`, normalized over `k` in log space.
pub fn e_step(params: &ModelParams, data: &Dataset) -> Result<ResponsibilityMatrix> {
    check_dims(params, data)?;
    e_step_from_tilts(params, &log_tilts(params, data.basis_view()), data.labels())
}

pub fn m_step_w(omega: &ResponsibilityMatrix) -> Array1<f64> {
    let w = omega.col_means.clone();
    let s = w.sum();
    w / s
}

fn noisy_by_latent(omega: &ResponsibilityMatrix, labels: &[usize]) -> Array2<f64> {
    let k = omega.k();
    let mut a = Array2::zeros((k, k));
    for (&y, row) in labels.iter().zip(omega.omega.outer_iter()) {
        let mut ar = a.row_mut(y);
        ar += &row;
    }
    a
}

/// Transition update; `current` is returned unchanged for [`TUpdate::Frozen`].
pub fn m_step_t(
    omega: &ResponsibilityMatrix,
    labels: &[usize],
    mode: &TUpdate,
    current: &Array2<f64>,
) -> Result<Array2<f64>> {
    let k = omega.k();
    if labels.len() != omega.n() {
        return Err(Error::Dimension("labels and responsibilities differ in length".into()));
    }
    if let TUpdate::Frozen = mode {
        return Ok(current.clone());
    }
    let a = noisy_by_latent(omega, labels);
    let s = a.sum_axis(Axis(0));
    if let Some(j) = s.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::EmptyLatentClass(j, 0.0));
    }
    let mut t = Array2::zeros((k, k));
    for j in 0..k {
        match mode {
            TUpdate::Plain | TUpdate::Frozen => {
                for l in 0..k {
                    t[[l, j]] = a[[l, j]] / s[j];
                }
            }
            TUpdate::Penalized(eta) => {
                for l in 0..k {
                    let bonus = if l == j { eta[j] } else { 0.0 };
                    t[[l, j]] = (a[[l, j]] + bonus) / (s[j] + eta[j]);
                }
            }
            TUpdate::Constrained(xi) => {
                let plain_diag = a[[j, j]] / s[j];
                if plain_diag >= xi[j] {
                    for l in 0..k {
                        t[[l, j]] = a[[l, j]] / s[j];
                    }
                } else {
                    if xi[j] >= 1.0 {
                        return Err(Error::SingularConstraint(j));
                    }
                    let off = s[j] - a[[j, j]];
                    for l in 0..k {
                        t[[l, j]] = if l == j {
                            xi[j]
                        } else {
                            (1.0 - xi[j]) * a[[l, j]] / off
                        };
                    }
                }
            }
        }
    }
    Ok(t)
}

fn tilt_from_coeffs(coeffs: &Array2<f64>, col_means: ArrayView1<f64>) -> (Array1<f64>, Array2<f64>) {
    let k = coeffs.nrows();
    let mut gamma = Array1::zeros(k);
    for j in 1..k {
        gamma[j] = coeffs[[j, 0]] - (col_means[j] / col_means[0]).ln();
    }
    let mut beta = coeffs.slice(s![.., 1..]).to_owned();
    beta.row_mut(0).fill(0.0);
    (gamma, beta)
}

fn coeffs_from_tilt(params: &ModelParams) -> Array2<f64> {
    let k = params.k();
    let mut c = Array2::zeros((k, params.d() + 1));
    for j in 1..k {
        c[[j, 0]] = params.gamma[j] + (params.w[j] / params.w[0]).ln();
        c.slice_mut(s![j, 1..]).assign(&params.beta.row(j));
    }
    c
}

fn tilt_step(
    omega: &ResponsibilityMatrix,
    design: ArrayView2<f64>,
    ridge: f64,
    wml: &WmlConfig,
) -> Result<(Array1<f64>, Array2<f64>, Array2<f64>)> {
    if let Some(j) = omega.col_means.iter().position(|&v| !(v >= MIN_CLASS_MASS)) {
        return Err(Error::EmptyLatentClass(j, omega.col_means[j]));
    }
    let problem = WmlProblem::new(design, omega.omega.view(), ridge)?;
    let coeffs = match wml_fit(&problem, wml) {
        Ok(sol) => sol.coeffs,
        // the last accepted iterate still raises the objective, which is all EM needs
        Err(Error::NonConvergence { last, grad_norm, .. }) if last.iter().all(|v| v.is_finite()) => {
            log::debug!("tilt update stopped early at gradient {grad_norm:.3e}");
            *last
        }
        Err(e) => return Err(e),
    };
    let (gamma, beta) = tilt_from_coeffs(&coeffs, omega.col_means.view());
    Ok((gamma, beta, coeffs))
}

/// Weighted multinomial logistic fit on `ω`, with intercepts shifted by `−ln(ω_·k/ω_·0)`.
pub fn m_step_tilt(
    omega: &ResponsibilityMatrix,
    data: &Dataset,
    ridge: f64,
) -> Result<(Array1<f64>, Array2<f64>)> {
    if omega.n() != data.n() || omega.k() != data.k() {
        return Err(Error::Dimension("responsibilities do not match the dataset".into()));
    }
    let design = design_matrix(data.basis_view());
    let (gamma, beta, _) = tilt_step(omega, design.view(), ridge, &WmlConfig::default())?;
    Ok((gamma, beta))
}

/// Profile weights and their logarithms, which stay finite when `p_i` underflows.
fn profile_weights_from_tilts(tilts: &Array2<f64>, col_means: ArrayView1<f64>) -> (ProfileWeights, Array1<f64>) {
    let n = tilts.nrows();
    let log_m = col_means.mapv(f64::ln);
    let log_p = Array1::from_iter(
        tilts
            .outer_iter()
            .map(|e| -log_sum_exp((&e + &log_m).view()) - (n as f64).ln()),
    );
    let weights = ProfileWeights {
        p: log_p.mapv(f64::exp),
        nu: col_means.slice(s![1..]).to_owned(),
    };
    (weights, log_p)
}

/// `p_i = n⁻¹ {Σ_k ω_·k exp(γ_k + β_k·g_i)}⁻¹` and `ν_k = ω_·k`.
pub fn profile_weights(
    params: &ModelParams,
    omega_prev: &ResponsibilityMatrix,
    data: &Dataset,
) -> Result<ProfileWeights> {
    check_dims(params, data)?;
    if omega_prev.n() != data.n() {
        return Err(Error::Dimension("responsibilities do not match the dataset".into()));
    }
    Ok(profile_weights_from_tilts(&log_tilts(params, data.basis_view()), omega_prev.col_means.view()).0)
}

fn logel_from_tilts(params: &ModelParams, tilts: &Array2<f64>, log_p: ArrayView1<f64>, labels: &[usize]) -> f64 {
    let k = params.k();
    let log_w = params.w.mapv(f64::ln);
    let log_t = params.t.mapv(f64::ln);
    let mut total = 0.0;
    let mut buf = Array1::zeros(k);
    for ((&y, e), &lp) in labels.iter().zip(tilts.outer_iter()).zip(log_p.iter()) {
        for j in 0..k {
            buf[j] = e[j] + log_t[[y, j]] + log_w[j];
        }
        total += log_sum_exp(buf.view()) + lp;
    }
    total
}

/// Profile log-EL on raw arrays; `−∞` signals a zero inside some logarithm.
pub fn profile_log_el_parts(
    params: &ModelParams,
    p: ArrayView1<f64>,
    gx: ArrayView2<f64>,
    labels: &[usize],
) -> Result<f64> {
    if gx.nrows() != labels.len() || p.len() != labels.len() || gx.ncols() != params.d() {
        return Err(Error::Dimension("profile log-EL inputs disagree in shape".into()));
    }
    if labels.iter().any(|&y| y >= params.k()) {
        return Err(Error::invalid("label outside [0, K)"));
    }
    Ok(logel_from_tilts(params, &log_tilts(params, gx), p.mapv(f64::ln).view(), labels))
}

/// `Σ_i ln Σ_k w_k T[ỹ_i][k] exp(γ_k + β_k·g_i) + Σ_i ln p_i`.
pub fn profile_log_el(params: &ModelParams, weights: &ProfileWeights, data: &Dataset) -> Result<f64> {
    check_dims(params, data)?;
    profile_log_el_parts(params, weights.p.view(), data.basis_view(), data.labels())
}

fn check_dims(params: &ModelParams, data: &Dataset) -> Result<()> {
    if params.k() != data.k() || params.d() != data.d() {
        return Err(Error::Dimension(format!(
            "parameters are K={}, d={}; dataset is K={}, d={}",
            params.k(),
            params.d(),
            data.k(),
            data.d()
        )));
    }
    Ok(())
}

fn penalty(params: &ModelParams, config: &EmConfig) -> f64 {
    let mut pen = config.ridge * params.beta.iter().map(|b| b * b).sum::<f64>();
    if let TUpdate::Penalized(eta) = &config.t_update {
        for (j, &e) in eta.iter().enumerate() {
            if e > 0.0 {
                pen -= e * params.t[[j, j]].ln();
            }
        }
    }
    pen
}

/// Shared state for the iterations of one fit.
struct Workspace<'a> {
    data: &'a Dataset,
    design: Array2<f64>,
    config: &'a EmConfig,
    wml: WmlConfig,
}

/// Result of a single EM iteration.
#[derive(Clone, Debug)]
pub struct EmStep {
    pub params: ModelParams,
    pub omega: ResponsibilityMatrix,
    pub weights: ProfileWeights,
    pub logel: f64,
    pub objective: f64,
    coeffs: Array2<f64>,
    tilts: Array2<f64>,
}

impl<'a> Workspace<'a> {
    fn new(data: &'a Dataset, config: &'a EmConfig) -> Self {
        Workspace {
            data,
            design: design_matrix(data.basis_view()),
            config,
            wml: WmlConfig {
                tol: config.wml_tol,
                max_iter: config.wml_max_iter,
                init: None,
            },
        }
    }

    fn step(&self, params: &ModelParams, tilts: &Array2<f64>, warm: Option<&Array2<f64>>) -> Result<EmStep> {
        let labels = self.data.labels();
        let omega = e_step_from_tilts(params, tilts, labels)?;
        if let Some(j) = omega.col_means.iter().position(|&v| !(v >= MIN_CLASS_MASS)) {
            return Err(Error::EmptyLatentClass(j, omega.col_means[j]));
        }
        let w = m_step_w(&omega);
        let t = m_step_t(&omega, labels, &self.config.t_update, &params.t)?;
        let wml = WmlConfig {
            init: warm.cloned(),
            ..self.wml.clone()
        };
        let (gamma, beta, coeffs) = tilt_step(&omega, self.design.view(), self.config.ridge, &wml)?;
        let next = ModelParams { w, gamma, beta, t };
        validate(&next, self.data.k(), self.data.d())?;
        let tilts = log_tilts(&next, self.data.basis_view());
        let (weights, log_p) = profile_weights_from_tilts(&tilts, omega.col_means.view());
        let logel = logel_from_tilts(&next, &tilts, log_p.view(), labels);
        let objective = logel - penalty(&next, self.config);
        Ok(EmStep {
            params: next,
            omega,
            weights,
            logel,
            objective,
            coeffs,
            tilts,
        })
    }

    fn initial_logel(&self, params: &ModelParams) -> (f64, f64, Array2<f64>) {
        let tilts = log_tilts(params, self.data.basis_view());
        let (_, log_p) = profile_weights_from_tilts(&tilts, params.w.view());
        let logel = logel_from_tilts(params, &tilts, log_p.view(), self.data.labels());
        (logel, logel - penalty(params, self.config), tilts)
    }
}

/// One EM iteration from `params`.
pub fn em_step(params: &ModelParams, data: &Dataset, config: &EmConfig) -> Result<EmStep> {
    check_dims(params, data)?;
    validate(params, data.k(), data.d())?;
    let ws = Workspace::new(data, config);
    let tilts = log_tilts(params, data.basis_view());
    ws.step(params, &tilts, Some(&coeffs_from_tilt(params)))
}

struct RestartRun {
    fit: EmFit,
    objectives: Vec<f64>,
}

fn run_restart(
    ws: &Workspace,
    init: ModelParams,
    observer: &(dyn Fn(usize, usize, &ModelParams) + Sync),
    restart: usize,
) -> Result<RestartRun> {
    let (logel0, obj0, mut tilts) = ws.initial_logel(&init);
    let mut logels = vec![logel0];
    let mut objectives = vec![obj0];
    let mut params = init;
    let mut coeffs = coeffs_from_tilt(&params);
    let mut last: Option<(ResponsibilityMatrix, ProfileWeights)> = None;
    let mut converged = false;
    let mut iterations = 0;
    observer(restart, 0, &params);
    while iterations < ws.config.max_iter {
        let step = ws.step(&params, &tilts, Some(&coeffs))?;
        iterations += 1;
        if !step.objective.is_finite() {
            return Err(Error::invalid(format!("objective became {} at iteration {iterations}", step.objective)));
        }
        observer(restart, iterations, &step.params);
        let gain = step.objective - objectives.last().copied().unwrap_or(f64::NEG_INFINITY);
        logels.push(step.logel);
        objectives.push(step.objective);
        params = step.params;
        coeffs = step.coeffs;
        tilts = step.tilts;
        last = Some((step.omega, step.weights));
        if gain < ws.config.epsilon {
            converged = true;
            break;
        }
    }
    let (omega, weights) = match last {
        Some(v) => v,
        None => {
            let omega = e_step_from_tilts(&params, &tilts, ws.data.labels())?;
            let (weights, _) = profile_weights_from_tilts(&tilts, params.w.view());
            (omega, weights)
        }
    };
    Ok(RestartRun {
        fit: EmFit {
            params,
            weights,
            omega,
            trace: EmTrace {
                profile_logel_per_iter: logels,
                objective_per_iter: Vec::new(),
                iterations,
                converged,
                restart_index_of_best: restart,
                restart_objectives: Vec::new(),
            },
        },
        objectives,
    })
}

/// Hard-label multinomial logistic fit used to seed the tilts.
fn seed_tilts(ws: &Workspace, w: &Array1<f64>) -> (Array1<f64>, Array2<f64>) {
    let data = ws.data;
    let omega = ResponsibilityMatrix::from_labels(data.labels(), data.k()).expect("labels validated");
    let problem = WmlProblem::new(ws.design.view(), omega.omega.view(), ws.config.ridge)
        .expect("one-hot weights are valid");
    let coeffs = match wml_fit(&problem, &WmlConfig { max_iter: 50, ..ws.wml.clone() }) {
        Ok(sol) => sol.coeffs,
        Err(Error::NonConvergence { last, .. }) => *last,
        Err(_) => Array2::zeros((data.k(), data.d() + 1)),
    };
    let (gamma, beta) = tilt_from_coeffs(&coeffs, w.view());
    (gamma, beta)
}

fn project_constraints(t: &mut Array2<f64>, mode: &TUpdate) {
    if let TUpdate::Constrained(xi) = mode {
        let k = t.nrows();
        for j in 0..k {
            let d = t[[j, j]];
            if d < xi[j] {
                let off = 1.0 - d;
                for l in 0..k {
                    t[[l, j]] = if l == j {
                        xi[j]
                    } else if off > 0.0 {
                        t[[l, j]] * (1.0 - xi[j]) / off
                    } else {
                        (1.0 - xi[j]) / (k - 1) as f64
                    };
                }
            }
        }
    }
}

/// Starting point for restart `r`: noisy label frequencies, `T = (1 − u)I + u/K`.
pub fn initial_params(data: &Dataset, config: &EmConfig, restart: usize) -> Result<ModelParams> {
    let ws = Workspace::new(data, config);
    let w = data.label_frequencies();
    let (gamma, beta) = seed_tilts(&ws, &w);
    Ok(random_start(data, config, restart, w, gamma, beta))
}

fn random_start(
    data: &Dataset,
    config: &EmConfig,
    restart: usize,
    w: Array1<f64>,
    gamma: Array1<f64>,
    beta: Array2<f64>,
) -> ModelParams {
    let k = data.k();
    let mut t = Array2::eye(k);
    if config.t_update != TUpdate::Frozen {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(restart as u64);
        let u: f64 = rng.random_range(0.05..0.3);
        t = t * (1.0 - u) + u / k as f64;
        project_constraints(&mut t, &config.t_update);
    }
    ModelParams { w, gamma, beta, t }
}

/// Runs every restart and keeps the one with the highest final objective.
pub fn em_fit(data: &Dataset, k: usize, config: &EmConfig, init: Option<&ModelParams>) -> Result<EmFit> {
    em_fit_observed(data, k, config, init, &|_, _, _| {})
}

/// [`em_fit`] with a callback `(restart, iteration, params)` on every iterate.
pub fn em_fit_observed(
    data: &Dataset,
    k: usize,
    config: &EmConfig,
    init: Option<&ModelParams>,
    observer: &(dyn Fn(usize, usize, &ModelParams) + Sync),
) -> Result<EmFit> {
    if k != data.k() {
        return Err(Error::Dimension(format!("K={k} but the dataset has K={}", data.k())));
    }
    config.validate(k)?;
    if let Some(p) = init {
        validate(p, k, data.d())?;
    }
    let freq = data.label_frequencies();
    if let Some(l) = freq.iter().position(|&f| f == 0.0) {
        return Err(Error::EmptyClass(l));
    }
    let ws = Workspace::new(data, config);
    let needs_seed = init.is_none() || config.n_restarts > 1;
    let seed = needs_seed.then(|| seed_tilts(&ws, &freq));

    let runs: Vec<Result<RestartRun>> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| {
            let start = match (r, init) {
                (0, Some(p)) => p.clone(),
                _ => {
                    let (gamma, beta) = seed.clone().expect("seeded");
                    random_start(data, config, r, freq.clone(), gamma, beta)
                }
            };
            run_restart(&ws, start, observer, r)
        })
        .collect();

    let restart_objectives: Vec<Option<f64>> = runs
        .iter()
        .map(|r| r.as_ref().ok().and_then(|run| run.objectives.last().copied()))
        .collect();
    let mut best: Option<(usize, RestartRun)> = None;
    let mut last_error = String::new();
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                let score = run.objectives.last().copied().unwrap_or(f64::NEG_INFINITY);
                let better = match &best {
                    None => true,
                    Some((_, b)) => score > b.objectives.last().copied().unwrap_or(f64::NEG_INFINITY),
                };
                if better {
                    best = Some((r, run));
                }
            }
            Err(e) => {
                log::debug!("restart {r} failed: {e}");
                last_error = e.to_string();
            }
        }
    }
    match best {
        Some((r, run)) => {
            let mut fit = run.fit;
            fit.trace.restart_index_of_best = r;
            fit.trace.objective_per_iter = run.objectives;
            fit.trace.restart_objectives = restart_objectives;
            if !config.penalized() {
                debug_assert_eq!(fit.trace.objective_per_iter, fit.trace.profile_logel_per_iter);
            }
            Ok(fit)
        }
        None => Err(Error::AllRestartsFailed {
            restarts: config.n_restarts,
            last_error,
            best_trace: None,
        }),
    }
}
