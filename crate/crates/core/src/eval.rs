//! Class-specific errors and the Monte Carlo experiment harness.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;

use crate::datagen::{oracle_drm_params, rng_for, Purpose, Scenario, Task};
use crate::em::{em_fit, EmConfig, EmFit, TUpdate};
use crate::error::{Error, Result};
use crate::model::{complete_noise_matrices, Dataset, ModelParams, NpmcSpec, PosteriorModel};
use crate::np_binary::BinaryNpClassifier;
use crate::npmc::{npmc_from_params, HjConfig, DEFAULT_FEAS_MARGIN};
use crate::numeric::{mean, sd};
use crate::umbrella::{npc_bounds, umbrella_with_levels, Corruption, UmbrellaConfig};

/// `R_k` = share of class-`k` points predicted as something else.
pub fn class_errors(predicted: &[usize], truth: &[usize], k: usize) -> Result<Vec<f64>> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension("prediction and label counts differ".into()));
    }
    let mut wrong = vec![0usize; k];
    let mut count = vec![0usize; k];
    for (&p, &y) in predicted.iter().zip(truth) {
        if y >= k {
            return Err(Error::invalid(format!("label {y} outside [0, {k})")));
        }
        count[y] += 1;
        if p != y {
            wrong[y] += 1;
        }
    }
    if let Some(c) = count.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass(c));
    }
    Ok(wrong.iter().zip(&count).map(|(&w, &c)| w as f64 / c as f64).collect())
}

pub fn npmc_objective(rho: &[f64], errors: &[f64]) -> f64 {
    rho.iter().zip(errors).map(|(r, e)| r * e).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Ours,
    Vanilla,
    Oracle,
    Npc,
    NpcStar,
    NpcPlus,
    Naive,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ours,
        Method::Vanilla,
        Method::Oracle,
        Method::Npc,
        Method::NpcStar,
        Method::NpcPlus,
        Method::Naive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Vanilla => "vanilla",
            Method::Oracle => "oracle",
            Method::Npc => "npc",
            Method::NpcStar => "npc_star",
            Method::NpcPlus => "npc_plus",
            Method::Naive => "naive",
        }
    }

    fn umbrella(self) -> bool {
        matches!(self, Method::Npc | Method::NpcStar | Method::NpcPlus)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepetitionResult {
    pub method: Method,
    pub rep: u64,
    pub seed: u64,
    pub per_class_error: Vec<f64>,
    pub objective: f64,
    pub type1: Option<f64>,
    pub type2: Option<f64>,
    /// Additional diagnostics such as estimated corruption levels or coefficient error.
    pub extras: BTreeMap<String, f64>,
}

impl RepetitionResult {
    /// Flattened `(metric, value)` pairs in a fixed order.
    pub fn metrics(&self, spec: Option<&NpmcSpec>, alpha: Option<f64>) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        if let (Some(t1), Some(t2)) = (self.type1, self.type2) {
            out.push(("type1".into(), t1));
            out.push(("type2".into(), t2));
            if let Some(a) = alpha {
                out.push(("violation".into(), f64::from(u8::from(t1 > a))));
            }
        }
        for (k, e) in self.per_class_error.iter().enumerate() {
            out.push((format!("err_{k}"), *e));
        }
        if let Some(spec) = spec {
            for &k in &spec.s {
                out.push((format!("excess_{k}"), self.per_class_error[k] - spec.alpha[&k]));
            }
        }
        out.push(("objective".into(), self.objective));
        for (k, v) in &self.extras {
            out.push((k.clone(), *v));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub method: Method,
    pub rep: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Repetition ids; each id fixes its own data and fitting seeds.
    pub reps: Vec<u64>,
    pub methods: Vec<Method>,
    pub root_seed: u64,
    pub em: EmConfig,
    pub hj: HjConfig,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub scenario: String,
    pub results: Vec<RepetitionResult>,
    pub failures: Vec<Failure>,
    pub spec: Option<NpmcSpec>,
    pub alpha: Option<f64>,
}

/// Long-format rows `(method, rep, metric, value)`.
pub fn long_rows(out: &ExperimentOutput) -> Vec<(Method, u64, String, f64)> {
    out.results
        .iter()
        .flat_map(|r| {
            r.metrics(out.spec.as_ref(), out.alpha)
                .into_iter()
                .map(move |(m, v)| (r.method, r.rep, m, v))
        })
        .collect()
}

/// Per method and metric: mean and standard deviation over repetitions, ordered by rep id.
pub fn summarize(rows: &[(Method, u64, String, f64)]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, String), Vec<(u64, f64)>> = BTreeMap::new();
    let mut order: Vec<(Method, String)> = Vec::new();
    for (m, rep, metric, v) in rows {
        let key = (*m, metric.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push((*rep, *v));
    }
    order.sort_by_key(|(m, _)| *m);
    order
        .into_iter()
        .map(|key| {
            let mut vals = groups.remove(&key).expect("present");
            vals.sort_by_key(|(rep, _)| *rep);
            let v: Vec<f64> = vals.into_iter().map(|(_, v)| v).collect();
            SummaryRow {
                method: key.0,
                metric: key.1,
                mean: mean(&v),
                sd: sd(&v),
                count: v.len(),
            }
        })
        .collect()
}

impl ExperimentOutput {
    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&long_rows(self))
    }

    pub fn mean_of(&self, method: Method, metric: &str) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|r| r.method == method && r.metric == metric)
            .map(|r| r.mean)
    }

    pub fn write_long(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_long_to(std::fs::File::create(path)?)
    }

    pub fn write_long_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "rep", "metric", "value"])?;
        for (m, rep, metric, v) in long_rows(self) {
            w.write_record([m.name().to_string(), rep.to_string(), metric, format!("{v:?}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_summary_to(std::fs::File::create(path)?)
    }

    pub fn write_summary_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "metric", "mean", "sd", "reps"])?;
        for r in self.summary() {
            w.write_record([
                r.method.name().to_string(),
                r.metric,
                format!("{:?}", r.mean),
                format!("{:?}", r.sd),
                r.count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_failures(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_failures_to(std::fs::File::create(path)?)
    }

    pub fn write_failures_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "rep", "error"])?;
        for f in &self.failures {
            w.write_record([f.method.name().to_string(), f.rep.to_string(), f.error.clone()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Share of attempted `(method, rep)` pairs that succeeded.
    pub fn success_rate(&self) -> f64 {
        let total = self.results.len() + self.failures.len();
        if total == 0 {
            1.0
        } else {
            self.results.len() as f64 / total as f64
        }
    }
}

/// Mean squared error of `(γ, β)` over the non-reference classes.
pub fn coefficient_mse(est: &ModelParams, gamma: &ndarray::Array1<f64>, beta: &ndarray::Array2<f64>) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for k in 1..est.k() {
        total += (est.gamma[k] - gamma[k]).powi(2);
        count += 1;
        for (a, b) in est.beta.row(k).iter().zip(beta.row(k)) {
            total += (a - b).powi(2);
            count += 1;
        }
    }
    total / count as f64
}

pub fn validate_methods(scenario: &Scenario, methods: &[Method]) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::invalid("no methods requested"));
    }
    if let Task::Npmc { .. } = scenario.task {
        if let Some(m) = methods.iter().find(|m| m.umbrella()) {
            return Err(Error::invalid(format!("method {m} applies only to binary scenarios")));
        }
    }
    Ok(())
}

struct RepContext<'a> {
    scenario: &'a Scenario,
    config: &'a ExperimentConfig,
    rep: u64,
    em_seed: u64,
    train: Dataset,
    clean: Dataset,
    eval_gx: ndarray::Array2<f64>,
    eval_truth: Vec<usize>,
    ours: Option<std::result::Result<EmFit, String>>,
    frozen: Option<std::result::Result<EmFit, String>>,
}

impl RepContext<'_> {
    fn em_config(&self, t_update: Option<TUpdate>) -> EmConfig {
        let mut c = self.config.em.clone();
        c.seed = self.em_seed;
        if let Some(t) = t_update {
            c.t_update = t;
            c.n_restarts = 1;
        }
        c
    }

    fn ours_fit(&mut self) -> Result<EmFit> {
        if self.ours.is_none() {
            let cfg = self.em_config(None);
            self.ours = Some(em_fit(&self.train, self.train.k(), &cfg, None).map_err(|e| e.to_string()));
        }
        self.ours.clone().expect("set").map_err(Error::InvalidInput)
    }

    fn frozen_fit(&mut self) -> Result<EmFit> {
        if self.frozen.is_none() {
            let cfg = self.em_config(Some(TUpdate::Frozen));
            self.frozen = Some(em_fit(&self.train, self.train.k(), &cfg, None).map_err(|e| e.to_string()));
        }
        self.frozen.clone().expect("set").map_err(Error::InvalidInput)
    }

    fn clean_fit(&self) -> Result<EmFit> {
        let cfg = self.em_config(Some(TUpdate::Frozen));
        em_fit(&self.clean, self.clean.k(), &cfg, None)
    }

    fn finish(&self, method: Method, pred: Vec<usize>, params: Option<&ModelParams>, mut extras: BTreeMap<String, f64>) -> Result<RepetitionResult> {
        let k = self.train.k();
        let errors = class_errors(&pred, &self.eval_truth, k)?;
        if let (Some(p), Ok(oracle)) = (params, oracle_drm_params(&self.scenario.family)) {
            if oracle.basis.kind_name() == self.train.basis().kind_name() && method != Method::Naive {
                extras.insert("coef_mse".into(), coefficient_mse(p, &oracle.gamma, &oracle.beta));
            }
        }
        let (objective, type1, type2) = match &self.scenario.task {
            Task::Binary { .. } => (errors[1], Some(errors[0]), Some(errors[1])),
            Task::Npmc { spec } => (npmc_objective(&spec.rho, &errors), None, None),
        };
        Ok(RepetitionResult {
            method,
            rep: self.rep,
            seed: self.em_seed,
            per_class_error: errors,
            objective,
            type1,
            type2,
            extras,
        })
    }

    fn predict_with(&self, params: &ModelParams, method: Method) -> Result<Vec<usize>> {
        let gx = self.train.basis_view();
        match &self.scenario.task {
            Task::Binary { alpha, .. } => {
                let clf = BinaryNpClassifier::from_params(params.clone(), gx, *alpha)?;
                Ok(clf.classify_all(self.eval_gx.view()))
            }
            Task::Npmc { spec } => {
                let hj = HjConfig {
                    seed: self.em_seed ^ (method as u64),
                    ..self.config.hj.clone()
                };
                let clf = npmc_from_params(params.clone(), gx, spec, &hj, DEFAULT_FEAS_MARGIN)?;
                Ok(clf.classify_all(self.eval_gx.view()))
            }
        }
    }

    fn run(&mut self, method: Method) -> Result<RepetitionResult> {
        let mut extras = BTreeMap::new();
        match method {
            Method::Ours => {
                let fit = self.ours_fit()?;
                if self.train.k() == 2 {
                    let nm = complete_noise_matrices(&fit.params.t, &fit.params.w)?;
                    extras.insert("m0_hat".into(), nm.m[[0, 0]]);
                    extras.insert("m1_hat".into(), nm.m[[1, 0]]);
                }
                extras.insert("em_iterations".into(), fit.trace.iterations as f64);
                let pred = self.predict_with(&fit.params, method)?;
                self.finish(method, pred, Some(&fit.params), extras)
            }
            Method::Vanilla => {
                let fit = self.frozen_fit()?;
                let pred = self.predict_with(&fit.params, method)?;
                self.finish(method, pred, Some(&fit.params), extras)
            }
            Method::Oracle => {
                let fit = self.clean_fit()?;
                let pred = self.predict_with(&fit.params, method)?;
                self.finish(method, pred, Some(&fit.params), extras)
            }
            Method::Naive => {
                let fit = self.frozen_fit()?;
                let post = PosteriorModel::from_params(&fit.params)?;
                let pred = post
                    .probs_matrix(self.eval_gx.view())
                    .outer_iter()
                    .map(|p| {
                        let mut best = 0;
                        for k in 1..p.len() {
                            if p[k] > p[best] {
                                best = k;
                            }
                        }
                        best
                    })
                    .collect();
                self.finish(method, pred, None, extras)
            }
            Method::Npc | Method::NpcStar | Method::NpcPlus => {
                let Task::Binary { alpha, delta } = self.scenario.task else {
                    return Err(Error::invalid(format!("method {method} applies only to binary scenarios")));
                };
                let truth = self.scenario.true_noise()?;
                let (m0s, m1s) = (truth.m[[0, 0]], truth.m[[1, 0]]);
                let (m0, m1) = match method {
                    Method::NpcStar => (m0s, m1s),
                    Method::Npc => npc_bounds(m0s, m1s, delta),
                    _ => {
                        let fit = self.ours_fit()?;
                        let nm = complete_noise_matrices(&fit.params.t, &fit.params.w)?;
                        (nm.m[[0, 0]], nm.m[[1, 0]])
                    }
                };
                let cfg = UmbrellaConfig {
                    ridge: self.config.em.ridge,
                    ..UmbrellaConfig::new(alpha, delta, Corruption::Known { m0, m1 })
                };
                let mut rng = rng_for(self.config.root_seed, self.rep, Purpose::Split);
                let clf = umbrella_with_levels(&self.train, &cfg, m0, m1, &mut rng)?;
                extras.insert("k_star".into(), clf.k_star as f64);
                extras.insert("m0_used".into(), m0);
                extras.insert("m1_used".into(), m1);
                let pred = clf.classify_all(self.eval_gx.view());
                self.finish(method, pred, None, extras)
            }
        }
    }
}

fn run_rep(scenario: &Scenario, config: &ExperimentConfig, rep: u64) -> (Vec<RepetitionResult>, Vec<Failure>) {
    let fail_all = |e: Error| {
        let failures = config
            .methods
            .iter()
            .map(|&m| Failure {
                method: m,
                rep,
                error: e.to_string(),
            })
            .collect();
        (Vec::new(), failures)
    };
    let setup = || -> Result<RepContext> {
        let sample = scenario.sample_training(config.n, config.root_seed, rep)?;
        let p = sample.features.ncols();
        let basis = scenario.basis_for(p)?;
        let eval = scenario.sample_eval(config.root_seed, rep)?;
        let eval_gx = basis.expand(eval.features.view())?;
        Ok(RepContext {
            scenario,
            config,
            rep,
            em_seed: rng_for(config.root_seed, rep, Purpose::Fit).next_u64(),
            train: sample.dataset(basis.clone())?,
            clean: sample.clean_dataset(basis)?,
            eval_gx,
            eval_truth: eval.true_labels,
            ours: None,
            frozen: None,
        })
    };
    let mut ctx = match setup() {
        Ok(c) => c,
        Err(e) => return fail_all(e),
    };
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for &m in &config.methods {
        match ctx.run(m) {
            Ok(r) => results.push(r),
            Err(e) => {
                log::warn!("rep {rep}, method {m}: {e}");
                failures.push(Failure {
                    method: m,
                    rep,
                    error: e.to_string(),
                });
            }
        }
    }
    (results, failures)
}

/// Runs every method on every repetition; failures are recorded, not fatal.
pub fn run_experiment(scenario: &Scenario, config: &ExperimentConfig) -> Result<ExperimentOutput> {
    scenario.validate()?;
    validate_methods(scenario, &config.methods)?;
    if config.reps.is_empty() {
        return Err(Error::invalid("no repetitions requested"));
    }
    let per_rep: Vec<(Vec<RepetitionResult>, Vec<Failure>)> =
        config.reps.par_iter().map(|&rep| run_rep(scenario, config, rep)).collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per_rep {
        results.extend(r);
        failures.extend(f);
    }
    let (spec, alpha) = match &scenario.task {
        Task::Binary { alpha, .. } => (None, Some(*alpha)),
        Task::Npmc { spec } => (Some(spec.clone()), None),
    };
    Ok(ExperimentOutput {
        scenario: scenario.name.clone(),
        results,
        failures,
        spec,
        alpha,
    })
}
