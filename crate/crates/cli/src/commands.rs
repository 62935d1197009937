use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use elnp::datagen::{rng_for, Purpose, Scenario, Task};
use elnp::em::{em_fit, EmConfig, EmFit, TUpdate};
use elnp::eval::{run_experiment, ExperimentConfig, Method};
use elnp::model::persist::{BasisSpec, ClassifierDoc, ModelDoc, Standardize};
use elnp::model::{Basis, CsvTable, Dataset, NpmcSpec, PosteriorModel};
use elnp::np_binary::{fit_np_binary, BinaryNpClassifier};
use elnp::npmc::{npmc_from_params, DualState, HjConfig, NpmcClassifier};
use elnp::umbrella::{fit_umbrella, Corruption, UmbrellaClassifier, UmbrellaConfig};
use elnp::Error;
use ndarray::Array2;
use serde_json::json;

use crate::{Cli, Command, DataArgs, EmArgs, HjArgs};

pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. } | Error::AllRestartsFailed { .. } => 2,
            _ => 1,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, msg: e.to_string() }
    }
}

type CmdResult = Result<u8, Failure>;

fn input_error(msg: impl Into<String>) -> Failure {
    Failure { code: 1, msg: msg.into() }
}

pub fn run(cli: &Cli) -> CmdResult {
    let threads = match cli.command {
        Command::Simulate(_) => cli.threads.unwrap_or(0),
        _ => 1,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| input_error(e.to_string()))?;

    let scenario_seed = match &cli.command {
        Command::Simulate(crate::SimulateArgs { scenario, .. }) | Command::Generate(crate::GenerateArgs { scenario, .. }) => {
            Scenario::load(scenario).ok().map(|s| s.seed)
        }
        _ => None,
    };
    let seed = cli.seed.or(scenario_seed).unwrap_or(0);
    let resolved = json!({ "config": cli, "seed": seed, "threads": rayon::current_num_threads() });
    eprintln!("{resolved}");

    match &cli.command {
        Command::Fit(a) => {
            let (data, standardize) = load_data(&a.data, a.k)?;
            let fit = em_fit(&data, a.k, &em_config(&a.em, a.k, seed)?, None)?;
            let doc = model_doc(&fit, &data, standardize, None);
            finish_fit(&doc, &fit, &a.out, a.trace.as_deref())
        }
        Command::NpBinary(a) => {
            let (data, standardize) = load_data(&a.data, 2)?;
            let (clf, fit) = fit_np_binary(&data, a.alpha, &em_config(&a.em, 2, seed)?)?;
            let lambda_hat = clf.lambda_hat.is_finite().then_some(clf.lambda_hat);
            let doc = model_doc(&fit, &data, standardize, Some(ClassifierDoc::NpBinary { lambda_hat, alpha: a.alpha }));
            println!(
                "{}",
                json!({ "lambda_hat": lambda_hat, "posterior_threshold": clf.posterior_threshold(), "w_hat": clf.w_hat })
            );
            finish_fit(&doc, &fit, &a.out, a.trace.as_deref())
        }
        Command::Npmc(a) => {
            let spec = NpmcSpec::from_json(&std::fs::read_to_string(&a.spec)?)?;
            let k = spec.k();
            let (data, standardize) = load_data(&a.data, k)?;
            let fit = em_fit(&data, k, &em_config(&a.em, k, seed)?, None)?;
            let hj = hj_config(&a.hj, seed);
            let clf = npmc_from_params(fit.params.clone(), data.basis_view(), &spec, &hj, a.hj.feas_margin)?;
            let doc_clf = ClassifierDoc::Npmc {
                lambda_hat: clf.lambda_hat.lambda.clone(),
                spec: spec.clone(),
                g_value: clf.lambda_hat.g_value,
                feasibility: clf.feasibility,
                truncated: clf.lambda_hat.truncated,
            };
            println!("{}", serde_json::to_string(&doc_clf).map_err(Error::from)?);
            let doc = model_doc(&fit, &data, standardize, Some(doc_clf));
            finish_fit(&doc, &fit, &a.out, a.trace.as_deref())
        }
        Command::Umbrella(a) => {
            let (data, standardize) = load_data(&a.data, 2)?;
            let corruption = parse_corruption(&a.corruption)?;
            let config = UmbrellaConfig {
                ridge: a.em.ridge,
                ..UmbrellaConfig::new(a.alpha, a.delta, corruption)
            };
            let mut rng = rng_for(seed, 0, Purpose::Split);
            let clf = fit_umbrella(&data, &config, &em_config(&a.em, 2, seed)?, &mut rng)?;
            let doc_clf = ClassifierDoc::Umbrella {
                k_star: clf.k_star,
                threshold: clf.threshold,
                m0_used: clf.m0_used,
                m1_used: clf.m1_used,
                saturated: clf.saturated,
                alpha: clf.alpha,
                delta: clf.delta,
            };
            println!("{}", serde_json::to_string(&doc_clf).map_err(Error::from)?);
            let mut doc = ModelDoc::new(&clf.score, data.basis());
            doc.standardize = standardize;
            doc.classifier = Some(doc_clf);
            save_doc(&doc, &a.out)?;
            Ok(0)
        }
        Command::Simulate(a) => simulate(cli, a, seed),
        Command::Predict(a) => predict(a),
        Command::Generate(a) => generate(a, seed),
    }
}

pub fn parse_t_update(s: &str) -> Result<TUpdate, Failure> {
    let values = |raw: &str| -> Result<Vec<f64>, Failure> {
        raw.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| input_error(format!("cannot parse {v:?} in --t-update"))))
            .collect()
    };
    match s.split_once('=') {
        None if s == "plain" => Ok(TUpdate::Plain),
        None if s == "frozen" => Ok(TUpdate::Frozen),
        Some(("constrained", v)) => Ok(TUpdate::Constrained(values(v)?)),
        Some(("penalized", v)) => Ok(TUpdate::Penalized(values(v)?)),
        _ => Err(input_error(format!("unknown --t-update {s:?}"))),
    }
}

fn parse_corruption(s: &str) -> Result<Corruption, Failure> {
    if s == "estimated" {
        return Ok(Corruption::Estimated);
    }
    let bad = || input_error(format!("--corruption must be known=m0,m1 or estimated, got {s:?}"));
    let v = s.strip_prefix("known=").ok_or_else(bad)?;
    let (a, b) = v.split_once(',').ok_or_else(bad)?;
    let m0 = a.trim().parse().map_err(|_| bad())?;
    let m1 = b.trim().parse().map_err(|_| bad())?;
    Ok(Corruption::Known { m0, m1 })
}

fn em_config(a: &EmArgs, k: usize, seed: u64) -> Result<EmConfig, Failure> {
    let config = EmConfig {
        epsilon: a.epsilon,
        max_iter: a.max_iter,
        n_restarts: a.restarts,
        seed,
        t_update: parse_t_update(&a.t_update)?,
        ridge: a.ridge,
        wml_tol: a.wml_tol,
        wml_max_iter: a.wml_max_iter,
    };
    config.validate(k)?;
    Ok(config)
}

fn hj_config(a: &HjArgs, seed: u64) -> HjConfig {
    HjConfig {
        box_hi: a.box_hi,
        tol_step: a.tol_step,
        n_starts: a.hj_starts,
        max_evals: a.max_evals,
        seed,
        ..HjConfig::default()
    }
}

fn load_data(a: &DataArgs, k: usize) -> Result<(Dataset, Option<Standardize>), Failure> {
    let mut table = CsvTable::read(&a.data).map_err(|e| input_error(format!("{}: {e}", a.data)))?;
    let standardize = a.standardize.then(|| Standardize::fit(table.features.view()));
    if let Some(s) = &standardize {
        table.features = s.apply(&table.features)?;
    }
    let basis = Basis::from_kind(&a.basis, table.features.ncols())?;
    let data = table
        .into_dataset(k, basis)
        .map_err(|e| input_error(format!("{}: {e}", a.data)))?;
    Ok((data, standardize))
}

fn model_doc(fit: &EmFit, data: &Dataset, standardize: Option<Standardize>, classifier: Option<ClassifierDoc>) -> ModelDoc {
    let mut doc = ModelDoc::new(&fit.params, data.basis());
    doc.standardize = standardize;
    doc.converged = Some(fit.trace.converged);
    doc.classifier = classifier;
    doc
}

fn save_doc(doc: &ModelDoc, out: &str) -> Result<(), Failure> {
    doc.save(out)?;
    // re-read what was written so a broken artifact fails here, not downstream
    ModelDoc::load(out)?;
    Ok(())
}

fn default_trace_path(out: &str) -> PathBuf {
    let p = Path::new(out);
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    p.with_file_name(format!("{stem}.trace.csv"))
}

fn finish_fit(doc: &ModelDoc, fit: &EmFit, out: &str, trace: Option<&str>) -> CmdResult {
    save_doc(doc, out)?;
    let trace_path = trace.map(PathBuf::from).unwrap_or_else(|| default_trace_path(out));
    fit.trace.save_csv(trace_path)?;
    if fit.trace.converged {
        Ok(0)
    } else {
        eprintln!("warning: EM stopped after {} iterations without converging", fit.trace.iterations);
        Ok(2)
    }
}

fn default_methods(scenario: &Scenario) -> Vec<Method> {
    match scenario.task {
        Task::Binary { .. } => vec![
            Method::Ours,
            Method::Vanilla,
            Method::Oracle,
            Method::Npc,
            Method::NpcStar,
            Method::NpcPlus,
        ],
        Task::Npmc { .. } => vec![Method::Ours, Method::Vanilla, Method::Oracle],
    }
}

fn create_with_stamp(path: &Path, deterministic: bool) -> Result<File, Failure> {
    let mut f = File::create(path)?;
    if !deterministic {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(f, "# generated_unix={secs}")?;
    }
    Ok(f)
}

fn simulate(cli: &Cli, a: &crate::SimulateArgs, root_seed: u64) -> CmdResult {
    let scenario = Scenario::load(&a.scenario).map_err(|e| input_error(format!("{}: {e}", a.scenario)))?;
    scenario.validate()?;
    let methods = match &a.methods {
        Some(list) => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<Method>())
            .collect::<Result<Vec<_>, _>>()?,
        None => default_methods(&scenario),
    };
    let config = ExperimentConfig {
        n: a.n.unwrap_or(scenario.n),
        reps: (a.first_rep..a.first_rep + a.reps).collect(),
        methods,
        root_seed,
        em: em_config(&a.em, scenario.k, root_seed)?,
        hj: hj_config(&a.hj, root_seed),
    };
    let out = run_experiment(&scenario, &config)?;
    let dir = Path::new(&a.out);
    std::fs::create_dir_all(dir)?;
    out.write_long_to(create_with_stamp(&dir.join("long.csv"), cli.deterministic)?)?;
    out.write_summary_to(create_with_stamp(&dir.join("summary.csv"), cli.deterministic)?)?;
    out.write_failures_to(create_with_stamp(&dir.join("failures.csv"), cli.deterministic)?)?;
    for row in out.summary() {
        println!("{:<9} {:<14} {:>10.4} ({:.4}) n={}", row.method.name(), row.metric, row.mean, row.sd, row.count);
    }
    let rate = out.success_rate();
    if rate < 0.9 {
        eprintln!("only {:.1}% of method repetitions succeeded; see failures.csv", 100.0 * rate);
        return Ok(3);
    }
    Ok(0)
}

fn predict(a: &crate::PredictArgs) -> CmdResult {
    let doc = ModelDoc::load(&a.model).map_err(|e| input_error(format!("{}: {e}", a.model)))?;
    let params = doc.params()?;
    let table = CsvTable::read(&a.data).map_err(|e| input_error(format!("{}: {e}", a.data)))?;
    if table.features.ncols() != doc.basis.p {
        return Err(input_error(format!(
            "model expects {} features, data has {}",
            doc.basis.p,
            table.features.ncols()
        )));
    }
    if let Some(labels) = &table.labels {
        if let Some(i) = labels.iter().position(|&y| y >= doc.k) {
            return Err(input_error(format!(
                "{}: line {}: label {} outside [0, {}) for this model",
                a.data,
                i + 2,
                labels[i],
                doc.k
            )));
        }
    }
    let features = match &doc.standardize {
        Some(s) => s.apply(&table.features)?,
        None => table.features,
    };
    let basis = BasisSpec::to_basis(&doc.basis)?;
    let gx: Array2<f64> = basis.expand(features.view())?;
    let probs = PosteriorModel::from_params(&params)?.probs_matrix(gx.view());
    let pred: Vec<usize> = match doc.classifier.clone() {
        None => probs
            .outer_iter()
            .map(|p| (0..p.len()).fold(0, |b, k| if p[k] > p[b] { k } else { b }))
            .collect(),
        Some(ClassifierDoc::NpBinary { lambda_hat, alpha }) => {
            BinaryNpClassifier::with_lambda(params, lambda_hat.unwrap_or(f64::INFINITY), alpha)?.classify_all(gx.view())
        }
        Some(ClassifierDoc::Npmc {
            lambda_hat,
            spec,
            g_value,
            truncated,
            ..
        }) => {
            let state = DualState {
                lambda: lambda_hat,
                g_value,
                box_hi: HjConfig::default().box_hi,
                truncated,
                evals: 0,
            };
            NpmcClassifier::new(params, spec, state, elnp::npmc::DEFAULT_FEAS_MARGIN)?.classify_all(gx.view())
        }
        Some(ClassifierDoc::Umbrella {
            k_star,
            threshold,
            m0_used,
            m1_used,
            saturated,
            alpha,
            delta,
        }) => UmbrellaClassifier::new(params, k_star, threshold, m0_used, m1_used, saturated, alpha, delta)?
            .classify_all(gx.view()),
    };
    let mut w = csv::Writer::from_path(&a.out).map_err(Error::from)?;
    let mut header = vec!["pred".to_string()];
    header.extend((0..doc.k).map(|k| format!("p{k}")));
    w.write_record(&header).map_err(Error::from)?;
    for (i, row) in probs.outer_iter().enumerate() {
        let mut rec = vec![pred[i].to_string()];
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(Error::from)?;
    }
    w.flush()?;
    Ok(0)
}

fn generate(a: &crate::GenerateArgs, seed: u64) -> CmdResult {
    let scenario = Scenario::load(&a.scenario).map_err(|e| input_error(format!("{}: {e}", a.scenario)))?;
    scenario.validate()?;
    if a.eval {
        let s = scenario.sample_eval(seed, a.rep)?;
        CsvTable::write(&a.out, s.features.view(), Some(&s.true_labels), Some(&s.true_labels))?;
    } else {
        let s = scenario.sample_training(a.n.unwrap_or(scenario.n), seed, a.rep)?;
        CsvTable::write(&a.out, s.features.view(), Some(&s.noisy_labels), Some(&s.true_labels))?;
    }
    Ok(0)
}
