use std::collections::BTreeMap;

use elnp::datagen::{rng_for, NoiseSpec, Purpose, Scenario};
use elnp::em::{em_fit, EmConfig, TUpdate};
use elnp::eval::{class_errors, run_experiment, ExperimentConfig, ExperimentOutput, Method};
use elnp::np_binary::BinaryNpClassifier;
use elnp::npmc::HjConfig;
use rand::RngCore;

fn scenario(name: &str) -> Scenario {
    Scenario::load(format!("{}/../../scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn config(s: &Scenario, reps: Vec<u64>, methods: Vec<Method>) -> ExperimentConfig {
    ExperimentConfig {
        n: 150,
        reps,
        methods,
        root_seed: s.seed,
        em: EmConfig { n_restarts: 2, ..EmConfig::default() },
        hj: HjConfig::default(),
    }
}

fn small_run(reps: Vec<u64>) -> ExperimentOutput {
    let mut s = scenario("binary_A_gaussian");
    s.eval.per_class = Some(2000);
    run_experiment(&s, &config(&s, reps, vec![Method::Ours, Method::Vanilla, Method::NpcStar])).unwrap()
}

#[test]
fn summary_matches_long_csv() {
    let out = small_run(vec![0, 1, 2]);
    let mut buf = Vec::new();
    out.write_long_to(&mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        groups.entry((rec[0].to_string(), rec[2].to_string())).or_default().push(rec[3].parse().unwrap());
    }
    let summary = out.summary();
    assert_eq!(summary.len(), groups.len());
    for row in summary {
        let vals = &groups[&(row.method.name().to_string(), row.metric.clone())];
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((mean - row.mean).abs() <= 1e-12, "{} {}", row.method, row.metric);
        assert_eq!(vals.len(), row.count);
    }
}

#[test]
fn rep_order_leaves_aggregates_alone() {
    let a = small_run(vec![0, 1, 2]);
    let b = small_run(vec![2, 0, 1]);
    assert_eq!(a.summary(), b.summary());
    let mut ra = a.results.clone();
    let mut rb = b.results.clone();
    ra.sort_by_key(|r| (r.method, r.rep));
    rb.sort_by_key(|r| (r.method, r.rep));
    assert_eq!(ra, rb);
}

#[test]
fn single_rep_matches_a_manual_run() {
    let mut s = scenario("binary_A_gaussian");
    s.eval.per_class = Some(2000);
    let cfg = config(&s, vec![4], vec![Method::Ours]);
    let out = run_experiment(&s, &cfg).unwrap();
    let sample = s.sample_training(cfg.n, s.seed, 4).unwrap();
    let basis = s.basis_for(sample.features.ncols()).unwrap();
    let train = sample.dataset(basis.clone()).unwrap();
    let em = EmConfig { seed: rng_for(s.seed, 4, Purpose::Fit).next_u64(), ..cfg.em.clone() };
    let fit = em_fit(&train, 2, &em, None).unwrap();
    let clf = BinaryNpClassifier::from_params(fit.params, train.basis_view(), 0.05).unwrap();
    let eval = s.sample_eval(s.seed, 4).unwrap();
    let pred = clf.classify_all(basis.expand(eval.features.view()).unwrap().view());
    let errors = class_errors(&pred, &eval.true_labels, 2).unwrap();
    assert_eq!(out.results.len(), 1);
    assert_eq!(out.results[0].per_class_error, errors);
    assert_eq!(out.results[0].type1, Some(errors[0]));
}

fn max_error_gap(t_update: TUpdate) -> f64 {
    let mut s = scenario("npmc_b_dependent");
    s.noise = NoiseSpec::None;
    s.eval.size = Some(3000);
    let mut cfg = config(&s, vec![0, 1], vec![Method::Ours, Method::Oracle]);
    cfg.n = 600;
    cfg.em.t_update = t_update;
    let out = run_experiment(&s, &cfg).unwrap();
    assert!(out.failures.is_empty());
    let mut gap = 0.0f64;
    for rep in [0, 1] {
        let get = |m: Method| out.results.iter().find(|r| r.method == m && r.rep == rep).unwrap();
        let (a, b) = (get(Method::Ours), get(Method::Oracle));
        for (x, y) in a.per_class_error.iter().zip(&b.per_class_error) {
            gap = gap.max((x - y).abs());
        }
    }
    gap
}

#[test]
fn oracle_equals_ours_without_noise() {
    // with T held at the identity both fits are the same likelihood problem
    assert!(max_error_gap(TUpdate::Frozen) < 2e-3);
    // a free T picks up a little spurious noise on finite samples
    assert!(max_error_gap(TUpdate::Plain) < 0.03);
}

#[test]
fn npmc_rejects_umbrella_methods() {
    let s = scenario("npmc_b_dependent");
    assert!(run_experiment(&s, &config(&s, vec![0], vec![Method::Npc])).is_err());
}
