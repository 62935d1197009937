use elnp::datagen::{inject_noise, oracle_drm_params, rng_for, Covariance, Family, NoiseSpec, Purpose, Scenario};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenario(name: &str) -> Scenario {
    Scenario::load(format!("{}/../../scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn gaussian_parts(family: &Family) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let Family::Gaussian { means, cov } = family else { panic!("gaussian family") };
    let covs = match cov {
        Covariance::Shared(c) => vec![c.clone(); means.len()],
        Covariance::PerClass(cs) => cs.clone(),
    };
    (means.clone(), covs)
}

fn log_density(x: &[f64], mean: &[f64], cov: &[Vec<f64>]) -> f64 {
    let p = x.len();
    let sigma = DMatrix::from_fn(p, p, |i, j| cov[i][j]);
    let chol = sigma.cholesky().expect("positive definite");
    let diff = DVector::from_fn(p, |i, _| x[i] - mean[i]);
    let maha = diff.dot(&chol.solve(&diff));
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (maha + log_det + p as f64 * (2.0 * std::f64::consts::PI).ln())
}

fn check_density_ratios(name: &str) {
    let s = scenario(name);
    let (means, covs) = gaussian_parts(&s.family);
    let oracle = oracle_drm_params(&s.family).unwrap();
    let p = means[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = oracle.basis.apply_row(Array1::from(x.clone()).view()).unwrap();
        for k in 1..s.k {
            let tilt = oracle.gamma[k] + oracle.beta.row(k).dot(&g);
            let truth = log_density(&x, &means[k], &covs[k]) - log_density(&x, &means[0], &covs[0]);
            assert!((tilt.exp() / truth.exp() - 1.0).abs() < 1e-8, "{name} class {k}: {tilt} vs {truth}");
        }
    }
}

#[test]
fn shared_covariance_tilts_are_density_ratios() {
    check_density_ratios("binary_A_gaussian");
    check_density_ratios("npmc_b_dependent");
}

#[test]
fn unequal_spherical_tilts_are_density_ratios() {
    check_density_ratios("npmc_c_unequal");
}

#[test]
fn noise_changes_only_labels() {
    let s = scenario("npmc_a_independent");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let clean = s.sample_clean(500, &mut rng).unwrap();
    let features = clean.features.clone();
    let (noisy, nm) = inject_noise(&clean.true_labels, s.k, &NoiseSpec::TransitionEta { eta: 0.3 }, &s.class_weights().unwrap(), &mut rng).unwrap();
    assert_eq!(noisy.len(), 500);
    assert_eq!(features, clean.features);
    let flipped = noisy.iter().zip(&clean.true_labels).filter(|(a, b)| a != b).count();
    assert!(flipped > 0);
    let expected = 500.0 * 0.3 * (s.k as f64 - 1.0) / s.k as f64;
    assert!((flipped as f64 - expected).abs() < 5.0 * expected.sqrt());
    assert!(nm.t.columns().into_iter().all(|c| (c.sum() - 1.0).abs() < 1e-12));
}

#[test]
fn noisy_posterior_is_the_transition_mix() {
    let s = scenario("npmc_c_unequal");
    let (means, covs) = gaussian_parts(&s.family);
    let nm = s.true_noise().unwrap();
    let k = s.k;
    let p = means[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let dens: Vec<f64> = (0..k).map(|j| log_density(&x, &means[j], &covs[j]).exp()).collect();
        let mix: f64 = (0..k).map(|j| nm.w[j] * dens[j]).sum();
        let clean: Vec<f64> = (0..k).map(|j| nm.w[j] * dens[j] / mix).collect();
        for l in 0..k {
            // noisy class density built from the confusion rows
            let noisy_density: f64 = (0..k).map(|j| nm.m[[l, j]] * dens[j]).sum();
            let from_noisy = nm.w_tilde[l] * noisy_density / mix;
            let linked: f64 = (0..k).map(|j| nm.t[[l, j]] * clean[j]).sum();
            assert!((from_noisy - linked).abs() < 1e-8);
        }
    }
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let a: Vec<u64> = (0..4).map(|_| rng_for(9, 3, Purpose::Train).next_u64()).collect();
    assert!(a.windows(2).all(|w| w[0] == w[1]));
    let draws: Vec<u64> = [
        rng_for(9, 3, Purpose::Train),
        rng_for(9, 3, Purpose::Noise),
        rng_for(9, 3, Purpose::Eval),
        rng_for(9, 4, Purpose::Train),
        rng_for(10, 3, Purpose::Train),
    ]
    .into_iter()
    .map(|mut r| r.next_u64())
    .collect();
    for i in 0..draws.len() {
        for j in i + 1..draws.len() {
            assert_ne!(draws[i], draws[j]);
        }
    }
}

#[test]
fn training_samples_depend_only_on_seed_and_rep() {
    let s = scenario("binary_C_t");
    let a = s.sample_training(100, 5, 2).unwrap();
    let b = s.sample_training(100, 5, 2).unwrap();
    let c = s.sample_training(100, 5, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.features, c.features);
    assert_eq!(a.noisy_labels.iter().filter(|&&y| y == 0).count(), 100);
}

#[test]
fn confusion_rows_match_observed_corruption() {
    let s = scenario("binary_A_gaussian");
    let sample = s.sample_training(20_000, 1, 0).unwrap();
    let agree = sample
        .noisy_labels
        .iter()
        .zip(&sample.true_labels)
        .filter(|(n, t)| **n == 0 && **t == 0)
        .count() as f64
        / 20_000.0;
    assert!((agree - 0.95).abs() < 0.01);
    let eval = s.sample_eval(1, 0).unwrap();
    let counts: Array1<f64> = (0..2).map(|k| eval.true_labels.iter().filter(|&&y| y == k).count() as f64).collect();
    assert_eq!(counts, Array1::from(vec![20_000.0, 20_000.0]));
    let _: Array2<f64> = eval.features;
}
