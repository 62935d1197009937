//! Acceptance suite. Runs as a plain binary so every criterion reports one line.

use std::sync::Mutex;
use std::time::Instant;

use elnp::datagen::{Scenario, Task};
use elnp::em::{em_fit, em_fit_observed, m_step_t, EmConfig, EmFit, ResponsibilityMatrix, TUpdate};
use elnp::eval::{run_experiment, ExperimentConfig, ExperimentOutput, Method};
use elnp::model::{validate, Dataset, ModelParams, PosteriorModel};
use elnp::np_binary::{clamp_pi, density_ratio_score, solve_threshold};
use elnp::npmc::{hooke_jeeves_max, DualData, HjConfig};
use elnp::umbrella::binomial_alpha;
use elnp::wml::{design_matrix, wml_gradient, wml_objective, WmlProblem};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenario(name: &str) -> Scenario {
    let path = format!("{}/../../scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn training(s: &Scenario, n: usize, rep: u64) -> Dataset {
    let sample = s.sample_training(n, s.seed, rep).expect("sample");
    let basis = s.basis_for(sample.features.ncols()).expect("basis");
    sample.dataset(basis).expect("dataset")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn experiment(name: &str, n: usize, reps: u64, methods: Vec<Method>) -> ExperimentOutput {
    let s = scenario(name);
    let config = ExperimentConfig {
        n,
        reps: (0..reps).collect(),
        methods,
        root_seed: s.seed,
        em: EmConfig::default(),
        hj: HjConfig::default(),
    };
    run_experiment(&s, &config).expect("experiment")
}

fn mean_of(out: &ExperimentOutput, m: Method, metric: &str) -> f64 {
    out.mean_of(m, metric).unwrap_or(f64::NAN)
}

fn in_range(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

struct MonotoneFits {
    fits: Vec<(EmFit, Dataset)>,
    errors: Vec<String>,
    invalid_iterates: usize,
}

fn random_fits() -> MonotoneFits {
    let names = [
        ("binary_A_gaussian", 250),
        ("binary_B_circles", 250),
        ("binary_C_t", 250),
        ("npmc_a_independent", 500),
        ("npmc_b_dependent", 500),
        ("npmc_c_unequal", 500),
    ];
    let scenarios: Vec<(Scenario, usize)> = names.iter().map(|&(n, size)| (scenario(n), size)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut fits = Vec::new();
    let mut errors = Vec::new();
    let invalid = Mutex::new(0usize);
    for case in 0..100u64 {
        let (s, size) = &scenarios[rng.random_range(0..scenarios.len())];
        let data = training(s, *size, 1000 + case);
        let config = EmConfig {
            n_restarts: 2,
            seed: rng.random(),
            ..EmConfig::default()
        };
        let (k, d) = (data.k(), data.d());
        let check = |_: usize, _: usize, p: &ModelParams| {
            if validate(p, k, d).is_err() {
                *invalid.lock().unwrap() += 1;
            }
        };
        match em_fit_observed(&data, k, &config, None, &check) {
            Ok(fit) => fits.push((fit, data)),
            Err(e) => errors.push(format!("{} case {case}: {e}", s.name)),
        }
    }
    let invalid_iterates = invalid.into_inner().unwrap();
    MonotoneFits {
        fits,
        errors,
        invalid_iterates,
    }
}

fn criterion_1(r: &MonotoneFits) -> Outcome {
    let mut worst = f64::INFINITY;
    for (fit, _) in &r.fits {
        for w in fit.trace.profile_logel_per_iter.windows(2) {
            worst = worst.min(w[1] - w[0]);
        }
    }
    let pass = r.errors.is_empty() && r.invalid_iterates == 0 && worst >= -1e-8;
    outcome(
        pass,
        format!(
            "{} fits, {} errors {:?}, {} invalid iterates, smallest increment {worst:.3e}",
            r.fits.len(),
            r.errors.len(),
            r.errors.first(),
            r.invalid_iterates
        ),
    )
}

fn criterion_2(r: &MonotoneFits) -> Outcome {
    let mut sum_res: f64 = 0.0;
    let mut tilt_res: f64 = 0.0;
    let mut converged = 0;
    for (fit, data) in &r.fits {
        if !fit.trace.converged {
            continue;
        }
        converged += 1;
        let p = &fit.weights.p;
        sum_res = sum_res.max((p.sum() - 1.0).abs());
        for k in 0..data.k() {
            let total: f64 = (0..data.n())
                .map(|i| p[i] * (fit.params.gamma[k] + fit.params.beta.row(k).dot(&data.gx(i))).exp())
                .sum();
            tilt_res = tilt_res.max((total - 1.0).abs());
        }
    }
    outcome(
        converged > 0 && sum_res <= 1e-6 && tilt_res <= 1e-5,
        format!("{converged} converged fits, max |sum p - 1| = {sum_res:.2e}, max tilt residual = {tilt_res:.2e}"),
    )
}

fn criterion_3(out: &ExperimentOutput) -> Outcome {
    let t1 = mean_of(out, Method::Ours, "type1");
    let t2 = mean_of(out, Method::Ours, "type2");
    let v1 = mean_of(out, Method::Vanilla, "type1");
    outcome(
        in_range(t1, 0.035, 0.065) && in_range(t2, 0.25, 0.31) && v1 <= 0.03,
        format!(
            "ours type I {t1:.4}, type II {t2:.4}; vanilla type I {v1:.4}; {} failures",
            out.failures.len()
        ),
    )
}

fn criterion_4(out: &ExperimentOutput) -> Outcome {
    let e0 = mean_of(out, Method::Ours, "excess_0");
    let e1 = mean_of(out, Method::Ours, "excess_1");
    let obj = mean_of(out, Method::Ours, "objective");
    let oracle = (
        mean_of(out, Method::Oracle, "excess_0"),
        mean_of(out, Method::Oracle, "excess_1"),
        mean_of(out, Method::Oracle, "objective"),
    );
    outcome(
        e0.abs() <= 0.015 && e1.abs() <= 0.015 && in_range(obj, 0.025, 0.050),
        format!(
            "ours excess ({e0:.4}, {e1:.4}), objective {obj:.4}; clean-label oracle excess ({:.4}, {:.4}), objective {:.4}",
            oracle.0, oracle.1, oracle.2
        ),
    )
}

fn criterion_5(small: &ExperimentOutput, large: &ExperimentOutput) -> Outcome {
    let mse = |out: &ExperimentOutput| {
        let v: Vec<f64> = out
            .results
            .iter()
            .filter(|r| r.method == Method::Ours && r.rep < 20)
            .map(|r| r.extras["coef_mse"])
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (a, b) = (mse(small), mse(large));
    outcome(b <= 0.65 * a, format!("MSE n=5000 {a:.5}, n=10000 {b:.5}, ratio {:.3}", b / a))
}

fn criterion_6() -> Outcome {
    let s = scenario("npmc_a_independent");
    let Task::Npmc { spec } = &s.task else { unreachable!() };
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for rep in 0..5 {
        let data = training(&s, s.n, 600 + rep);
        let fit = em_fit(&data, data.k(), &EmConfig { seed: rep, ..EmConfig::default() }, None).expect("fit");
        let probs = PosteriorModel::from_params(&fit.params).unwrap().probs_matrix(data.basis_view());
        let dual = DualData::new(spec, fit.params.w.view(), probs.view()).unwrap();
        for _ in 0..40 {
            let a: Vec<f64> = (0..dual.dim()).map(|_| rng.random_range(0.0..50.0)).collect();
            let b: Vec<f64> = (0..dual.dim()).map(|_| rng.random_range(0.0..50.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let gap = 0.5 * (dual.value(&a) + dual.value(&b)) - dual.value(&mid);
            worst = worst.max(gap);
        }
    }
    outcome(worst <= 1e-9, format!("200 pairs on 5 fits, largest midpoint violation {worst:.2e}"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);

    // constrained transition update against a diagonal grid
    let mut worst_t: f64 = 0.0;
    for _ in 0..10 {
        let n = 30;
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let omega = Array2::from_shape_fn((n, 2), |_| rng.random_range(0.01..1.0));
        let omega = &omega / &omega.sum_axis(ndarray::Axis(1)).insert_axis(ndarray::Axis(1));
        let xi = vec![rng.random_range(0.5..0.95), rng.random_range(0.5..0.95)];
        let resp = ResponsibilityMatrix::new(omega.clone()).unwrap();
        let t = m_step_t(&resp, &labels, &TUpdate::Constrained(xi.clone()), &Array2::eye(2)).unwrap();
        for k in 0..2 {
            let mut same = 0.0;
            let mut other = 0.0;
            for i in 0..n {
                if labels[i] == k {
                    same += omega[[i, k]];
                } else {
                    other += omega[[i, k]];
                }
            }
            let q = |d: f64| same * d.ln() + if d < 1.0 { other * (1.0 - d).ln() } else { f64::NEG_INFINITY };
            let mut best = (f64::NEG_INFINITY, xi[k]);
            let mut d = xi[k];
            while d <= 1.0 + 1e-12 {
                let v = q(d.min(1.0));
                if v > best.0 {
                    best = (v, d.min(1.0));
                }
                d += 1e-3;
            }
            worst_t = worst_t.max((t[[k, k]] - best.1).abs());
        }
    }

    // threshold against exhaustive enumeration
    let mut mismatches = 0;
    for _ in 0..20 {
        let pis: Vec<f64> = (0..15).map(|_| rng.random_range(0.0..1.0)).collect();
        let w: f64 = rng.random_range(0.2..0.8);
        let alpha: f64 = rng.random_range(0.05..0.5);
        let got = solve_threshold(&pis, w, alpha).unwrap();
        let clamped: Vec<f64> = pis.iter().map(|&p| clamp_pi(p)).collect();
        let r: Vec<f64> = clamped.iter().map(|&p| density_ratio_score(p, w)).collect();
        let mut brute = f64::INFINITY;
        for &lam in &r {
            let l: f64 = r
                .iter()
                .zip(&clamped)
                .filter(|(ri, _)| lam <= **ri)
                .map(|(_, p)| 1.0 - p)
                .sum::<f64>()
                / 15.0;
            if l <= alpha * (1.0 - w) && lam < brute {
                brute = lam;
            }
        }
        if got != brute {
            mismatches += 1;
        }
    }

    // pattern search against a grid; the peak sits on a grid node and caps every piece
    let hj = HjConfig {
        box_hi: 5.0,
        ..HjConfig::default()
    };
    let mut worst_hj: f64 = 0.0;
    for case in 0..10 {
        let dim = 1 + case % 2;
        let peak: Vec<f64> = (0..dim).map(|_| f64::from(rng.random_range(0..=100u32)) * 0.05).collect();
        let pieces: Vec<(Vec<f64>, f64)> = (0..6)
            .map(|_| ((0..dim).map(|_| rng.random_range(-3.0..3.0)).collect(), rng.random_range(1.0..3.0)))
            .collect();
        let f = |l: &[f64]| {
            let cone: f64 = (0..dim).map(|j| 2.0 * (l[j] - peak[j]).abs()).sum();
            let extra = pieces
                .iter()
                .map(|(b, a)| a + b.iter().zip(l).zip(&peak).map(|((b, x), c)| b * (x - c)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            (1.0 - cone).min(extra)
        };
        let state = hooke_jeeves_max(f, dim, &hj).unwrap();
        let mut grid_max = f64::NEG_INFINITY;
        let steps = 101;
        let mut idx = vec![0usize; dim];
        loop {
            let x: Vec<f64> = idx.iter().map(|&i| i as f64 * 0.05).collect();
            grid_max = grid_max.max(f(&x));
            let mut j = 0;
            while j < dim {
                idx[j] += 1;
                if idx[j] < steps {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == dim {
                break;
            }
        }
        worst_hj = worst_hj.max((state.g_value - grid_max).abs());
    }

    outcome(
        worst_t <= 2e-3 && mismatches == 0 && worst_hj <= 10.0 * hj.tol_step,
        format!("T grid gap {worst_t:.2e}; threshold mismatches {mismatches}/20; pattern search gap {worst_hj:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst: f64 = 0.0;
    for problem in 0..5 {
        let (n, k, d) = (40, 2 + problem % 3, 3);
        let gx = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        let design = design_matrix(gx.view());
        let weights = Array2::from_shape_fn((n, k), |_| rng.random_range(0.0..1.0));
        let ridge = if problem % 2 == 0 { 0.0 } else { 0.7 };
        let p = WmlProblem::new(design.view(), weights.view(), ridge).unwrap();
        for _ in 0..20 {
            let mut c = Array2::from_shape_fn((k, d + 1), |_| rng.random_range(-1.5..1.5));
            c.row_mut(0).fill(0.0);
            let g = wml_gradient(&p, &c).unwrap();
            let h = 1e-5;
            let mut num = Array2::<f64>::zeros((k, d + 1));
            for j in 1..k {
                for m in 0..=d {
                    let mut up = c.clone();
                    let mut dn = c.clone();
                    up[[j, m]] += h;
                    dn[[j, m]] -= h;
                    num[[j, m]] = (wml_objective(&p, &up).unwrap() - wml_objective(&p, &dn).unwrap()) / (2.0 * h);
                }
            }
            let err = (&g - &num).iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
            worst = worst.max(err / scale);
        }
    }
    outcome(worst <= 1e-4, format!("100 points on 5 problems, worst relative error {worst:.2e}"))
}

fn pmf_survival(k: usize, m: usize, a: f64) -> f64 {
    let mut total = 0.0;
    for j in k..=m {
        let mut c = 1.0;
        for i in 0..j {
            c *= (m - i) as f64 / (i + 1) as f64;
        }
        total += c * a.powi(j as i32) * (1.0 - a).powi((m - j) as i32);
    }
    total
}

fn criterion_9(out: &ExperimentOutput) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut closed_ok = true;
    for _ in 0..20 {
        let delta: f64 = rng.random_range(0.001..0.999);
        closed_ok &= binomial_alpha(1, 1, delta).unwrap() == delta;
        closed_ok &= binomial_alpha(2, 2, delta).unwrap() == delta.sqrt();
        closed_ok &= binomial_alpha(1, 2, delta).unwrap() == 1.0 - (1.0 - delta).sqrt();
    }
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.random_range(3..200usize);
        let k = rng.random_range(1..=m);
        let delta = rng.random_range(0.01..0.99);
        let a = binomial_alpha(k, m, delta).unwrap();
        worst = worst.max((pmf_survival(k, m, a) - delta).abs());
    }
    let violation = mean_of(out, Method::NpcStar, "violation");
    outcome(
        closed_ok && worst <= 1e-9 && violation <= 0.12,
        format!("closed forms exact: {closed_ok}; pmf gap {worst:.2e}; NPC* violation rate {violation:.3}"),
    )
}

fn report(n: usize, start: Instant, o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {n}: {status} ({:.1}s) {}", start.elapsed().as_secs_f64(), o.detail);
}

fn main() {
    // cargo passes libtest flags; listing must not trigger the full run
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failed = Vec::new();
    let mut run = |n: usize, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        report(n, start, &o);
        if !o.pass {
            failed.push(n);
        }
    };

    // shared runs are built inside the first criterion that needs them so timings include them
    let mut fits = None;
    run(1, &mut || criterion_1(fits.get_or_insert_with(random_fits)));
    run(2, &mut || criterion_2(fits.get_or_insert_with(random_fits)));
    let mut binary = None;
    let binary_run = || experiment("binary_A_gaussian", 2000, 50, vec![Method::Ours, Method::Vanilla, Method::NpcStar]);
    run(3, &mut || criterion_3(binary.get_or_insert_with(binary_run)));
    let mut npmc = None;
    let npmc_run = || experiment("npmc_a_independent", 5000, 25, vec![Method::Ours, Method::Oracle]);
    run(4, &mut || criterion_4(npmc.get_or_insert_with(npmc_run)));
    run(5, &mut || {
        let large = experiment("npmc_a_independent", 10000, 20, vec![Method::Ours]);
        criterion_5(npmc.get_or_insert_with(npmc_run), &large)
    });
    run(6, &mut criterion_6);
    run(7, &mut criterion_7);
    run(8, &mut criterion_8);
    run(9, &mut || criterion_9(binary.get_or_insert_with(binary_run)));

    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        return;
    }
    println!("acceptance: failed criteria {failed:?}");
    // a report by default; set ACCEPTANCE_STRICT=1 to turn failures into a non-zero exit
    if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
