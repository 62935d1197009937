//! Weighted multinomial logistic regression with the reference class pinned to zero.
//!
//! Coefficients are `K × (d + 1)`: column 0 is the intercept and row 0 is
//! identically zero. Each sample contributes one softmax term per class,
//! weighted by `weights[[i, k]]`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, solve_spd};

#[derive(Clone, Copy, Debug)]
pub struct WmlProblem<'a> {
    /// `n × (d + 1)`, intercept column first.
    pub design: ArrayView2<'a, f64>,
    /// `n × K` nonnegative weights.
    pub weights: ArrayView2<'a, f64>,
    /// L2 penalty on slopes only.
    pub ridge: f64,
}

#[derive(Clone, Debug)]
pub struct WmlConfig {
    /// Tolerance on the largest absolute gradient entry divided by the total weight.
    pub tol: f64,
    pub max_iter: usize,
    pub init: Option<Array2<f64>>,
}

impl Default for WmlConfig {
    fn default() -> Self {
        WmlConfig {
            tol: 1e-9,
            max_iter: 200,
            init: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WmlSolution {
    pub coeffs: Array2<f64>,
    pub final_objective: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Objective after every accepted step, starting from the initial point.
    pub objective_path: Vec<f64>,
}

/// Prepends a column of ones.
pub fn design_matrix(gx: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = gx.dim();
    let mut z = Array2::ones((n, d + 1));
    z.slice_mut(s![.., 1..]).assign(&gx);
    z
}

impl<'a> WmlProblem<'a> {
    pub fn new(design: ArrayView2<'a, f64>, weights: ArrayView2<'a, f64>, ridge: f64) -> Result<Self> {
        if design.nrows() != weights.nrows() {
            return Err(Error::Dimension(format!(
                "design has {} rows, weights {}",
                design.nrows(),
                weights.nrows()
            )));
        }
        if weights.ncols() < 2 || design.ncols() < 1 {
            return Err(Error::Dimension("need K ≥ 2 and an intercept column".into()));
        }
        if !(ridge >= 0.0) || !ridge.is_finite() {
            return Err(Error::invalid(format!("ridge must be finite and ≥ 0, got {ridge}")));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        if !(weights.sum() > 0.0) {
            return Err(Error::invalid("total weight is zero"));
        }
        Ok(WmlProblem {
            design,
            weights,
            ridge,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.ncols()
    }

    pub fn width(&self) -> usize {
        self.design.ncols()
    }

    fn check_coeffs(&self, c: &Array2<f64>) -> Result<()> {
        if c.dim() != (self.k(), self.width()) {
            return Err(Error::Dimension(format!(
                "coefficients are {:?}, expected {:?}",
                c.dim(),
                (self.k(), self.width())
            )));
        }
        Ok(())
    }

    fn linear(&self, c: &Array2<f64>) -> Array2<f64> {
        self.design.dot(&c.t())
    }

    fn penalty(&self, c: &Array2<f64>) -> f64 {
        self.ridge * c.slice(s![.., 1..]).iter().map(|v| v * v).sum::<f64>()
    }

    fn objective_from_linear(&self, eta: &Array2<f64>, c: &Array2<f64>) -> f64 {
        let mut total = 0.0;
        for (e, w) in eta.outer_iter().zip(self.weights.outer_iter()) {
            let s: f64 = w.sum();
            if s == 0.0 {
                continue;
            }
            total += w.dot(&e) - s * log_sum_exp(e);
        }
        total - self.penalty(c)
    }

    /// Row-wise softmax of the linear predictor, overwritten in place.
    fn probs_from_linear(mut eta: Array2<f64>) -> Array2<f64> {
        for mut row in eta.outer_iter_mut() {
            crate::numeric::softmax_in_place(row.as_slice_mut().expect("row-major"));
        }
        eta
    }

    fn gradient_from_probs(&self, probs: &Array2<f64>, c: &Array2<f64>) -> Array2<f64> {
        let row_sums = self.weights.sum_axis(Axis(1));
        let mut resid = self.weights.to_owned();
        Zip::from(resid.rows_mut())
            .and(probs.rows())
            .and(&row_sums)
            .for_each(|mut r, p, &s| r.scaled_add(-s, &p));
        let mut g = resid.t().dot(&self.design);
        let mut slopes = g.slice_mut(s![.., 1..]);
        slopes.scaled_add(-2.0 * self.ridge, &c.slice(s![.., 1..]));
        g.row_mut(0).fill(0.0);
        g
    }

    fn grad_norm(&self, g: &Array2<f64>) -> f64 {
        let scale = self.weights.sum();
        g.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
    }

    /// Negative Hessian over the free rows `1..K`, flattened class-major.
    fn neg_hessian(&self, probs: &Array2<f64>) -> Array2<f64> {
        let k = self.k();
        let w = self.width();
        let q = (k - 1) * w;
        let row_sums = self.weights.sum_axis(Axis(1));
        let mut h = Array2::zeros((q, q));
        for a in 1..k {
            for b in a..k {
                let coef: Array1<f64> = Zip::from(probs.rows()).and(&row_sums).map_collect(|p, &s| {
                    let diag = if a == b { p[a] } else { 0.0 };
                    s * (diag - p[a] * p[b])
                });
                let scaled = &self.design * &coef.view().insert_axis(Axis(1));
                let block = scaled.t().dot(&self.design);
                let (ra, rb) = ((a - 1) * w, (b - 1) * w);
                h.slice_mut(s![ra..ra + w, rb..rb + w]).assign(&block);
                if a != b {
                    h.slice_mut(s![rb..rb + w, ra..ra + w]).assign(&block.t());
                }
            }
        }
        if self.ridge > 0.0 {
            for a in 1..k {
                for j in 1..w {
                    let idx = (a - 1) * w + j;
                    h[[idx, idx]] += 2.0 * self.ridge;
                }
            }
        }
        h
    }
}

pub fn wml_objective(problem: &WmlProblem, coeffs: &Array2<f64>) -> Result<f64> {
    problem.check_coeffs(coeffs)?;
    Ok(problem.objective_from_linear(&problem.linear(coeffs), coeffs))
}

/// Analytic gradient; row 0 is reported as zero since it is pinned.
pub fn wml_gradient(problem: &WmlProblem, coeffs: &Array2<f64>) -> Result<Array2<f64>> {
    problem.check_coeffs(coeffs)?;
    let probs = WmlProblem::probs_from_linear(problem.linear(coeffs));
    Ok(problem.gradient_from_probs(&probs, coeffs))
}

// saturated probabilities leave the Hessian singular; shift the diagonal until it factors
fn damped_newton(h: &Array2<f64>, g: &Array1<f64>) -> Option<Array1<f64>> {
    if let Some(d) = solve_spd(h, g) {
        return Some(d);
    }
    let scale = h.diag().iter().map(|v| v.abs()).sum::<f64>() / h.nrows().max(1) as f64;
    if !(scale > 0.0) {
        return None;
    }
    let mut mu = 1e-10 * scale;
    for _ in 0..8 {
        let mut shifted = h.clone();
        shifted.diag_mut().mapv_inplace(|v| v + mu);
        if let Some(d) = solve_spd(&shifted, g) {
            return Some(d);
        }
        mu *= 100.0;
    }
    None
}

/// Damped Newton ascent with step halving and a gradient fallback.
pub fn wml_fit(problem: &WmlProblem, config: &WmlConfig) -> Result<WmlSolution> {
    let k = problem.k();
    let w = problem.width();
    let mut c = match &config.init {
        Some(init) => {
            problem.check_coeffs(init)?;
            let mut c = init.clone();
            c.row_mut(0).fill(0.0);
            c
        }
        None => Array2::zeros((k, w)),
    };
    let mut eta = problem.linear(&c);
    let mut obj = problem.objective_from_linear(&eta, &c);
    let mut path = vec![obj];
    let mut iterations = 0;
    loop {
        let probs = WmlProblem::probs_from_linear(eta);
        let g = problem.gradient_from_probs(&probs, &c);
        let gn = problem.grad_norm(&g);
        if gn <= config.tol {
            return Ok(WmlSolution {
                coeffs: c,
                final_objective: obj,
                iterations,
                grad_norm: gn,
                objective_path: path,
            });
        }
        if iterations >= config.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                grad_norm: gn,
                last: Box::new(c),
            });
        }
        iterations += 1;

        let free = g.slice(s![1.., ..]).iter().copied().collect::<Array1<f64>>();
        let h = problem.neg_hessian(&probs);
        let newton = damped_newton(&h, &free);
        let slack = 1e-13 * (1.0 + obj.abs());
        let mut accepted = None;
        let directions: Vec<(Array1<f64>, bool)> = match newton {
            Some(dir) => vec![(dir, true), (free.clone(), false)],
            None => vec![(free.clone(), false)],
        };
        'dirs: for (dir, is_newton) in directions {
            let mut step = if is_newton {
                1.0
            } else {
                // scale the raw gradient so the first probe moves by at most 1
                let m = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if m > 0.0 { 1.0 / m } else { 0.0 }
            };
            if step == 0.0 {
                continue;
            }
            let halvings = if is_newton { 20 } else { 60 };
            for _ in 0..halvings {
                let mut trial = c.clone();
                for (idx, v) in dir.iter().enumerate() {
                    trial[[1 + idx / w, idx % w]] += step * v;
                }
                let eta_t = problem.linear(&trial);
                let obj_t = problem.objective_from_linear(&eta_t, &trial);
                if obj_t.is_finite() && obj_t >= obj - slack {
                    let gain = obj_t >= obj;
                    if gain || is_newton {
                        accepted = Some((trial, eta_t, obj_t.max(obj)));
                        break 'dirs;
                    }
                }
                step *= 0.5;
            }
        }
        match accepted {
            Some((trial, eta_t, obj_t)) => {
                let stalled = obj_t - obj <= 1e-12 * (1.0 + obj.abs());
                c = trial;
                eta = eta_t;
                obj = obj_t;
                path.push(obj);
                // flat directions (separation) never reach `tol`; stop once progress is negligible
                if stalled && gn <= config.tol.sqrt() {
                    let probs = WmlProblem::probs_from_linear(eta);
                    let grad_norm = problem.grad_norm(&problem.gradient_from_probs(&probs, &c));
                    return Ok(WmlSolution {
                        coeffs: c,
                        final_objective: obj,
                        iterations,
                        grad_norm,
                        objective_path: path,
                    });
                }
            }
            None => {
                // no ascent direction survives rounding; accept the point if the gradient is tiny
                if gn <= config.tol.sqrt() {
                    return Ok(WmlSolution {
                        coeffs: c,
                        final_objective: obj,
                        iterations,
                        grad_norm: gn,
                        objective_path: path,
                    });
                }
                return Err(Error::NonConvergence {
                    iterations,
                    grad_norm: gn,
                    last: Box::new(c),
                });
            }
        }
    }
}
