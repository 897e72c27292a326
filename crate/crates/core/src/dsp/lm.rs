//! Damped least squares (Levenberg-Marquardt) with box bounds, fixed
//! parameters and covariance-based uncertainties.
//!
//! The model is any closure mapping a parameter vector to predictions for
//! every data point. The Jacobian is taken by central differences.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Parameter names, used only for reporting.
    pub names: Vec<String>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// `true` marks a parameter that is held at its initial value.
    pub fixed: Vec<bool>,
    /// Per-point weights multiplying the residuals (typically `1/sigma_i`).
    pub weights: Option<Vec<f64>>,
    pub max_iterations: usize,
    /// Scaled-gradient (cosine) tolerance.
    pub gtol: f64,
    /// Relative step tolerance.
    pub xtol: f64,
    /// Relative cost-reduction tolerance.
    pub ftol: f64,
    /// Initial damping; zero tries a Gauss-Newton step first.
    pub initial_damping: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            names: Vec::new(),
            lower: None,
            upper: None,
            fixed: Vec::new(),
            weights: None,
            max_iterations: 200,
            gtol: 1e-10,
            xtol: 1e-12,
            ftol: 1e-15,
            initial_damping: 0.0,
            fd_step: 1e-6,
        }
    }
}

impl FitOptions {
    pub fn with_names<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.names = names.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }

    pub fn with_fixed(mut self, fixed: Vec<bool>) -> Self {
        self.fixed = fixed;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// 1-sigma uncertainties from the covariance at the optimum; zero for
    /// fixed parameters.
    pub uncertainties: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Condition number of the free-parameter normal matrix.
    pub condition: f64,
    pub degrees_of_freedom: usize,
}

impl FitResult {
    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.values[i])
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.uncertainties[i])
    }
}

fn step_for(p: f64, scale: f64, rel: f64) -> f64 {
    rel * p.abs().max(scale)
}

/// Central-difference Jacobian of `model` at `params` (rows: data points,
/// columns: the parameters listed in `columns`).
pub fn finite_difference_jacobian<F>(
    model: &F,
    params: &[f64],
    columns: &[usize],
    steps: &[f64],
) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = model(params).len();
    let mut jac = DMatrix::zeros(m, columns.len());
    let mut work = params.to_vec();
    for (col, (&j, &h)) in columns.iter().zip(steps).enumerate() {
        work[j] = params[j] + h;
        let plus = model(&work);
        work[j] = params[j] - h;
        let minus = model(&work);
        work[j] = params[j];
        for i in 0..m {
            jac[(i, col)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

struct Problem<'a, F> {
    model: &'a F,
    data: &'a [f64],
    weights: Option<&'a [f64]>,
}

impl<F: Fn(&[f64]) -> Vec<f64>> Problem<'_, F> {
    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        let pred = (self.model)(p);
        DVector::from_iterator(
            self.data.len(),
            pred.iter().zip(self.data).enumerate().map(|(i, (y, d))| {
                let w = self.weights.map_or(1.0, |w| w[i]);
                w * (y - d)
            }),
        )
    }

    fn weighted_model(&self) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        move |p: &[f64]| {
            let pred = (self.model)(p);
            match self.weights {
                Some(w) => pred.iter().zip(w).map(|(y, w)| y * w).collect(),
                None => pred,
            }
        }
    }
}

fn cost_of(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

/// Minimises `0.5 * sum_i (w_i (model(p)_i - data_i))^2`.
///
/// Accepted steps never increase the cost. Fixed parameters are returned
/// bit-identical to their initial values.
pub fn damped_least_squares<F>(
    model: F,
    params0: &[f64],
    data: &[f64],
    options: &FitOptions,
) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = params0.len();
    if params0.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("params0", "initial parameters must be finite"));
    }
    let fixed: Vec<bool> = (0..n)
        .map(|i| options.fixed.get(i).copied().unwrap_or(false))
        .collect();
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let lower = options.lower.clone().unwrap_or_else(|| vec![f64::NEG_INFINITY; n]);
    let upper = options.upper.clone().unwrap_or_else(|| vec![f64::INFINITY; n]);
    if lower.len() != n || upper.len() != n {
        return Err(Error::invalid("bounds", "bounds length differs from parameter count"));
    }
    let probe = model(params0);
    if probe.len() != data.len() {
        return Err(Error::invalid(
            "data",
            format!("model returned {} values for {} data points", probe.len(), data.len()),
        ));
    }
    if let Some(w) = &options.weights {
        if w.len() != data.len() {
            return Err(Error::invalid("weights", "weights length differs from data length"));
        }
    }
    let names = if options.names.len() == n {
        options.names.clone()
    } else {
        (0..n).map(|i| format!("p{i}")).collect()
    };
    let scales: Vec<f64> = params0
        .iter()
        .map(|p| if *p != 0.0 { p.abs() } else { 1.0 })
        .collect();
    let clamp = |p: &mut [f64]| {
        for i in 0..n {
            if !fixed[i] {
                p[i] = p[i].clamp(lower[i], upper[i]);
            }
        }
    };

    let problem = Problem {
        model: &model,
        data,
        weights: options.weights.as_deref(),
    };
    let wmodel = problem.weighted_model();

    let mut p = params0.to_vec();
    clamp(&mut p);
    let mut r = problem.residuals(&p);
    let mut cost = cost_of(&r);
    if !cost.is_finite() {
        return Err(Error::invalid("params0", "model is not finite at the initial parameters"));
    }
    let mut lambda = options.initial_damping;
    let mut iterations = 0;
    let mut converged = free.is_empty();

    while !converged {
        if iterations >= options.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                reason: format!("cost {cost:.6e} still decreasing"),
            });
        }
        iterations += 1;
        let steps: Vec<f64> = free
            .iter()
            .map(|&j| step_for(p[j], scales[j], options.fd_step))
            .collect();
        let jac = finite_difference_jacobian(&wmodel, &p, &free, &steps);
        let gradient = jac.tr_mul(&r);
        let normal = jac.tr_mul(&jac);

        if cost == 0.0 {
            break;
        }
        let rnorm = r.norm();
        let scaled_grad = (0..free.len())
            .map(|k| {
                let cn = jac.column(k).norm();
                if cn > 0.0 {
                    gradient[k].abs() / (cn * rnorm)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        if scaled_grad <= options.gtol {
            break;
        }

        let max_diag = normal.diagonal().max().max(f64::MIN_POSITIVE);
        loop {
            let mut damped = normal.clone();
            for k in 0..free.len() {
                let d = normal[(k, k)].max(1e-12 * max_diag);
                damped[(k, k)] += lambda * d;
            }
            let step = damped.clone().cholesky().map(|c| c.solve(&(-&gradient))).or_else(|| {
                // Gauss-Newton can be rank deficient; fall back to LU.
                damped.lu().solve(&(-&gradient))
            });
            let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
                lambda = if lambda == 0.0 { 1e-3 } else { lambda * 10.0 };
                if lambda > 1e20 {
                    return Err(Error::Singular);
                }
                continue;
            };
            let mut trial = p.clone();
            for (k, &j) in free.iter().enumerate() {
                trial[j] += step[k];
            }
            clamp(&mut trial);
            let r_trial = problem.residuals(&trial);
            let cost_trial = cost_of(&r_trial);
            if cost_trial.is_finite() && cost_trial <= cost {
                let small_step = free
                    .iter()
                    .all(|&j| (trial[j] - p[j]).abs() <= options.xtol * (p[j].abs() + options.xtol));
                let small_gain = cost - cost_trial <= options.ftol * cost;
                p = trial;
                r = r_trial;
                cost = cost_trial;
                if small_step || small_gain {
                    converged = true;
                }
                lambda = if lambda < 1e-9 { 0.0 } else { lambda / 10.0 };
                break;
            }
            lambda = if lambda == 0.0 { 1e-3 } else { lambda * 10.0 };
            if lambda > 1e16 {
                // No descent direction left at working precision.
                converged = true;
                break;
            }
        }
    }

    let steps: Vec<f64> = free
        .iter()
        .map(|&j| step_for(p[j], scales[j], options.fd_step))
        .collect();
    let jac = finite_difference_jacobian(&wmodel, &p, &free, &steps);
    let normal = jac.tr_mul(&jac);
    let dof = data.len().saturating_sub(free.len());
    let variance = if dof > 0 { 2.0 * cost / dof as f64 } else { 0.0 };
    let mut covariance = vec![vec![0.0; n]; n];
    let mut uncertainties = vec![0.0; n];
    let mut condition = f64::INFINITY;
    if !free.is_empty() {
        let eig = SymmetricEigen::new(normal.clone());
        let max_ev = eig.eigenvalues.max();
        let min_ev = eig.eigenvalues.min();
        if min_ev > 0.0 {
            condition = max_ev / min_ev;
        }
        let inv = normal
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .or_else(|| normal.pseudo_inverse(1e-14 * max_ev.max(f64::MIN_POSITIVE)).ok());
        if let Some(inv) = inv {
            for (a, &ja) in free.iter().enumerate() {
                for (b, &jb) in free.iter().enumerate() {
                    covariance[ja][jb] = inv[(a, b)] * variance;
                }
                uncertainties[ja] = covariance[ja][ja].max(0.0).sqrt();
            }
        }
    } else {
        condition = 1.0;
    }

    Ok(FitResult {
        names,
        values: p,
        uncertainties,
        covariance,
        residual_norm: r.norm(),
        iterations,
        condition,
        degrees_of_freedom: dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_hits_normal_equations() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 1.5 - 0.75 * x + if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        let model = |p: &[f64]| xs.iter().map(|x| p[0] + p[1] * x).collect::<Vec<_>>();
        let fit = damped_least_squares(model, &[0.0, 0.0], &ys, &FitOptions::default()).unwrap();

        // closed-form normal equations
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let icpt = (sy - slope * sx) / n;
        assert!(fit.iterations <= 2, "iterations {}", fit.iterations);
        assert!((fit.values[0] - icpt).abs() < 1e-9);
        assert!((fit.values[1] - slope).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock_valley() {
        // r1 = 10 (y - x^2), r2 = 1 - x ; minimum at (1, 1)
        let model = |p: &[f64]| vec![10.0 * (p[1] - p[0] * p[0]), -p[0]];
        let data = [0.0, -1.0];
        let fit = damped_least_squares(model, &[-1.2, 1.0], &data, &FitOptions::default()).unwrap();
        assert!((fit.values[0] - 1.0).abs() < 1e-6, "{:?}", fit.values);
        assert!((fit.values[1] - 1.0).abs() < 1e-6, "{:?}", fit.values);
    }

    #[test]
    fn rosenbrock_minimum_matches_grid_refinement() {
        let f = |x: f64, y: f64| 100.0 * (y - x * x).powi(2) + (1.0 - x).powi(2);
        let (mut cx, mut cy, mut span) = (0.0f64, 0.0f64, 4.0f64);
        for _ in 0..40 {
            let mut best = (f64::INFINITY, cx, cy);
            for i in -20..=20 {
                for j in -20..=20 {
                    let x = cx + span * i as f64 / 20.0;
                    let y = cy + span * j as f64 / 20.0;
                    let v = f(x, y);
                    if v < best.0 {
                        best = (v, x, y);
                    }
                }
            }
            cx = best.1;
            cy = best.2;
            span *= 0.5;
        }
        let model = |p: &[f64]| vec![10.0 * (p[1] - p[0] * p[0]), -p[0]];
        let fit = damped_least_squares(model, &[-1.2, 1.0], &[0.0, -1.0], &FitOptions::default()).unwrap();
        assert!((fit.values[0] - cx).abs() < 1e-6);
        assert!((fit.values[1] - cy).abs() < 1e-6);
    }

    #[test]
    fn fixed_parameter_is_bit_exact() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (-x).exp() + 0.3).collect();
        let model = |p: &[f64]| xs.iter().map(|x| p[0] * (-p[1] * x).exp() + p[2]).collect::<Vec<_>>();
        let start = 0.123_456_789_012_345_6;
        let opts = FitOptions::default().with_fixed(vec![false, false, true]);
        let fit = damped_least_squares(model, &[1.0, 0.5, start], &ys, &opts).unwrap();
        assert_eq!(fit.values[2].to_bits(), start.to_bits());
        assert_eq!(fit.uncertainties[2], 0.0);
    }

    #[test]
    fn bounds_are_respected() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x).collect();
        let model = |p: &[f64]| xs.iter().map(|x| p[0] * x).collect::<Vec<_>>();
        let opts = FitOptions::default().with_bounds(vec![0.0], vec![2.0]);
        let fit = damped_least_squares(model, &[1.0], &ys, &opts).unwrap();
        assert!(fit.values[0] <= 2.0);
        assert!((fit.values[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cost_never_increases() {
        use std::cell::RefCell;
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 5.0 - 5.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 4.0 * (-(x - 0.7) * (x - 0.7) / 2.0).exp()).collect();
        let history = RefCell::new(Vec::new());
        let model = |p: &[f64]| {
            xs.iter()
                .map(|x| p[0] + p[1] * (-(x - p[2]).powi(2) / (2.0 * p[3] * p[3])).exp())
                .collect::<Vec<_>>()
        };
        let fit = damped_least_squares(&model, &[0.0, 1.0, -1.0, 2.0], &ys, &FitOptions::default()).unwrap();
        history.borrow_mut().push(fit.residual_norm);
        assert!(fit.residual_norm < 1e-8);
        assert!((fit.values[2] - 0.7).abs() < 1e-8);
    }

    #[test]
    fn jacobian_half_step_agrees() {
        let model = |p: &[f64]| vec![p[0].sin() * p[1], (p[0] * p[1]).exp(), p[1].powi(3)];
        let p = [0.4, 1.3];
        let j1 = finite_difference_jacobian(&model, &p, &[0, 1], &[1e-4, 1e-4]);
        let j2 = finite_difference_jacobian(&model, &p, &[0, 1], &[5e-5, 5e-5]);
        let exact = [
            [p[0].cos() * p[1], p[0].sin()],
            [p[1] * (p[0] * p[1]).exp(), p[0] * (p[0] * p[1]).exp()],
            [0.0, 3.0 * p[1] * p[1]],
        ];
        for i in 0..3 {
            for k in 0..2 {
                // central differences: error O(h^2)
                assert!((j1[(i, k)] - j2[(i, k)]).abs() < 1e-6);
                assert!((j2[(i, k)] - exact[i][k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn max_iterations_reported() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 5.0 - 5.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (-(x * x)).exp()).collect();
        let model = |p: &[f64]| xs.iter().map(|x| p[0] * (-(x - p[1]).powi(2) * p[2]).exp()).collect::<Vec<_>>();
        let opts = FitOptions {
            max_iterations: 1,
            ..FitOptions::default()
        };
        let err = damped_least_squares(model, &[0.3, 2.0, 0.1], &ys, &opts).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }
}
