//! Gauss–Newton least squares.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussNewtonOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the scaled step norm.
    pub step_tolerance: f64,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    pub params: Vec<f64>,
    pub sum_squares: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Residuals `model − data` and the Jacobian of the model at `params`.
pub trait Residuals {
    fn evaluate(&self, params: &[f64]) -> (DVector<f64>, DMatrix<f64>);

    fn sum_squares(&self, params: &[f64]) -> f64 {
        self.evaluate(params).0.norm_squared()
    }
}

/// Minimizes `‖r(θ)‖²` from `initial`.
///
/// Each step solves `J δ = −r` by SVD, so rank-deficient Jacobians give the
/// minimum-norm step. Steps that increase the objective are halved. The run
/// converges once `‖δ_i / scale_i‖ < step_tolerance`, or once an accepted
/// step no longer changes the objective at all (the rounding floor of
/// large-residual problems can sit above the tolerance).
pub fn gauss_newton<P: Residuals>(problem: &P, initial: &[f64], scale: &[f64], options: &GaussNewtonOptions) -> LeastSquaresFit {
    let mut params = initial.to_vec();
    let (mut r, mut jac) = problem.evaluate(&params);
    let mut sse = r.norm_squared();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let svd = jac.clone().svd(true, true);
        let max_sv = svd.singular_values.max();
        let eps = max_sv * 1e-12 * (jac.nrows().max(jac.ncols()) as f64);
        let step = match svd.solve(&(-&r), eps.max(f64::MIN_POSITIVE)) {
            Ok(s) => s,
            Err(_) => break,
        };
        let scaled_norm = step
            .iter()
            .zip(scale)
            .map(|(s, c)| (s / c).powi(2))
            .sum::<f64>()
            .sqrt();
        if !scaled_norm.is_finite() {
            break;
        }
        if scaled_norm < options.step_tolerance {
            for (p, s) in params.iter_mut().zip(step.iter()) {
                *p += s;
            }
            sse = problem.sum_squares(&params);
            converged = true;
            break;
        }

        let mut factor = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + factor * s).collect();
            let (r_new, j_new) = problem.evaluate(&trial);
            let sse_new = r_new.norm_squared();
            if sse_new.is_finite() && sse_new <= sse {
                if sse_new == sse {
                    converged = true;
                }
                params = trial;
                r = r_new;
                jac = j_new;
                sse = sse_new;
                accepted = true;
                break;
            }
            factor *= 0.5;
        }
        if !accepted || converged {
            break;
        }
    }

    LeastSquaresFit {
        params,
        sum_squares: sse,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Exponential {
        x: Vec<f64>,
        y: Vec<f64>,
    }

    impl Residuals for Exponential {
        fn evaluate(&self, p: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
            let n = self.x.len();
            let mut r = DVector::zeros(n);
            let mut j = DMatrix::zeros(n, 2);
            for i in 0..n {
                let e = (-p[1] * self.x[i]).exp();
                r[i] = p[0] * e - self.y[i];
                j[(i, 0)] = e;
                j[(i, 1)] = -p[0] * self.x[i] * e;
            }
            (r, j)
        }
    }

    #[test]
    fn recovers_exact_exponential() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y = x.iter().map(|&t| 2.5 * (-1.3 * t).exp()).collect();
        let problem = Exponential { x, y };
        let fit = gauss_newton(&problem, &[1.0, 0.5], &[1.0, 1.0], &GaussNewtonOptions::default());
        assert!(fit.converged);
        assert!((fit.params[0] - 2.5).abs() < 1e-9);
        assert!((fit.params[1] - 1.3).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y = x.iter().map(|&t| 2.5 * (-1.3 * t).exp()).collect();
        let problem = Exponential { x, y };
        let opts = GaussNewtonOptions {
            max_iterations: 1,
            ..Default::default()
        };
        let fit = gauss_newton(&problem, &[1.0, 0.5], &[1.0, 1.0], &opts);
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }
}
