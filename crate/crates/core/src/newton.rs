//! Damped Newton minimization with backtracking line search.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{norm2, norm_inf, solve_spd, SymmetricMatrix};

/// Value, gradient and Hessian of an objective at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymmetricMatrix,
}

/// A smooth objective with an analytic PSD Hessian.
pub trait RiskFunction {
    fn dim(&self) -> usize;

    fn evaluate(&self, theta: &[f64]) -> Evaluation;

    /// Objective value alone; used by the line search.
    fn value(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta).value
    }

    /// True when the minimizer is known not to exist and `theta` is running
    /// off to infinity (e.g. perfect separation for binary losses).
    fn diverging(&self, _theta: &[f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Convergence threshold on the gradient sup-norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Abort when `‖θ‖₂` exceeds this.
    pub max_param_norm: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, max_param_norm: 1e6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub objective: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("objective is non-finite at the starting point")]
    NonFiniteStart,
    #[error("line search stalled: no step size decreased the objective (gradient norm {:e})", .report.final_gradient_norm)]
    Stalled { theta: Vec<f64>, report: SolverReport },
    #[error("iterates diverged (parameter norm {norm:e}); the minimizer likely does not exist")]
    Diverged { norm: f64, theta: Vec<f64>, report: SolverReport },
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const RIDGE_RETRIES: usize = 12;

fn newton_direction(eval: &Evaluation) -> Option<Vec<f64>> {
    let p = eval.gradient.len();
    let neg_grad: Vec<f64> = eval.gradient.iter().map(|g| -g).collect();
    if let Ok(d) = solve_spd(&eval.hessian, &neg_grad) {
        if d.iter().all(|v| v.is_finite()) {
            return Some(d);
        }
    }
    let trace = eval.hessian.trace().abs();
    let mut ridge = 1e-8 * if trace > 0.0 { trace / p as f64 } else { 1.0 };
    for _ in 0..RIDGE_RETRIES {
        if let Ok(d) = solve_spd(&eval.hessian.ridged(ridge), &neg_grad) {
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        ridge *= 10.0;
    }
    None
}

/// Minimize `objective` from `theta0`.
///
/// Returns the best iterate with `converged = false` when `max_iter` runs out.
pub fn newton_minimize<F: RiskFunction + ?Sized>(
    objective: &F,
    theta0: &[f64],
    options: &NewtonOptions,
) -> Result<(Vec<f64>, SolverReport), SolverError> {
    let mut theta = theta0.to_vec();
    let mut eval = objective.evaluate(&theta);
    if !eval.value.is_finite() || eval.gradient.iter().any(|g| !g.is_finite()) {
        return Err(SolverError::NonFiniteStart);
    }
    let report = |eval: &Evaluation, iterations: usize, converged: bool| SolverReport {
        converged,
        iterations,
        final_gradient_norm: norm_inf(&eval.gradient),
        objective: eval.value,
    };

    for iter in 0..options.max_iter {
        let gnorm = norm_inf(&eval.gradient);
        if gnorm <= options.tol {
            if objective.diverging(&theta) {
                return Err(SolverError::Diverged { norm: norm2(&theta), report: report(&eval, iter, false), theta });
            }
            return Ok((theta, report(&eval, iter, true)));
        }
        let Some(dir) = newton_direction(&eval) else {
            return Err(SolverError::Stalled { report: report(&eval, iter, false), theta });
        };
        let slope: f64 = dir.iter().zip(&eval.gradient).map(|(d, g)| d * g).sum();
        // Once the predicted decrease is below the resolution of the objective
        // a full Newton step is judged by the gradient it produces instead.
        let resolution = 64.0 * f64::EPSILON * eval.value.abs().max(1.0);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let value = objective.value(&cand);
            if value.is_finite() {
                if value <= eval.value + ARMIJO * step * slope {
                    accepted = Some(cand);
                    break;
                }
                if -slope <= resolution && value <= eval.value + resolution {
                    let trial = objective.evaluate(&cand);
                    if norm_inf(&trial.gradient) < gnorm {
                        accepted = Some(cand);
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(SolverError::Stalled { report: report(&eval, iter, false), theta });
        };
        theta = next;
        eval = objective.evaluate(&theta);
        let norm = norm2(&theta);
        if norm > options.max_param_norm {
            return Err(SolverError::Diverged { norm, report: report(&eval, iter + 1, false), theta });
        }
    }
    let converged = norm_inf(&eval.gradient) <= options.tol && !objective.diverging(&theta);
    Ok((theta, report(&eval, options.max_iter, converged)))
}

/// Quadratic `Σ wₖ (θₖ - cₖ)²`; handy for tests and as a toy objective.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub center: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RiskFunction for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn evaluate(&self, theta: &[f64]) -> Evaluation {
        let p = self.dim();
        let value = self.value(theta);
        let gradient = (0..p).map(|k| 2.0 * self.weights[k] * (theta[k] - self.center[k])).collect();
        let hessian = SymmetricMatrix::from_upper(DMatrix::from_fn(p, p, |a, b| {
            if a == b {
                2.0 * self.weights[a]
            } else {
                0.0
            }
        }));
        Evaluation { value, gradient, hessian }
    }

    fn value(&self, theta: &[f64]) -> f64 {
        theta.iter().zip(&self.center).zip(&self.weights).map(|((t, c), w)| w * (t - c) * (t - c)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    #[test]
    fn quadratic_converges_in_one_step() {
        let q = Quadratic { center: vec![1.0, -2.0, 3.5], weights: vec![1.0, 1.0, 1.0] };
        let (theta, report) = newton_minimize(&q, &[0.0; 3], &NewtonOptions::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
        for (t, c) in theta.iter().zip(&q.center) {
            assert!((t - c).abs() < 1e-14);
        }
    }

    struct Recording<F> {
        inner: F,
        accepted: RefCell<Vec<f64>>,
    }

    impl<F: RiskFunction> RiskFunction for Recording<F> {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn evaluate(&self, theta: &[f64]) -> Evaluation {
            let e = self.inner.evaluate(theta);
            self.accepted.borrow_mut().push(e.value);
            e
        }
        fn value(&self, theta: &[f64]) -> f64 {
            self.inner.value(theta)
        }
    }

    /// Smooth convex objective where full Newton steps overshoot.
    struct SoftAbs;

    impl RiskFunction for SoftAbs {
        fn dim(&self) -> usize {
            1
        }
        fn evaluate(&self, theta: &[f64]) -> Evaluation {
            let t = theta[0];
            let s = (1.0 + t * t).sqrt();
            Evaluation {
                value: s,
                gradient: vec![t / s],
                hessian: SymmetricMatrix::from_diagonal(&[1.0 / (s * s * s)]),
            }
        }
    }

    #[test]
    fn line_search_keeps_objective_non_increasing() {
        let f = Recording { inner: SoftAbs, accepted: RefCell::new(Vec::new()) };
        let (theta, report) = newton_minimize(&f, &[5.0], &NewtonOptions::default()).unwrap();
        assert!(report.converged);
        assert!(theta[0].abs() < 1e-8);
        let vals = f.accepted.borrow();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn max_iter_returns_best_iterate() {
        let opts = NewtonOptions { max_iter: 2, ..Default::default() };
        let (theta, report) = newton_minimize(&SoftAbs, &[50.0], &opts).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 2);
        assert!(theta[0].abs() < 50.0);
    }

    #[test]
    fn singular_hessian_gets_ridge() {
        // Flat in the second coordinate.
        let q = Quadratic { center: vec![1.0, 0.0], weights: vec![1.0, 0.0] };
        let (theta, report) = newton_minimize(&q, &[0.0, 0.3], &NewtonOptions::default()).unwrap();
        assert!(report.converged);
        assert!((theta[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        struct Bad;
        impl RiskFunction for Bad {
            fn dim(&self) -> usize {
                1
            }
            fn evaluate(&self, _: &[f64]) -> Evaluation {
                Evaluation { value: f64::NAN, gradient: vec![0.0], hessian: SymmetricMatrix::identity(1) }
            }
        }
        assert_eq!(newton_minimize(&Bad, &[0.0], &NewtonOptions::default()), Err(SolverError::NonFiniteStart));
    }
}
