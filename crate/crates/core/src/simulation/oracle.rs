//! Target parameters `θ*` for scenarios.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::linear_index;
use crate::loss::Family;
use crate::par::map_chunks;
use crate::rng::{purpose, stream};
use crate::simulation::calibration::population_target;
use crate::simulation::scenario::{Generator, Setting};

/// A Monte-Carlo estimate of `θ*` with per-coordinate standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTarget {
    pub theta: Vec<f64>,
    pub se: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

const ORACLE_CHUNK: usize = 100_000;

struct Sums {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    outer: DMatrix<f64>,
}

/// One streaming pass: `Σ g`, `Σ G` and `Σ g gᵀ` over the mega-sample at `theta`.
fn pass(g: &Generator, family: Family, n: usize, seed: u64, theta: &[f64]) -> Sums {
    let p = theta.len();
    let q = g.q();
    let parts = map_chunks(n, ORACLE_CHUNK, |range| {
        let mut rng = stream(seed, &[purpose::ORACLE, range.start as u64]);
        let mut x = Vec::with_capacity(range.len() * q);
        let mut y = Vec::with_capacity(range.len());
        g.fill(&mut rng, range.len(), &mut x, &mut y);
        let mut s = Sums { grad: DVector::zeros(p), hess: DMatrix::zeros(p, p), outer: DMatrix::zeros(p, p) };
        let mut z = DVector::zeros(p);
        for (i, &yi) in y.iter().enumerate() {
            let xi = &x[i * q..(i + 1) * q];
            z[0] = 1.0;
            z.rows_mut(1, q).copy_from_slice(xi);
            let t = linear_index(theta, xi);
            let score = family.score_at(yi, t);
            let w = family.curvature_at(yi, t);
            s.grad.axpy(-score, &z, 1.0);
            s.hess.ger(w, &z, &z, 1.0);
            s.outer.ger(score * score, &z, &z, 1.0);
        }
        s
    });
    parts
        .into_iter()
        .reduce(|mut a, b| {
            a.grad += b.grad;
            a.hess += b.hess;
            a.outer += b.outer;
            a
        })
        .expect("n > 0")
}

/// Fit the working model on `n` fresh rows, regenerating them on every pass.
///
/// Starts from the quadrature minimizer, so a few full Newton steps suffice.
pub fn mega_sample_target(g: &Generator, family: Family, n: usize, seed: u64) -> OracleTarget {
    let mut theta = population_target(g, family);
    for _ in 0..20 {
        let s = pass(g, family, n, seed, &theta);
        let step = s.hess.cholesky().expect("positive definite curvature").solve(&(-s.grad));
        theta.iter_mut().zip(step.iter()).for_each(|(t, d)| *t += d);
        if step.amax() < 1e-12 {
            break;
        }
    }
    let s = pass(g, family, n, seed, &theta);
    let nf = n as f64;
    let a_inv = (s.hess / nf).try_inverse().expect("invertible curvature");
    let cov = &a_inv * (s.outer / nf) * &a_inv / nf;
    let se = (0..theta.len()).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    OracleTarget { theta, se, n, seed }
}

/// `θ*` for a setting: the stored value if any, the generator under correct
/// specification, and the quadrature minimizer otherwise.
pub fn true_target(setting: &Setting, family: Family) -> (Vec<f64>, Option<Vec<f64>>) {
    if let Some(t) = &setting.target {
        return (t.clone(), setting.target_se.clone());
    }
    if setting.generator.is_specified_by(family) {
        return (setting.generator.theta0(), None);
    }
    (population_target(&setting.generator, family), None)
}
