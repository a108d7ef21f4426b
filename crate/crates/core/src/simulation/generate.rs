//! Deterministic data generation.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::data::Dataset;
use crate::loss::sigmoid;
use crate::par::{map_chunks, CHUNK};
use crate::rng::{purpose, stream, StreamRng};
use crate::simulation::scenario::{Generator, Response};

impl Generator {
    /// `η = α + βᵀx + γx₁²`.
    #[inline]
    pub fn eta(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.beta.iter().zip(x).map(|(b, v)| b * v).sum();
        self.alpha + lin + self.quad * x[0] * x[0]
    }

    /// Conditional mean of `y` given `η`.
    #[inline]
    pub fn mean_of(&self, eta: f64) -> f64 {
        match self.response {
            Response::Bernoulli => sigmoid(eta),
            Response::Poisson => eta.exp(),
            Response::Gaussian { .. } => eta,
        }
    }

    /// Append `rows` draws to `x` (row-major) and `y`.
    pub fn fill(&self, rng: &mut StreamRng, rows: usize, x: &mut Vec<f64>, y: &mut Vec<f64>) {
        let q = self.q();
        for _ in 0..rows {
            let start = x.len();
            for _ in 0..q {
                let z: f64 = StandardNormal.sample(rng);
                x.push(self.x_sd * z);
            }
            let eta = self.eta(&x[start..]);
            let v = match self.response {
                Response::Bernoulli => (rng.random::<f64>() < sigmoid(eta)) as u8 as f64,
                Response::Poisson => {
                    let mu = eta.exp();
                    // Means beyond the sampler's range are far outside any scenario.
                    Poisson::new(mu).map_or(mu.round(), |d| d.sample(rng))
                }
                Response::Gaussian { noise_sd } => {
                    let e: f64 = StandardNormal.sample(rng);
                    eta + noise_sd * e
                }
            };
            y.push(v);
        }
    }

    /// `n` rows for `(seed, path)`; each chunk of rows has its own stream.
    pub fn generate_at(&self, n: usize, seed: u64, path: &[u64]) -> Dataset {
        let q = self.q();
        let parts = map_chunks(n, CHUNK, |range| {
            let mut p = path.to_vec();
            p.push(range.start as u64);
            let mut rng = stream(seed, &p);
            let mut x = Vec::with_capacity(range.len() * q);
            let mut y = Vec::with_capacity(range.len());
            self.fill(&mut rng, range.len(), &mut x, &mut y);
            (x, y)
        });
        let mut x = Vec::with_capacity(n * q);
        let mut y = Vec::with_capacity(n);
        for (px, py) in parts {
            x.extend(px);
            y.extend(py);
        }
        let names = (1..=q).map(|j| format!("x{j}")).collect();
        Dataset::from_flat(x, q, Some(y), names).expect("generated data are finite").with_response_name("y")
    }

    /// Replication `rep` of a scenario seeded with `seed`.
    pub fn generate(&self, n: usize, seed: u64, setting: usize, rep: usize) -> Dataset {
        self.generate_at(n, seed, &[purpose::DATA, setting as u64, rep as u64])
    }
}
