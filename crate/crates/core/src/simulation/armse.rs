//! Prediction error on held-out rows and relative variances.

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::loss::{LossError, LossModel};
use crate::rng::{purpose, stream};

/// Root mean squared error of the mean prediction `μ(θᵀz)` on `test`.
pub fn rmse(test: &Dataset, theta: &[f64], model: LossModel) -> Result<f64, LossError> {
    let y = test.responses().ok_or(LossError::MissingResponse)?;
    if theta.len() != model.dim() || test.q() + 1 != model.dim() {
        return Err(LossError::DimensionMismatch { expected: model.dim(), found: theta.len() });
    }
    let sse: f64 = (0..test.n())
        .map(|i| {
            let e = y[i] - model.predict(test.x(i), theta);
            e * e
        })
        .sum();
    Ok((sse / test.n() as f64).sqrt())
}

/// Shuffle rows into `k` folds of near-equal size.
pub fn folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, &[purpose::FOLDS]));
    let mut out = vec![Vec::new(); k];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % k].push(i);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    out
}

/// Average of the `k` held-out RMSEs; `fit` maps a training set and fold index to `θ̂`.
pub fn ten_fold_armse<F, E>(data: &Dataset, model: LossModel, k: usize, seed: u64, mut fit: F) -> Result<f64, E>
where
    F: FnMut(&Dataset, usize) -> Result<Vec<f64>, E>,
    E: From<LossError>,
{
    let parts = folds(data.n(), k, seed);
    let mut total = 0.0;
    for (f, test_idx) in parts.iter().enumerate() {
        let train_idx: Vec<usize> =
            parts.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, p)| p.iter().copied()).collect();
        let train = data.select(&train_idx);
        let test = data.select(test_idx);
        let theta = fit(&train, f)?;
        total += rmse(&test, &theta, model)?;
    }
    Ok(total / k as f64)
}

/// Per-coordinate `Var(a)/Var(b)` from replicated estimates.
pub fn relative_variance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let p = a.first().map_or(0, Vec::len);
    (0..p)
        .map(|j| {
            let va = crate::simulation::summary::sample_variance(&a.iter().map(|t| t[j]).collect::<Vec<_>>());
            let vb = crate::simulation::summary::sample_variance(&b.iter().map(|t| t[j]).collect::<Vec<_>>());
            va / vb
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataPoint;
    use crate::loss::Family;

    #[test]
    fn noiseless_linear_fit_has_zero_error() {
        let pts: Vec<DataPoint> = (0..20).map(|i| DataPoint::new(vec![i as f64], Some(1.0 + 2.0 * i as f64))).collect();
        let d = Dataset::from_points(&pts).unwrap();
        let m = LossModel::for_covariates(Family::GaussianLinear, 1);
        assert_eq!(rmse(&d, &[1.0, 2.0], m).unwrap(), 0.0);
    }

    #[test]
    fn constant_predictor_gives_population_sd() {
        let ys = [0.0, 1.0, 3.0, 4.0, 7.0];
        let pts: Vec<DataPoint> = ys.iter().map(|&y| DataPoint::new(vec![0.5], Some(y))).collect();
        let d = Dataset::from_points(&pts).unwrap();
        let mean = ys.iter().sum::<f64>() / 5.0;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 5.0).sqrt();
        let m = LossModel::for_covariates(Family::PoissonLog, 1);
        let r = rmse(&d, &[mean.ln(), 0.0], m).unwrap();
        assert!((r - sd).abs() < 1e-12);
    }

    #[test]
    fn folds_partition_rows() {
        let f = folds(103, 10, 4);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        assert!(f.iter().all(|p| p.len() == 10 || p.len() == 11));
    }
}
