//! Weighted empirical risk `n⁻¹ Σ wᵢ l(dᵢ; θ)` and the curvature / score sums
//! built from the same per-row pieces.

use nalgebra::DMatrix;

use crate::data::{linear_index, Dataset};
use crate::linalg::SymmetricMatrix;
use crate::loss::{Family, LossError, LossModel};
use crate::newton::{Evaluation, RiskFunction};
use crate::par::{chunked_reduce, CHUNK};

/// Which rows of a dataset enter a sum.
#[derive(Debug, Clone, Copy)]
pub enum Rows<'a> {
    All,
    Subset(&'a [usize]),
}

impl Rows<'_> {
    pub fn len(&self, data: &Dataset) -> usize {
        match self {
            Rows::All => data.n(),
            Rows::Subset(s) => s.len(),
        }
    }

    pub fn is_empty(&self, data: &Dataset) -> bool {
        self.len(data) == 0
    }

    #[inline]
    fn row(&self, k: usize) -> usize {
        match self {
            Rows::All => k,
            Rows::Subset(s) => s[k],
        }
    }
}

/// Accumulator for sums of scalar multiples of `z` and `zzᵀ` (upper triangle).
struct Accum {
    value: f64,
    grad: Vec<f64>,
    upper: Vec<f64>,
}

impl Accum {
    fn new(p: usize, with_matrix: bool) -> Self {
        Self { value: 0.0, grad: vec![0.0; p], upper: if with_matrix { vec![0.0; p * p] } else { Vec::new() } }
    }

    fn merge(mut self, other: Accum) -> Accum {
        self.value += other.value;
        self.grad.iter_mut().zip(&other.grad).for_each(|(a, b)| *a += b);
        self.upper.iter_mut().zip(&other.upper).for_each(|(a, b)| *a += b);
        self
    }

    #[inline]
    fn add_vector(&mut self, coef: f64, x: &[f64]) {
        self.grad[0] += coef;
        for (g, v) in self.grad[1..].iter_mut().zip(x) {
            *g += coef * v;
        }
    }

    #[inline]
    fn add_outer(&mut self, coef: f64, x: &[f64]) {
        let p = x.len() + 1;
        // z = (1, x); row a of the upper triangle is z_a * z[a..].
        let up = &mut self.upper;
        up[0] += coef;
        for (b, v) in x.iter().enumerate() {
            up[b + 1] += coef * v;
        }
        for a in 1..p {
            let ca = coef * x[a - 1];
            let row = &mut up[a * p + a..a * p + p];
            for (r, v) in row.iter_mut().zip(&x[a - 1..]) {
                *r += ca * v;
            }
        }
    }

    fn into_matrix(self, p: usize, scale: f64) -> SymmetricMatrix {
        let m = DMatrix::from_row_slice(p, p, &self.upper) * scale;
        SymmetricMatrix::from_upper(m)
    }
}

/// HT-weighted risk, normalized by the full-data size `n`.
#[derive(Debug, Clone)]
pub struct WeightedRisk<'a> {
    data: &'a Dataset,
    model: LossModel,
    rows: Rows<'a>,
    weights: Option<&'a [f64]>,
    scale: f64,
}

impl<'a> WeightedRisk<'a> {
    /// `weights`, when given, is aligned with `rows`.
    pub fn new(
        data: &'a Dataset,
        model: LossModel,
        rows: Rows<'a>,
        weights: Option<&'a [f64]>,
    ) -> Result<Self, LossError> {
        if !data.has_response() {
            return Err(LossError::MissingResponse);
        }
        if data.q() + 1 != model.dim() {
            return Err(LossError::DimensionMismatch { expected: model.dim(), found: data.q() + 1 });
        }
        if let Some(w) = weights {
            assert_eq!(w.len(), rows.len(data), "weights must align with rows");
        }
        Ok(Self { data, model, rows, weights, scale: 1.0 / data.n() as f64 })
    }

    /// Replace the `1/n` normalization.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    #[inline]
    fn weight(&self, k: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[k])
    }

    fn accumulate(&self, theta: &[f64], with_derivs: bool) -> Accum {
        let p = self.model.dim();
        let family = self.model.family();
        let m = self.rows.len(self.data);
        let y = self.data.responses().expect("checked at construction");
        chunked_reduce(
            m,
            CHUNK,
            |range| {
                let mut acc = Accum::new(p, with_derivs);
                for k in range {
                    let i = self.rows.row(k);
                    let w = self.weight(k);
                    let x = self.data.x(i);
                    let t = linear_index(theta, x);
                    acc.value += w * family.loss_at(y[i], t);
                    if with_derivs {
                        acc.add_vector(-w * family.score_at(y[i], t), x);
                        acc.add_outer(w * family.curvature_at(y[i], t), x);
                    }
                }
                acc
            },
            Accum::merge,
        )
        .unwrap_or_else(|| Accum::new(p, with_derivs))
    }
}

impl RiskFunction for WeightedRisk<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn evaluate(&self, theta: &[f64]) -> Evaluation {
        let p = self.model.dim();
        let acc = self.accumulate(theta, true);
        let value = acc.value * self.scale;
        let gradient = acc.grad.iter().map(|g| g * self.scale).collect();
        let hessian = acc.into_matrix(p, self.scale);
        Evaluation { value, gradient, hessian }
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.accumulate(theta, false).value * self.scale
    }

    fn diverging(&self, theta: &[f64]) -> bool {
        let family = self.model.family();
        if !family.is_binary() {
            return false;
        }
        let y = self.data.responses().expect("checked at construction");
        (0..self.rows.len(self.data)).all(|k| {
            let i = self.rows.row(k);
            self.weight(k) == 0.0 || (y[i] - family.mean_at(linear_index(theta, self.data.x(i)))).abs() < 1e-6
        })
    }
}

/// `scale · Σ cₖ · z zᵀ` over `rows`, where `cₖ = coef(k, y, t)`.
pub fn weighted_outer<F>(data: &Dataset, theta: &[f64], rows: Rows<'_>, scale: f64, coef: F) -> SymmetricMatrix
where
    F: Fn(usize, f64, f64) -> f64 + Sync + Send,
{
    let p = data.q() + 1;
    let y = data.responses();
    let acc = chunked_reduce(
        rows.len(data),
        CHUNK,
        |range| {
            let mut acc = Accum::new(p, true);
            for k in range {
                let i = rows.row(k);
                let x = data.x(i);
                let t = linear_index(theta, x);
                acc.add_outer(coef(k, y.map_or(f64::NAN, |y| y[i]), t), x);
            }
            acc
        },
        Accum::merge,
    )
    .unwrap_or_else(|| Accum::new(p, true));
    acc.into_matrix(p, scale)
}

/// `n⁻¹ Σᵢ G(dᵢ; θ)` over the whole dataset.
pub fn mean_hessian(data: &Dataset, model: LossModel, theta: &[f64]) -> Result<SymmetricMatrix, LossError> {
    check(data, model, theta)?;
    let family = model.family();
    Ok(weighted_outer(data, theta, Rows::All, 1.0 / data.n() as f64, |_, y, t| family.curvature_at(y, t)))
}

/// `Â = n⁻¹ Σ wᵢ G(dᵢ; θ)` over a weighted subsample.
pub fn weighted_hessian(
    data: &Dataset,
    model: LossModel,
    theta: &[f64],
    rows: &[usize],
    weights: &[f64],
) -> Result<SymmetricMatrix, LossError> {
    check(data, model, theta)?;
    let family = model.family();
    Ok(weighted_outer(data, theta, Rows::Subset(rows), 1.0 / data.n() as f64, |k, y, t| {
        weights[k] * family.curvature_at(y, t)
    }))
}

/// `V̂ = n⁻¹ Σ wᵢ² g(dᵢ; θ) g(dᵢ; θ)ᵀ` over a weighted subsample.
pub fn weighted_score_outer(
    data: &Dataset,
    model: LossModel,
    theta: &[f64],
    rows: &[usize],
    weights: &[f64],
) -> Result<SymmetricMatrix, LossError> {
    check(data, model, theta)?;
    let family = model.family();
    Ok(weighted_outer(data, theta, Rows::Subset(rows), 1.0 / data.n() as f64, |k, y, t| {
        let s = family.score_at(y, t);
        weights[k] * weights[k] * s * s
    }))
}

/// `Σ wᵢ g(dᵢ; θ)` scaled by `1/n`.
pub fn weighted_gradient(
    data: &Dataset,
    model: LossModel,
    theta: &[f64],
    rows: Rows<'_>,
    weights: Option<&[f64]>,
) -> Result<Vec<f64>, LossError> {
    let risk = WeightedRisk::new(data, model, rows, weights)?;
    Ok(risk.evaluate(theta).gradient)
}

fn check(data: &Dataset, model: LossModel, theta: &[f64]) -> Result<(), LossError> {
    if !data.has_response() {
        return Err(LossError::MissingResponse);
    }
    if theta.len() != model.dim() || data.q() + 1 != model.dim() {
        return Err(LossError::DimensionMismatch { expected: model.dim(), found: theta.len() });
    }
    Ok(())
}

/// Conditional score variances `σ(zᵢ)` at `θ`, for families that define them.
pub fn score_variances(data: &Dataset, family: Family, theta: &[f64]) -> Result<Vec<f64>, LossError> {
    (0..data.n()).map(|i| family.score_variance_at(linear_index(theta, data.x(i)))).collect()
}
