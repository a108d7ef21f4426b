//! Dense symmetric linear algebra on small `p × p` matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not positive definite: Cholesky pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is not positive semidefinite: eigenvalue {min:e} against max |λ| {max:e}")]
    NotPsd { min: f64, max: f64 },
    #[error("eigendecomposition failed")]
    Eigen,
    #[error("dimension mismatch: matrix {rows}x{rows}, vector {len}")]
    Dimension { rows: usize, len: usize },
}

const SYMMETRY_TOL: f64 = 1e-12;

/// A finite, symmetric `p × p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        assert!(m.is_square(), "symmetric matrix must be square");
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let asym = asymmetry(&m);
        if asym > SYMMETRY_TOL {
            return Err(LinalgError::NotSymmetric(asym));
        }
        Ok(Self(m))
    }

    /// Build from the upper triangle of `m`, mirroring it into the lower half.
    pub fn from_upper(mut m: DMatrix<f64>) -> Self {
        let p = m.nrows();
        for a in 0..p {
            for b in 0..a {
                m[(a, b)] = m[(b, a)];
            }
        }
        Self(m)
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal().iter().copied().collect()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[(a, b)]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(v)).iter().copied().collect()
    }

    /// Add `ridge` to the diagonal.
    pub fn ridged(&self, ridge: f64) -> Self {
        let mut m = self.0.clone();
        for k in 0..m.nrows() {
            m[(k, k)] += ridge;
        }
        Self(m)
    }

    /// `B M B` for a symmetric `B`, symmetrized against roundoff.
    pub fn sandwich(&self, bread: &SymmetricMatrix) -> SymmetricMatrix {
        let m = &bread.0 * &self.0 * &bread.0;
        symmetrize(m)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>, LinalgError> {
        let eig = SymmetricEigen::try_new(self.0.clone(), f64::EPSILON, 0).ok_or(LinalgError::Eigen)?;
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// Eigenvalues after the same flooring used by [`inv_sqrt`].
    pub fn spectral(&self) -> Result<Spectral, LinalgError> {
        let eig = SymmetricEigen::try_new(self.0.clone(), f64::EPSILON, 0).ok_or(LinalgError::Eigen)?;
        let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-8 * max_abs {
            return Err(LinalgError::NotPsd { min, max: max_abs });
        }
        Ok(Spectral { values: eig.eigenvalues, vectors: eig.eigenvectors, max_abs })
    }
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut worst = 0.0f64;
    for a in 0..p {
        for b in 0..a {
            worst = worst.max((m[(a, b)] - m[(b, a)]).abs());
        }
    }
    worst
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> SymmetricMatrix {
    let t = m.transpose();
    SymmetricMatrix((m + t) * 0.5)
}

/// Eigendecomposition of a PSD matrix, kept for repeated spectral functions.
#[derive(Debug, Clone)]
pub struct Spectral {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    max_abs: f64,
}

impl Spectral {
    /// `Q f(max(λ, floor)) Qᵀ`.
    fn apply(&self, floor: f64, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let d = self.values.map(|l| f(l.max(floor)));
        let q = &self.vectors;
        let scaled = q * DMatrix::from_diagonal(&d);
        symmetrize(scaled * q.transpose())
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_abs
    }

    pub fn floored_count(&self, floor: f64) -> usize {
        self.values.iter().filter(|&&l| l < floor).count()
    }

    pub fn inv_sqrt(&self, floor: f64) -> SymmetricMatrix {
        self.apply(floor, |l| 1.0 / l.sqrt())
    }

    pub fn inverse(&self, floor: f64) -> SymmetricMatrix {
        self.apply(floor, |l| 1.0 / l)
    }
}

/// Relative eigenvalue floor used when none is given: `1e-10 · λ_max`.
pub const DEFAULT_RELATIVE_FLOOR: f64 = 1e-10;

pub fn default_floor(m: &SymmetricMatrix) -> Result<f64, LinalgError> {
    Ok(DEFAULT_RELATIVE_FLOOR * m.spectral()?.max_eigenvalue())
}

/// `M^{-1/2}` with eigenvalues below `eigen_floor` raised to it.
pub fn inv_sqrt(m: &SymmetricMatrix, eigen_floor: f64) -> Result<SymmetricMatrix, LinalgError> {
    Ok(m.spectral()?.inv_sqrt(eigen_floor))
}

/// Lower Cholesky factor `L` with `M = L Lᵀ`.
pub fn cholesky(m: &SymmetricMatrix) -> Result<DMatrix<f64>, LinalgError> {
    let p = m.dim();
    let a = m.as_matrix();
    let mut l = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..p {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve_in_place(l: &DMatrix<f64>, x: &mut [f64]) {
    let p = l.nrows();
    for i in 0..p {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    for i in (0..p).rev() {
        let mut s = x[i];
        for k in (i + 1)..p {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
}

/// Solve `M x = b` for symmetric positive definite `M`.
pub fn solve_spd(m: &SymmetricMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != m.dim() {
        return Err(LinalgError::Dimension { rows: m.dim(), len: b.len() });
    }
    let l = cholesky(m)?;
    let mut x = b.to_vec();
    cholesky_solve_in_place(&l, &mut x);
    Ok(x)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn inverse_spd(m: &SymmetricMatrix) -> Result<SymmetricMatrix, LinalgError> {
    let p = m.dim();
    let l = cholesky(m)?;
    let mut inv = DMatrix::<f64>::zeros(p, p);
    let mut col = vec![0.0; p];
    for j in 0..p {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[j] = 1.0;
        cholesky_solve_in_place(&l, &mut col);
        inv.set_column(j, &DVector::from_column_slice(&col));
    }
    Ok(symmetrize(inv))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_spd(p: usize, entries: &[f64]) -> SymmetricMatrix {
        let b = DMatrix::from_iterator(p, p, entries.iter().copied().take(p * p));
        let m = &b * b.transpose() + DMatrix::identity(p, p) * 0.5;
        symmetrize(m)
    }

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn inv_sqrt_identity_and_diagonal() {
        let i = SymmetricMatrix::identity(3);
        let r = inv_sqrt(&i, 1e-12).unwrap();
        assert!(max_abs_diff(r.as_matrix(), i.as_matrix()) < 1e-15);
        let d = SymmetricMatrix::from_diagonal(&[4.0, 9.0]);
        let r = inv_sqrt(&d, 1e-12).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0 / 3.0]);
        assert!(max_abs_diff(r.as_matrix(), &expect) < 1e-15);
    }

    #[test]
    fn inv_sqrt_rejects_indefinite() {
        let m = SymmetricMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matches!(inv_sqrt(&m, 1e-12), Err(LinalgError::NotPsd { .. })));
    }

    #[test]
    fn inv_sqrt_floors_tiny_eigenvalues() {
        let m = SymmetricMatrix::from_diagonal(&[1.0, 0.0]);
        let r = inv_sqrt(&m, 1e-4).unwrap();
        assert!((r.get(1, 1) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn solve_small_systems() {
        assert_eq!(solve_spd(&SymmetricMatrix::identity(2), &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        let x = solve_spd(&SymmetricMatrix::from_diagonal(&[2.0, 4.0]), &[2.0, 4.0]).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn cholesky_reports_pivot() {
        let m = SymmetricMatrix::new(DMatrix::from_row_slice(3, 3, &[4., 2., 0., 2., 1., 0., 0., 0., 1.])).unwrap();
        assert!(matches!(solve_spd(&m, &[1.0, 1.0, 1.0]), Err(LinalgError::NotPositiveDefinite { pivot: 1, .. })));
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SymmetricMatrix::new(m), Err(LinalgError::NotSymmetric(_))));
    }

    proptest! {
        #[test]
        fn inv_sqrt_whitens(p in 1usize..7, entries in prop::collection::vec(-2.0f64..2.0, 49)) {
            let m = random_spd(p, &entries);
            let r = inv_sqrt(&m, 1e-14).unwrap();
            prop_assert!(asymmetry(r.as_matrix()) == 0.0);
            let w = r.as_matrix() * m.as_matrix() * r.as_matrix();
            prop_assert!(max_abs_diff(&w, &DMatrix::identity(p, p)) < 1e-8);
            let sq = r.as_matrix() * r.as_matrix() * m.as_matrix();
            prop_assert!(max_abs_diff(&sq, &DMatrix::identity(p, p)) < 1e-8);
        }

        #[test]
        fn solve_has_small_residual(p in 1usize..7, entries in prop::collection::vec(-2.0f64..2.0, 49), b in prop::collection::vec(-5.0f64..5.0, 7)) {
            let m = random_spd(p, &entries);
            let b = &b[..p];
            let x = solve_spd(&m, b).unwrap();
            let r: Vec<f64> = m.mul_vec(&x).iter().zip(b).map(|(a, c)| a - c).collect();
            prop_assert!(norm2(&r) <= 1e-8 * norm2(b).max(1e-300));
            let inv = inverse_spd(&m).unwrap();
            let prod = inv.as_matrix() * m.as_matrix();
            prop_assert!(max_abs_diff(&prod, &DMatrix::identity(p, p)) < 1e-8);
        }
    }
}
