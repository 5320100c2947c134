//! Symmetric positive-definite matrices and Gaussian / Student-t variate
//! generation.
//!
//! Every covariance in the crate (proposal covariance, measurement noise,
//! state covariance) is carried as an [`SpdMatrix`], which symmetrizes its
//! input and keeps the Cholesky factor alongside the entries.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A symmetric positive-definite matrix together with its lower Cholesky
/// factor.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    lower: DMatrix<f64>,
}

impl SpdMatrix {
    /// Symmetrizes `m` as `(m + mᵀ)/2` and factorizes it.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                what: "square matrix",
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Empty("matrix"));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance matrix"));
        }
        let sym = symmetrize(m);
        let chol = Cholesky::new(sym.clone()).ok_or(Error::NotPositiveDefinite("matrix"))?;
        let lower = chol.l();
        Ok(Self {
            matrix: sym,
            chol,
            lower,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0).expect("identity is positive definite")
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        Self::new(DMatrix::from_diagonal_element(dim, dim, scale))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Lower-triangular factor `L` with `L·Lᵀ = self`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.lower.clone()
    }

    pub(crate) fn l_factor(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Solves `self · X = b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_vector(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn ln_determinant(&self) -> f64 {
        self.chol.ln_determinant()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Quadratic form `xᵀ · self⁻¹ · x`, via one triangular solve.
    pub fn inverse_quadratic_form(&self, x: &DVector<f64>) -> f64 {
        let w = self
            .l_factor()
            .solve_lower_triangular(x)
            .expect("Cholesky factor has a positive diagonal");
        w.norm_squared()
    }

    /// `c · self` for `c > 0`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid("scale", format!("must be positive, got {c}")));
        }
        Self::new(&self.matrix * c)
    }
}

impl AsRef<DMatrix<f64>> for SpdMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Lower Cholesky factor of a symmetric matrix.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(SpdMatrix::new(m.clone())?.cholesky_factor())
}

/// Square root of the sum of squared entries.
pub fn frobenius_norm(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn extremal_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Whether `mu1·I < m < mu2·I` holds in the Loewner order.
///
/// Decided by factorizing the two shifted matrices `m − mu1·I` and
/// `mu2·I − m`; both succeed exactly when the extremal eigenvalues lie
/// strictly inside the band. Nothing is mutated.
pub fn project_to_band(m: &SpdMatrix, mu1: f64, mu2: f64) -> bool {
    let d = m.dim();
    let lower = m.matrix() - DMatrix::from_diagonal_element(d, d, mu1);
    if Cholesky::new(lower).is_none() {
        return false;
    }
    let upper = DMatrix::from_diagonal_element(d, d, mu2) - m.matrix();
    Cholesky::new(upper).is_some()
}

/// A vector of i.i.d. standard normal draws.
pub fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

/// `mean + sqrt(scale) · L · z` for a given standard-normal vector `z`.
pub fn mvn_from_normals(
    mean: &DVector<f64>,
    cov: &SpdMatrix,
    scale: f64,
    z: &DVector<f64>,
) -> Result<DVector<f64>> {
    Error::check_dim("mean", cov.dim(), mean.len())?;
    Error::check_dim("normal draw", cov.dim(), z.len())?;
    if !(scale > 0.0) {
        return Err(Error::invalid("scale", format!("must be positive, got {scale}")));
    }
    Ok(mean + cov.l_factor() * z * scale.sqrt())
}

/// Draws from `N(mean, scale · cov)`.
pub fn sample_mvn<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    cov: &SpdMatrix,
    scale: f64,
) -> Result<DVector<f64>> {
    let z = standard_normal_vector(rng, cov.dim());
    mvn_from_normals(mean, cov, scale, &z)
}

/// Multivariate-t draw assembled from its Gaussian and chi-square parts:
/// `location + sqrt(scale) · L · z / sqrt(chi2 / dof)`.
pub fn student_t_from_parts(
    location: &DVector<f64>,
    scale_mat: &SpdMatrix,
    scale: f64,
    dof: f64,
    z: &DVector<f64>,
    chi2: f64,
) -> Result<DVector<f64>> {
    if !(dof > 0.0) {
        return Err(Error::invalid("dof", format!("must be positive, got {dof}")));
    }
    let zero = DVector::zeros(location.len());
    let g = mvn_from_normals(&zero, scale_mat, scale, z)?;
    let w = (chi2 / dof).sqrt();
    Ok(location + g / w)
}

/// Draws from the multivariate Student-t with the given location, scale
/// matrix `scale · scale_mat` and degrees of freedom.
pub fn sample_student_t<R: Rng + ?Sized>(
    rng: &mut R,
    location: &DVector<f64>,
    scale_mat: &SpdMatrix,
    scale: f64,
    dof: f64,
) -> Result<DVector<f64>> {
    if !(dof > 0.0) {
        return Err(Error::invalid("dof", format!("must be positive, got {dof}")));
    }
    let z = standard_normal_vector(rng, scale_mat.dim());
    let chi2: f64 = ChiSquared::new(dof)
        .map_err(|e| Error::invalid("dof", e.to_string()))?
        .sample(rng);
    student_t_from_parts(location, scale_mat, scale, dof, &z, chi2)
}
