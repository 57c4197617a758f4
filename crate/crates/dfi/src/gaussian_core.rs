//! Finite-dimensional generalized Wiener filter.
//!
//! For a zero-centered Gaussian field with prior covariance Φ, measured
//! through a linear response R with additive Gaussian noise of covariance N,
//! the posterior is Gaussian with mean m and covariance D:
//!
//! ```text
//! D = (Φ⁻¹ + R†N⁻¹R)⁻¹                      (information form)
//!   = Φ − ΦR†(RΦR† + N)⁻¹RΦ                 (data-space form)
//! m = D j,   j = R†N⁻¹d                     (information source)
//!   = ΦR†(RΦR† + N)⁻¹ d
//! ```
//!
//! The two forms agree wherever both are defined; only the data-space form
//! survives the noiseless limit N → 0, so N = 0 is always routed through it.
//! Inverses use a symmetric eigendecomposition with a relative pivot
//! tolerance; singular operators are reported, never regularized, which keeps
//! the noiseless limit exact.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative pivot tolerance: an operator counts as invertible only when its
/// smallest eigenvalue exceeds `PIVOT_RTOL` times its largest.
pub const PIVOT_RTOL: f64 = 1e-12;

const SYMMETRY_RTOL: f64 = 1e-12;
const PSD_RTOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GaussianCoreError {
    #[error("noise covariance N is singular at relative pivot tolerance {PIVOT_RTOL:e}")]
    SingularNoise,
    #[error("prior covariance Φ is singular at relative pivot tolerance {PIVOT_RTOL:e}")]
    SingularPrior,
    #[error("data-space Gram matrix RΦR† + N is singular")]
    SingularGram,
    #[error("matrix is not symmetric within {SYMMETRY_RTOL:e} · max|entry|")]
    NotSymmetric,
    #[error("matrix eigenvalue below the positive-semidefinite tolerance")]
    NotPositiveSemidefinite,
    #[error("non-finite matrix or vector entry")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, GaussianCoreError>;

/// Dense symmetric positive-semidefinite operator on a discrete index set.
///
/// Houses every covariance in the toolkit: the prior Φ, the noise N and the
/// posterior D. Construction validates symmetry and positive
/// semidefiniteness; the wrapped matrix is immutable afterwards.
#[derive(Debug, Clone)]
pub struct CovOperator {
    entries: DMatrix<f64>,
}

impl CovOperator {
    /// Validates and wraps a symmetric PSD matrix.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.is_empty() {
            return Err(GaussianCoreError::DimensionMismatch(format!(
                "covariance must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(GaussianCoreError::NonFinite);
        }
        let scale = entries.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..entries.nrows() {
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                    return Err(GaussianCoreError::NotSymmetric);
                }
            }
        }
        if scale > 0.0 {
            let eigs = entries.clone().symmetric_eigenvalues();
            let max = eigs.iter().fold(0.0f64, |m, &x| m.max(x));
            let min = eigs.iter().fold(f64::INFINITY, |m, &x| m.min(x));
            if min < -PSD_RTOL * max.max(scale) {
                return Err(GaussianCoreError::NotPositiveSemidefinite);
            }
        }
        Ok(Self { entries })
    }

    /// Builds the operator from a symmetric kernel sampled on `points`.
    pub fn from_kernel(points: &[f64], kernel: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let n = points.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel(points[i], points[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self::new(m)
    }

    /// The zero operator, valid as a noiseless N.
    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Symmetric inverse through an eigendecomposition, reporting `err` when
    /// the smallest eigenvalue falls below `PIVOT_RTOL` times the largest.
    fn sym_inverse(&self, err: GaussianCoreError) -> Result<DMatrix<f64>> {
        sym_inverse(&self.entries, err)
    }
}

fn sym_inverse(m: &DMatrix<f64>, err: GaussianCoreError) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &x| a.min(x));
    if max <= 0.0 || min <= PIVOT_RTOL * max {
        return Err(err);
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x));
    Ok(&eig.eigenvectors * inv_diag * eig.eigenvectors.transpose())
}

/// Linear measurement operator R mapping field space to data space,
/// `d = Rφ + n`.
#[derive(Debug, Clone)]
pub struct LinearResponse {
    entries: DMatrix<f64>,
}

impl LinearResponse {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() < 1 {
            return Err(GaussianCoreError::DimensionMismatch(
                "response needs at least one data row".into(),
            ));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(GaussianCoreError::NonFinite);
        }
        Ok(Self { entries })
    }

    /// Point evaluation of a single field component (one row, a single 1).
    pub fn point_evaluation(dim: usize, index: usize) -> Self {
        let mut m = DMatrix::zeros(1, dim);
        m[(0, index)] = 1.0;
        Self { entries: m }
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// Gaussian posterior 𝒢(φ − m, D) of the free theory.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub cov: CovOperator,
}

fn check_dims(phi: &CovOperator, r: &LinearResponse, n: &CovOperator) -> Result<()> {
    if r.cols() != phi.dim() || n.dim() != r.rows() {
        return Err(GaussianCoreError::DimensionMismatch(format!(
            "Φ is {}d, R is {}x{}, N is {}d",
            phi.dim(),
            r.rows(),
            r.cols(),
            n.dim()
        )));
    }
    Ok(())
}

/// Information source `j = R†N⁻¹d`.
pub fn information_source(
    r: &LinearResponse,
    n: &CovOperator,
    d: &DVector<f64>,
) -> Result<DVector<f64>> {
    if n.dim() != r.rows() || d.len() != r.rows() {
        return Err(GaussianCoreError::DimensionMismatch(format!(
            "R is {}x{}, N is {}d, d has {} entries",
            r.rows(),
            r.cols(),
            n.dim(),
            d.len()
        )));
    }
    let n_inv = n.sym_inverse(GaussianCoreError::SingularNoise)?;
    Ok(r.entries().transpose() * (n_inv * d))
}

/// Posterior covariance in the information form `D = (Φ⁻¹ + R†N⁻¹R)⁻¹`.
///
/// Requires both Φ and N invertible; a noiseless measurement (N = 0) must go
/// through [`propagator_data_space_form`] instead.
pub fn propagator_information_form(
    phi: &CovOperator,
    r: &LinearResponse,
    n: &CovOperator,
) -> Result<CovOperator> {
    check_dims(phi, r, n)?;
    let phi_inv = phi.sym_inverse(GaussianCoreError::SingularPrior)?;
    let n_inv = n.sym_inverse(GaussianCoreError::SingularNoise)?;
    let kernel = phi_inv + r.entries().transpose() * &n_inv * r.entries();
    // Φ⁻¹ + R†N⁻¹R is positive definite whenever the inputs were; a failed
    // pivot here means the prior term itself degenerated.
    let d = sym_inverse(&kernel, GaussianCoreError::SingularPrior)?;
    CovOperator::new(d)
}

/// Posterior covariance in the data-space form `Φ − ΦR†(RΦR† + N)⁻¹RΦ`.
///
/// Defined whenever the Gram matrix RΦR† + N is invertible, which admits
/// N = 0 as long as RΦR† is invertible.
pub fn propagator_data_space_form(
    phi: &CovOperator,
    r: &LinearResponse,
    n: &CovOperator,
) -> Result<CovOperator> {
    check_dims(phi, r, n)?;
    let g_inv = gram_inverse(phi, r, n)?;
    let phi_rt = phi.entries() * r.entries().transpose();
    let d = phi.entries() - &phi_rt * g_inv * phi_rt.transpose();
    CovOperator::new(d)
}

/// Generalized Wiener filter mean `m = ΦR†(RΦR† + N)⁻¹d`.
///
/// At N = 0 the data are reproduced exactly: R m = d.
pub fn wiener_mean(
    phi: &CovOperator,
    r: &LinearResponse,
    n: &CovOperator,
    d: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dims(phi, r, n)?;
    if d.len() != r.rows() {
        return Err(GaussianCoreError::DimensionMismatch(format!(
            "d has {} entries for {} data rows",
            d.len(),
            r.rows()
        )));
    }
    let g_inv = gram_inverse(phi, r, n)?;
    Ok(phi.entries() * r.entries().transpose() * g_inv * d)
}

/// Full posterior 𝒢(φ − m, D) via the data-space forms (valid at N = 0).
pub fn posterior(
    phi: &CovOperator,
    r: &LinearResponse,
    n: &CovOperator,
    d: &DVector<f64>,
) -> Result<GaussianPosterior> {
    Ok(GaussianPosterior {
        mean: wiener_mean(phi, r, n, d)?,
        cov: propagator_data_space_form(phi, r, n)?,
    })
}

fn gram_inverse(
    phi: &CovOperator,
    r: &LinearResponse,
    n: &CovOperator,
) -> Result<DMatrix<f64>> {
    let gram = r.entries() * phi.entries() * r.entries().transpose() + n.entries();
    sym_inverse(&gram, GaussianCoreError::SingularGram)
}
