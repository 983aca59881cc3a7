use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Sample mean and unbiased covariance of the rows of `x`.
pub fn fit_gaussian(x: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 samples, got {n}")));
    }
    let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()));
    let mut centred = x.clone();
    for mut row in centred.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centred.tr_mul(&centred) / (n - 1) as f64;
    Ok((mean, cov))
}

fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

/// Fréchet distance between two normals:
/// `‖μ₁ − μ₂‖² + Tr(Σ₁ + Σ₂ − 2 (Σ₁Σ₂)^{1/2})`.
///
/// The trace of the square root is taken from the eigenvalues of the
/// symmetric matrix `Σ₁^{1/2} Σ₂ Σ₁^{1/2}`, which has the same spectrum as
/// `Σ₁Σ₂`. Negative eigenvalues from sampling noise are clamped to zero.
pub fn frechet_gaussians(
    mu1: &DVector<f64>,
    cov1: &DMatrix<f64>,
    mu2: &DVector<f64>,
    cov2: &DMatrix<f64>,
) -> Result<f64> {
    let d = mu1.len();
    if mu2.len() != d || cov1.shape() != (d, d) || cov2.shape() != (d, d) {
        return Err(Error::Shape("Fréchet inputs have mismatched dimensions".into()));
    }
    let s1 = symmetric_sqrt(cov1);
    let inner = &s1 * cov2 * &s1;
    let eig = SymmetricEigen::new((&inner + inner.transpose()) * 0.5);
    let most_negative = eig.eigenvalues.min();
    if most_negative < -1e-6 {
        log::warn!("covariance product has eigenvalue {most_negative:e}; clamped to 0");
    }
    let tr_sqrt: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let dist = (mu1 - mu2).norm_squared() + cov1.trace() + cov2.trace() - 2.0 * tr_sqrt;
    Ok(dist.max(0.0))
}

/// Fréchet distance between Gaussian fits of two sample sets.
pub fn frechet_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "sample sets have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let (m1, c1) = fit_gaussian(a)?;
    let (m2, c2) = fit_gaussian(b)?;
    frechet_gaussians(&m1, &c1, &m2, &c2)
}
