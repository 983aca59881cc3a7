use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::factorization::Partition;
use crate::{Error, Result};

/// A multivariate normal with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct MultivariateNormal {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_normaliser: f64,
}

impl MultivariateNormal {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.shape() != (d, d) {
            return Err(Error::Shape(format!(
                "mean has {d} entries, covariance is {:?}",
                cov.shape()
            )));
        }
        let scale = cov.abs().max().max(1.0);
        for r in 0..d {
            for c in 0..r {
                if (cov[(r, c)] - cov[(c, r)]).abs() > 1e-12 * scale {
                    return Err(Error::Degenerate("covariance is not symmetric".into()));
                }
            }
        }
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::Degenerate("covariance is not positive definite".into()))?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_normaliser = -0.5 * (d as f64 * (2.0 * PI).ln() + log_det);
        Ok(Self {
            mean,
            cov,
            chol,
            log_normaliser,
        })
    }

    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::InputShape {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let centred = DVector::from_column_slice(x) - &self.mean;
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&centred)
            .expect("Cholesky factor has a positive diagonal");
        Ok(self.log_normaliser - 0.5 * y.norm_squared())
    }

    /// `∇ₓ log N(x; μ, Σ) = −Σ⁻¹ (x − μ)`.
    pub fn grad_log_density(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::InputShape {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let centred = DVector::from_column_slice(x) - &self.mean;
        Ok(-self.chol.solve(&centred))
    }

    /// Draws `n` rows `μ + L z`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let d = self.dim();
        let l = self.chol.l();
        let mut out = DMatrix::zeros(n, d);
        for r in 0..n {
            let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &self.mean + &l * z;
            out.set_row(r, &x.transpose());
        }
        out
    }

    /// Marginal over the given dimensions, in the given order.
    pub fn marginal(&self, dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d >= self.dim()) {
            return Err(Error::Partition(format!(
                "cannot marginalise {}-dimensional normal onto {dims:?}",
                self.dim()
            )));
        }
        let mean = DVector::from_iterator(dims.len(), dims.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(dims.len(), dims.len(), |r, c| self.cov[(dims[r], dims[c])]);
        Self::new(mean, cov)
    }
}

/// A joint normal split into parts, with closed-form marginals.
#[derive(Debug, Clone)]
pub struct GaussianTask {
    joint: MultivariateNormal,
    partition: Partition,
    marginals: Vec<MultivariateNormal>,
}

impl GaussianTask {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, partition: Partition) -> Result<Self> {
        if partition.total_dim() != mean.len() {
            return Err(Error::Partition(format!(
                "partition covers {} dims, distribution has {}",
                partition.total_dim(),
                mean.len()
            )));
        }
        let joint = MultivariateNormal::new(mean, cov)?;
        let marginals = partition
            .parts()
            .iter()
            .map(|p| joint.marginal(p))
            .collect::<Result<_>>()?;
        Ok(Self {
            joint,
            partition,
            marginals,
        })
    }

    pub fn from_rows(mean: &[f64], cov: &[Vec<f64>], partition: Partition) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d || cov.iter().any(|r| r.len() != d) {
            return Err(Error::Shape(format!("covariance must be {d}x{d}")));
        }
        let cov = DMatrix::from_fn(d, d, |r, c| cov[r][c]);
        Self::new(DVector::from_column_slice(mean), cov, partition)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn joint(&self) -> &MultivariateNormal {
        &self.joint
    }

    pub fn marginal(&self, part: usize) -> Result<&MultivariateNormal> {
        self.marginals
            .get(part)
            .ok_or_else(|| Error::Partition(format!("no part {part}")))
    }

    /// Normal over an arbitrary ordered subset of dimensions.
    pub fn subset(&self, dims: &[usize]) -> Result<MultivariateNormal> {
        self.joint.marginal(dims)
    }

    pub fn sample_joint<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        self.joint.sample(n, rng)
    }

    pub fn sample_marginal<R: Rng + ?Sized>(
        &self,
        part: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        Ok(self.marginal(part)?.sample(n, rng))
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.joint.log_density(x)
    }

    pub fn marginal_log_density(&self, part: usize, xi: &[f64]) -> Result<f64> {
        self.marginal(part)?.log_density(xi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_normal_at_origin() {
        let n1 = MultivariateNormal::standard(1).unwrap();
        assert!((n1.log_density(&[0.0]).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-15);
        for d in 2..6 {
            let n = MultivariateNormal::standard(d).unwrap();
            let expected = -(d as f64) / 2.0 * (2.0 * PI).ln();
            assert!((n.log_density(&vec![0.0; d]).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_definite_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            MultivariateNormal::new(DVector::zeros(2), cov),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn marginal_moments_match_monte_carlo() {
        let p = Partition::contiguous(&[2, 1]).unwrap();
        let cov = vec![
            vec![1.0, 0.6, 0.2],
            vec![0.6, 2.0, -0.3],
            vec![0.2, -0.3, 0.5],
        ];
        let task = GaussianTask::from_rows(&[1.0, -1.0, 0.5], &cov, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let draws = task.sample_marginal(0, n, &mut rng).unwrap();
        let marginal = task.marginal(0).unwrap();
        for c in 0..2 {
            let col = draws.column(c);
            let mean = col.mean();
            let var = marginal.cov()[(c, c)];
            let se = (var / n as f64).sqrt();
            assert!((mean - marginal.mean()[c]).abs() < 3.0 * se, "column {c} mean {mean}");
            let sample_var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            // Var of the sample variance of a normal is 2σ⁴/(n−1).
            let se_var = (2.0 * var * var / (n - 1) as f64).sqrt();
            assert!((sample_var - var).abs() < 3.0 * se_var, "column {c} var {sample_var}");
        }
        let c01: f64 = draws
            .row_iter()
            .map(|r| (r[0] - marginal.mean()[0]) * (r[1] - marginal.mean()[1]))
            .sum::<f64>()
            / n as f64;
        // Var of the product of two correlated normals is σ₁²σ₂² + σ₁₂².
        let se_c = ((1.0 * 2.0 + 0.36) / n as f64).sqrt();
        assert!((c01 - 0.6).abs() < 3.0 * se_c);
    }
}
