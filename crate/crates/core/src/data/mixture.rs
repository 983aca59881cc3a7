use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::factorization::Partition;
use crate::{Error, Result};

/// Equal-weight mixture of isotropic normals.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    means: Vec<Vec<f64>>,
    std: f64,
}

impl GaussianMixture {
    pub fn new(means: Vec<Vec<f64>>, std: f64) -> Result<Self> {
        let Some(first) = means.first() else {
            return Err(Error::Configuration("a mixture needs at least one component".into()));
        };
        let dim = first.len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(Error::Configuration(
                "mixture components must share a positive dimension".into(),
            ));
        }
        if !(std > 0.0) {
            return Err(Error::Configuration(format!("mixture std must be positive, got {std}")));
        }
        Ok(Self { means, std })
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn mean(&self) -> Vec<f64> {
        let k = self.means.len() as f64;
        (0..self.dim())
            .map(|d| self.means.iter().map(|m| m[d]).sum::<f64>() / k)
            .collect()
    }

    /// Per-dimension variance: within-component plus between-component spread.
    pub fn variance(&self) -> Vec<f64> {
        let k = self.means.len() as f64;
        let mean = self.mean();
        (0..self.dim())
            .map(|d| {
                self.std * self.std
                    + self.means.iter().map(|m| (m[d] - mean[d]).powi(2)).sum::<f64>() / k
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(n, self.dim());
        for r in 0..n {
            let m = &self.means[rng.gen_range(0..self.means.len())];
            for (c, &mu) in m.iter().enumerate() {
                x[(r, c)] = mu + self.std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        x
    }
}

/// Two independent sources whose sum is observed as a mixture `m = a + v`.
/// Joint samples are `(a, v)`; a separating generator sees `m` and emits a
/// mask `b` with `a′ = b ⊙ m`, `v′ = (1 − b) ⊙ m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveMixtureTask {
    accompaniment: GaussianMixture,
    vocals: GaussianMixture,
    partition: Partition,
}

impl AdditiveMixtureTask {
    pub fn new(accompaniment: GaussianMixture, vocals: GaussianMixture) -> Result<Self> {
        if accompaniment.dim() != vocals.dim() {
            return Err(Error::Configuration(format!(
                "sources have dimensions {} and {}",
                accompaniment.dim(),
                vocals.dim()
            )));
        }
        let dim = accompaniment.dim();
        Ok(Self {
            accompaniment,
            vocals,
            partition: Partition::contiguous(&[dim, dim])?,
        })
    }

    pub fn source_dim(&self) -> usize {
        self.accompaniment.dim()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn source(&self, part: usize) -> Result<&GaussianMixture> {
        match part {
            0 => Ok(&self.accompaniment),
            1 => Ok(&self.vocals),
            _ => Err(Error::Partition(format!("mixture task has parts 0 and 1, not {part}"))),
        }
    }

    pub fn sample_joint<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let a = self.accompaniment.sample(n, rng);
        let v = self.vocals.sample(n, rng);
        let dim = self.source_dim();
        DMatrix::from_fn(n, 2 * dim, |r, c| if c < dim { a[(r, c)] } else { v[(r, c - dim)] })
    }

    pub fn sample_marginal<R: Rng + ?Sized>(
        &self,
        part: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        Ok(self.source(part)?.sample(n, rng))
    }

    /// `m = a + v` for each joint row.
    pub fn mixtures_of(&self, joint: &DMatrix<f64>) -> DMatrix<f64> {
        let dim = self.source_dim();
        DMatrix::from_fn(joint.nrows(), dim, |r, c| joint[(r, c)] + joint[(r, c + dim)])
    }

    pub fn sample_mixtures<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        self.mixtures_of(&self.sample_joint(n, rng))
    }
}

/// Splits `m` into `(a, v)` with `a ≈ b·m`, `v ≈ (1 − b)·m` and `a + v == m`
/// exactly in floating point.
///
/// The larger of the two shares is obtained by one subtraction from `m`;
/// since it lies within a factor of two of `m`, that subtraction is exact
/// (Sterbenz), and so is the final sum.
pub fn split_mixture(m: f64, b: f64) -> (f64, f64) {
    let a0 = b * m;
    if a0.abs() >= 0.5 * m.abs() {
        (a0, m - a0)
    } else {
        let v = m - a0;
        (m - v, v)
    }
}
