//! Synthetic target distributions with exact samplers and, where available,
//! closed-form densities.

mod categorical;
mod gaussian;
mod mixture;
mod oracle;
mod split;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use categorical::{PairedCategoricalTask, DEFAULT_EMISSION_STD, DEFAULT_RADIUS};
pub use gaussian::{GaussianTask, MultivariateNormal};
pub use mixture::{split_mixture, AdditiveMixtureTask, GaussianMixture};
pub use oracle::{oracle_heads, OracleHead};
pub use split::{make_dataset_split, DatasetSplit, DatasetSplitSpec};

use crate::factorization::Partition;
use crate::Result;

fn default_class_count() -> usize {
    10
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS
}

fn default_emission_std() -> f64 {
    DEFAULT_EMISSION_STD
}

/// Task section of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    PairedCategorical {
        #[serde(default = "default_class_count")]
        class_count: usize,
        coupling: f64,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_emission_std")]
        emission_std: f64,
    },
    /// With `q_mean`/`q_cov` set, generated samples are drawn from that fixed
    /// normal instead of a trained generator, and exact ratios are available.
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
        partition: Partition,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q_mean: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q_cov: Option<Vec<Vec<f64>>>,
    },
    AdditiveMixture {
        accompaniment_means: Vec<Vec<f64>>,
        accompaniment_std: f64,
        vocals_means: Vec<Vec<f64>>,
        vocals_std: f64,
    },
}

/// A constructed task.
#[derive(Debug, Clone)]
pub enum SyntheticTask {
    PairedCategorical(PairedCategoricalTask),
    Gaussian {
        p: GaussianTask,
        fixed_fake: Option<GaussianTask>,
    },
    AdditiveMixture(AdditiveMixtureTask),
}

impl SyntheticTask {
    pub fn from_config(config: &TaskConfig) -> Result<Self> {
        Ok(match config {
            TaskConfig::PairedCategorical {
                class_count,
                coupling,
                radius,
                emission_std,
            } => Self::PairedCategorical(PairedCategoricalTask::with_geometry(
                *class_count,
                *coupling,
                *radius,
                *emission_std,
            )?),
            TaskConfig::Gaussian {
                mean,
                cov,
                partition,
                q_mean,
                q_cov,
            } => {
                let p = GaussianTask::from_rows(mean, cov, partition.clone())?;
                let fixed_fake = match (q_mean, q_cov) {
                    (None, None) => None,
                    (Some(m), Some(c)) => Some(GaussianTask::from_rows(m, c, partition.clone())?),
                    _ => {
                        return Err(crate::Error::Configuration(
                            "q_mean and q_cov must be given together".into(),
                        ))
                    }
                };
                Self::Gaussian { p, fixed_fake }
            }
            TaskConfig::AdditiveMixture {
                accompaniment_means,
                accompaniment_std,
                vocals_means,
                vocals_std,
            } => Self::AdditiveMixture(AdditiveMixtureTask::new(
                GaussianMixture::new(accompaniment_means.clone(), *accompaniment_std)?,
                GaussianMixture::new(vocals_means.clone(), *vocals_std)?,
            )?),
        })
    }

    pub fn partition(&self) -> &Partition {
        match self {
            Self::PairedCategorical(t) => t.partition(),
            Self::Gaussian { p, .. } => p.partition(),
            Self::AdditiveMixture(t) => t.partition(),
        }
    }

    pub fn sample_joint<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        match self {
            Self::PairedCategorical(t) => t.sample_joint(n, rng),
            Self::Gaussian { p, .. } => p.sample_joint(n, rng),
            Self::AdditiveMixture(t) => t.sample_joint(n, rng),
        }
    }

    pub fn sample_marginal<R: Rng + ?Sized>(
        &self,
        part: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        match self {
            Self::PairedCategorical(t) => t.sample_marginal(part, n, rng),
            Self::Gaussian { p, .. } => p.sample_marginal(part, n, rng),
            Self::AdditiveMixture(t) => t.sample_marginal(part, n, rng),
        }
    }
}
