use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SyntheticTask;
use crate::factorization::{select_columns, Partition};
use crate::{Error, Result};

/// Sample budget: `n_paired` joint observations, the rest spread evenly over
/// the parts as unpaired observations (earlier parts take any remainder).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplitSpec {
    pub n_total: usize,
    pub n_paired: usize,
}

impl DatasetSplitSpec {
    pub fn new(n_total: usize, n_paired: usize) -> Result<Self> {
        let spec = Self { n_total, n_paired };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paired > self.n_total {
            return Err(Error::Configuration(format!(
                "n_paired = {} exceeds n_total = {}",
                self.n_paired, self.n_total
            )));
        }
        Ok(())
    }

    pub fn unpaired_counts(&self, parts: usize) -> Vec<usize> {
        let rest = self.n_total - self.n_paired;
        (0..parts)
            .map(|i| rest / parts + usize::from(i < rest % parts))
            .collect()
    }
}

/// Training pools: joint observations plus per-part marginal observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub partition: Partition,
    pub paired: DMatrix<f64>,
    pub unpaired: Vec<DMatrix<f64>>,
    /// Observed mixtures for the additive task: sums of the paired rows, then
    /// sums of unpaired rows matched by index.
    pub mixtures: Option<DMatrix<f64>>,
}

impl DatasetSplit {
    pub fn n_paired(&self) -> usize {
        self.paired.nrows()
    }

    pub fn n_unpaired(&self, part: usize) -> usize {
        self.unpaired.get(part).map_or(0, |u| u.nrows())
    }

    /// Every observation of part `i`: paired projections then unpaired rows.
    pub fn marginal_pool(&self, part: usize) -> Result<DMatrix<f64>> {
        let cols = self.partition.part(part)?;
        let projected = select_columns(&self.paired, cols);
        let unpaired = &self.unpaired[part];
        let n = projected.nrows() + unpaired.nrows();
        Ok(DMatrix::from_fn(n, cols.len(), |r, c| {
            if r < projected.nrows() {
                projected[(r, c)]
            } else {
                unpaired[(r - projected.nrows(), c)]
            }
        }))
    }
}

/// Draws a fresh split: `n_paired` joints and independent marginal draws for
/// the remaining budget.
pub fn make_dataset_split<R: Rng + ?Sized>(
    task: &SyntheticTask,
    spec: DatasetSplitSpec,
    rng: &mut R,
) -> Result<DatasetSplit> {
    spec.validate()?;
    let partition = task.partition().clone();
    let paired = task.sample_joint(spec.n_paired, rng);
    let unpaired = spec
        .unpaired_counts(partition.len())
        .into_iter()
        .enumerate()
        .map(|(i, n)| task.sample_marginal(i, n, rng))
        .collect::<Result<Vec<_>>>()?;
    let mixtures = match task {
        SyntheticTask::AdditiveMixture(t) => {
            let from_pairs = t.mixtures_of(&paired);
            let k = unpaired[0].nrows().min(unpaired[1].nrows());
            let d = t.source_dim();
            let n = from_pairs.nrows() + k;
            Some(DMatrix::from_fn(n, d, |r, c| {
                if r < from_pairs.nrows() {
                    from_pairs[(r, c)]
                } else {
                    let u = r - from_pairs.nrows();
                    unpaired[0][(u, c)] + unpaired[1][(u, c)]
                }
            }))
        }
        _ => None,
    };
    Ok(DatasetSplit {
        partition,
        paired,
        unpaired,
        mixtures,
    })
}
