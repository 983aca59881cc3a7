use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::classes::{classify_parts, dependency_metric, ClassTable};
use super::frechet::frechet_distance;
use super::ratio::ratio_mae;
use crate::data::{oracle_heads, SyntheticTask};
use crate::factorization::{select_columns, CombinationMode};
use crate::training::{TrainConfig, Trainer};
use crate::Result;

/// Offset mixed into the run seed for the evaluation stream, so evaluation
/// never draws from the training rng.
const EVAL_STREAM: u64 = 0x5eed_e7a1_0000_0001;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalMetrics {
    pub dependency_metric: Option<f64>,
    pub frechet_per_part: Vec<Option<f64>>,
    pub ratio_mae: Option<f64>,
}

/// Fixed held-out data and noise used to score a model at any step.
pub struct TaskEvaluator {
    task: SyntheticTask,
    real: DMatrix<f64>,
    noise: DMatrix<f64>,
    conditioning: Option<DMatrix<f64>>,
    real_table: Option<ClassTable>,
    ratio_points: Option<DMatrix<f64>>,
    fake_seed: u64,
}

impl TaskEvaluator {
    pub fn new(task: &SyntheticTask, config: &TrainConfig, n_eval: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ EVAL_STREAM);
        let real = task.sample_joint(n_eval, &mut rng);
        let noise = DMatrix::from_fn(n_eval, config.noise_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let conditioning = match task {
            SyntheticTask::AdditiveMixture(t) => Some(t.mixtures_of(&real)),
            _ if config.combination_mode == CombinationMode::Conditional => {
                Some(select_columns(&real, &task.partition().parts()[0]))
            }
            _ => None,
        };
        let real_table = match task {
            SyntheticTask::PairedCategorical(t) => {
                Some(ClassTable::from_probabilities(t.joint_class_probabilities())?)
            }
            _ => None,
        };
        let ratio_points = match task {
            SyntheticTask::Gaussian {
                p,
                fixed_fake: Some(q),
            } => {
                let a = p.sample_joint(n_eval / 2, &mut rng);
                let b = q.sample_joint(n_eval - n_eval / 2, &mut rng);
                Some(DMatrix::from_fn(n_eval, a.ncols(), |r, c| {
                    if r < a.nrows() {
                        a[(r, c)]
                    } else {
                        b[(r - a.nrows(), c)]
                    }
                }))
            }
            _ => None,
        };
        Ok(Self {
            task: task.clone(),
            real,
            noise,
            conditioning,
            real_table,
            ratio_points,
            fake_seed: rng.gen(),
        })
    }

    pub fn real_samples(&self) -> &DMatrix<f64> {
        &self.real
    }

    /// Generated samples for the fixed evaluation noise.
    pub fn generated(&self, trainer: &Trainer) -> Result<DMatrix<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.fake_seed);
        trainer.generate(&self.noise, self.conditioning.as_ref(), &mut rng)
    }

    pub fn evaluate(&self, trainer: &Trainer) -> Result<EvalMetrics> {
        let generated = self.generated(trainer)?;
        let finite = generated.iter().all(|v| v.is_finite());
        let frechet_per_part = self
            .task
            .partition()
            .parts()
            .iter()
            .map(|cols| {
                if !finite {
                    return Ok(None);
                }
                let d = frechet_distance(&select_columns(&generated, cols), &select_columns(&self.real, cols))?;
                Ok(d.is_finite().then_some(d))
            })
            .collect::<Result<Vec<_>>>()?;
        let dependency_metric = match (&self.task, &self.real_table) {
            (SyntheticTask::PairedCategorical(t), Some(real)) if finite => {
                let pairs = classify_parts(&generated, t)?;
                let table = ClassTable::from_pairs(&pairs, t.class_count())?;
                dependency_metric(real, &table)?.value()
            }
            _ => None,
        };
        let ratio_mae = match (&self.task, &self.ratio_points) {
            (
                SyntheticTask::Gaussian {
                    p,
                    fixed_fake: Some(q),
                },
                Some(points),
            ) => {
                let oracle = oracle_heads(p, q, trainer.heads().layout())?;
                Some(ratio_mae(trainer.heads(), &oracle, points)?.combined)
            }
            _ => None,
        };
        Ok(EvalMetrics {
            dependency_metric,
            frechet_per_part,
            ratio_mae,
        })
    }
}
