use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::TrainConfig;
use super::generator::{GeneratedBatch, Generator, GeneratorKind};
use super::losses::{disc_loss, disc_loss_grad, gen_loss, gen_loss_grad};
use super::samplers::{independent_real_batch, sample_rows, shuffle_fake_parts};
use crate::data::{DatasetSplit, GaussianTask, SyntheticTask};
use crate::factorization::{
    select_columns, FactorLayout, HeadId, HeadRole, HeadSlot, ModelKind, SubDiscriminatorSet,
};
use crate::nn::{Activation, AdamState, DenseNet};
use crate::{Error, Result};

/// One Adam step on a logit head separating `real` rows from `fake` rows.
/// Returns the loss before the step.
pub fn discriminator_update(
    head: &mut DenseNet,
    optimizer: &mut AdamState,
    real: &DMatrix<f64>,
    fake: &DMatrix<f64>,
) -> Result<f64> {
    let real_pass = head.forward(real)?;
    let fake_pass = head.forward(fake)?;
    let rl: DVector<f64> = real_pass.logits.column(0).into_owned();
    let fl: DVector<f64> = fake_pass.logits.column(0).into_owned();
    let loss = disc_loss(&rl, &fl)?;
    let (gr, gf) = disc_loss_grad(&rl, &fl)?;
    let as_col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let mut grads = head.backward(&real_pass.cache, &as_col(&gr))?.params;
    grads.accumulate(&head.backward(&fake_pass.cache, &as_col(&gf))?.params);
    optimizer.step(&mut head.parameters_mut(), &grads.slices())?;
    Ok(loss)
}

/// Where a head's real-side samples came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolSource {
    /// Joint observations only.
    Paired,
    /// All observations of part `i`: paired projections and unpaired rows.
    Marginal(usize),
    /// The generator's own output (generated-dependency heads).
    Generated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadUpdate {
    pub id: HeadId,
    pub loss: f64,
    pub real_source: PoolSource,
    /// Global dimensions the head was fed.
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscStepRecord {
    pub gen_step: usize,
    pub heads: Vec<HeadUpdate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenStepRecord {
    pub gen_step: usize,
    pub loss: f64,
}

pub enum TrainEvent<'a> {
    Disc(&'a DiscStepRecord),
    Gen(&'a GenStepRecord),
    Eval { step: usize, trainer: &'a Trainer },
    Checkpoint { step: usize, trainer: &'a Trainer },
}

struct HeadPool {
    source: PoolSource,
    rows: DMatrix<f64>,
}

/// Source of generated samples: a trained generator, or a fixed density for
/// discriminator-only runs.
#[derive(Debug, Clone)]
pub enum FakeSource {
    Generator { net: Generator, optimizer: AdamState },
    Fixed(GaussianTask),
}

/// Heads, generator, data and rng of one training run.
pub struct Trainer {
    config: TrainConfig,
    heads: SubDiscriminatorSet<DenseNet>,
    optimizers: Vec<AdamState>,
    pools: Vec<HeadPool>,
    fake: FakeSource,
    conditioning_pool: Option<DMatrix<f64>>,
    rng: ChaCha8Rng,
    gen_steps: usize,
    disc_steps: usize,
}

fn local_positions(part: &[usize], columns: &[usize]) -> Vec<usize> {
    columns
        .iter()
        .map(|c| part.iter().position(|p| p == c).expect("slot columns lie in their part"))
        .collect()
}

impl Trainer {
    pub fn new(task: &SyntheticTask, data: DatasetSplit, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if &data.partition != task.partition() {
            return Err(Error::Partition("dataset and task partitions differ".into()));
        }
        let partition = task.partition().clone();
        let layout = match config.model_kind {
            ModelKind::GanBaseline => FactorLayout::baseline(partition.clone()),
            ModelKind::Factorgan => FactorLayout::new(
                partition.clone(),
                ModelKind::Factorgan,
                config.combination_mode,
                config.hierarchy.clone(),
            )?,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let heads = SubDiscriminatorSet::build(layout, |slot| {
            let mut dims = vec![slot.input_dim()];
            dims.extend_from_slice(&config.disc_hidden);
            dims.push(1);
            let mut net =
                DenseNet::with_rng(&dims, config.hidden_activation, Activation::Identity, &mut rng)?;
            if config.spectral_norm {
                net.enable_spectral_norm(config.power_iterations, &mut rng);
            }
            if config.zero_init_heads {
                net.zero_output_layer();
            }
            Ok(net)
        })?;
        let optimizers = heads
            .iter()
            .map(|(_, h)| AdamState::new(&h.parameter_sizes(), config.adam()))
            .collect();
        let pools = heads
            .iter()
            .map(|(slot, _)| Self::pool_for(slot, &data))
            .collect::<Result<Vec<_>>>()?;

        let kind = match (task, config.combination_mode) {
            (SyntheticTask::AdditiveMixture(_), _) => GeneratorKind::MixtureMask,
            (_, crate::factorization::CombinationMode::Conditional) => GeneratorKind::Conditional,
            _ => GeneratorKind::Direct,
        };
        let conditioning_pool = match kind {
            GeneratorKind::Direct => None,
            GeneratorKind::Conditional => Some(data.marginal_pool(0)?),
            GeneratorKind::MixtureMask => data.mixtures.clone(),
        };
        let fake = match task {
            SyntheticTask::Gaussian {
                fixed_fake: Some(q), ..
            } => FakeSource::Fixed(q.clone()),
            _ => {
                let net = Generator::new(
                    kind,
                    partition,
                    config.noise_dim,
                    &config.gen_hidden,
                    config.hidden_activation,
                    config.generator_output,
                    &mut rng,
                )?;
                let optimizer = AdamState::new(&net.net().parameter_sizes(), config.adam());
                FakeSource::Generator { net, optimizer }
            }
        };
        Ok(Self {
            config,
            heads,
            optimizers,
            pools,
            fake,
            conditioning_pool,
            rng,
            gen_steps: 0,
            disc_steps: 0,
        })
    }

    fn pool_for(slot: &HeadSlot, data: &DatasetSplit) -> Result<HeadPool> {
        Ok(match (slot.id.role(), slot.source_part) {
            (HeadRole::GeneratedDependency, _) => HeadPool {
                source: PoolSource::Generated,
                rows: DMatrix::zeros(0, slot.input_dim()),
            },
            (_, None) => HeadPool {
                source: PoolSource::Paired,
                rows: select_columns(&data.paired, &slot.columns),
            },
            (_, Some(i)) => {
                let part = data.partition.part(i)?;
                HeadPool {
                    source: PoolSource::Marginal(i),
                    rows: select_columns(&data.marginal_pool(i)?, &local_positions(part, &slot.columns)),
                }
            }
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn heads(&self) -> &SubDiscriminatorSet<DenseNet> {
        &self.heads
    }

    pub fn heads_mut(&mut self) -> &mut SubDiscriminatorSet<DenseNet> {
        &mut self.heads
    }

    pub fn fake_source(&self) -> &FakeSource {
        &self.fake
    }

    pub fn generator(&self) -> Option<&Generator> {
        match &self.fake {
            FakeSource::Generator { net, .. } => Some(net),
            FakeSource::Fixed(_) => None,
        }
    }

    pub fn gen_steps(&self) -> usize {
        self.gen_steps
    }

    pub fn disc_steps(&self) -> usize {
        self.disc_steps
    }

    /// Ids of the trained heads, in the order their losses are reported.
    pub fn head_ids(&self) -> Vec<HeadId> {
        self.heads.head_ids()
    }

    /// Every network with its optimiser state: heads in slot order, then the
    /// generator if there is one.
    pub fn networks(&self) -> Vec<(&DenseNet, &AdamState)> {
        let mut out: Vec<_> = self.heads.iter().map(|(_, h)| h).zip(&self.optimizers).collect();
        if let FakeSource::Generator { net, optimizer } = &self.fake {
            out.push((net.net(), optimizer));
        }
        out
    }

    /// Generated joints for noise `z` and, when the generator needs it, a
    /// conditioning input. Fixed sources ignore both and draw with `rng`.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        z: &DMatrix<f64>,
        conditioning: Option<&DMatrix<f64>>,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        match &self.fake {
            FakeSource::Generator { net, .. } => Ok(net.generate(z, conditioning)?.joint),
            FakeSource::Fixed(q) => Ok(q.sample_joint(z.nrows(), rng)),
        }
    }

    fn noise(&mut self, n: usize) -> DMatrix<f64> {
        let d = self.config.noise_dim;
        let rng = &mut self.rng;
        DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn generated_batch(&mut self) -> Result<Option<GeneratedBatch>> {
        let n = self.config.batch_size;
        let z = self.noise(n);
        let cond = match &self.conditioning_pool {
            Some(pool) => Some(sample_rows(pool, n, &mut self.rng)?),
            None => None,
        };
        match &self.fake {
            FakeSource::Generator { net, .. } => Ok(Some(net.generate(&z, cond.as_ref())?)),
            FakeSource::Fixed(_) => Ok(None),
        }
    }

    fn fake_joints(&mut self) -> Result<DMatrix<f64>> {
        match self.generated_batch()? {
            Some(b) => Ok(b.joint),
            None => match &self.fake {
                FakeSource::Fixed(q) => Ok(q.sample_joint(self.config.batch_size, &mut self.rng)),
                FakeSource::Generator { .. } => unreachable!("generators always produce a batch"),
            },
        }
    }

    /// One update of every head on a shared generated batch. The generator is
    /// not touched.
    pub fn discriminator_step(&mut self) -> Result<DiscStepRecord> {
        for (_, head) in self.heads.iter_mut() {
            head.refresh_spectral_norm()?;
        }
        let fake = self.fake_joints()?;
        let n = self.config.batch_size;
        let mut updates = Vec::new();
        let rng = &mut self.rng;
        for (((slot, head), optimizer), pool) in self
            .heads
            .iter_mut()
            .zip(self.optimizers.iter_mut())
            .zip(&self.pools)
        {
            let generated = select_columns(&fake, &slot.columns);
            let insufficient = |e: Error| match e {
                Error::InsufficientData(msg) => {
                    Error::InsufficientData(format!("{}: {msg}", slot.id))
                }
                other => other,
            };
            let (real, negative) = match slot.id.role() {
                HeadRole::Joint | HeadRole::Marginal => {
                    (sample_rows(&pool.rows, n, rng).map_err(insufficient)?, generated)
                }
                HeadRole::RealDependency => (
                    sample_rows(&pool.rows, n, rng).map_err(insufficient)?,
                    independent_real_batch(&pool.rows, &slot.blocks, n, rng).map_err(insufficient)?,
                ),
                HeadRole::GeneratedDependency => {
                    let shuffled = shuffle_fake_parts(&generated, &slot.blocks, rng)?;
                    (generated, shuffled)
                }
            };
            let loss = discriminator_update(head, optimizer, &real, &negative)?;
            updates.push(HeadUpdate {
                id: slot.id,
                loss,
                real_source: pool.source,
                columns: slot.columns.clone(),
            });
        }
        self.disc_steps += 1;
        Ok(DiscStepRecord {
            gen_step: self.gen_steps,
            heads: updates,
        })
    }

    /// One generator update against the combined discriminator. With a fixed
    /// fake source this only reports the loss.
    pub fn generator_step(&mut self) -> Result<GenStepRecord> {
        let loss = match self.generated_batch()? {
            Some(batch) => {
                let logits = self.heads.logits(&batch.joint)?;
                let loss = gen_loss(&logits)?;
                let upstream = gen_loss_grad(&logits)?;
                let grad_x = self.heads.input_gradient(&batch.joint, &upstream)?;
                let FakeSource::Generator { net, optimizer } = &mut self.fake else {
                    unreachable!("only generators produce batches");
                };
                let grads = net.backward(&batch, &grad_x)?;
                optimizer.step(&mut net.net_mut().parameters_mut(), &grads.slices())?;
                loss
            }
            None => {
                let fake = self.fake_joints()?;
                gen_loss(&self.heads.logits(&fake)?)?
            }
        };
        self.gen_steps += 1;
        Ok(GenStepRecord {
            gen_step: self.gen_steps,
            loss,
        })
    }

    /// Runs the remaining schedule: per generator step, the configured number
    /// of discriminator steps and then one generator step. Evaluation events
    /// fire every `eval_interval` steps and after the last one.
    pub fn run<F>(&mut self, mut on_event: F) -> Result<()>
    where
        F: FnMut(TrainEvent<'_>) -> Result<()>,
    {
        let total = self.config.total_gen_steps;
        while self.gen_steps < total {
            for _ in 0..self.config.disc_updates_per_gen_update {
                let record = self.discriminator_step()?;
                on_event(TrainEvent::Disc(&record))?;
            }
            let record = self.generator_step()?;
            on_event(TrainEvent::Gen(&record))?;
            let step = self.gen_steps;
            if step % self.config.eval_interval == 0 || step == total {
                on_event(TrainEvent::Eval { step, trainer: self })?;
            }
            if self.config.checkpoint_interval > 0 && step % self.config.checkpoint_interval == 0 {
                on_event(TrainEvent::Checkpoint { step, trainer: self })?;
            }
        }
        Ok(())
    }
}
