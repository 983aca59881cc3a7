//! Losses, samplers, generators and the alternating update schedule.

mod config;
mod generator;
mod losses;
mod samplers;
mod trainer;

pub use config::TrainConfig;
pub use generator::{GeneratedBatch, Generator, GeneratorKind};
pub use losses::{disc_loss, disc_loss_grad, gen_loss, gen_loss_grad, softplus};
pub use samplers::{independent_real_batch, sample_rows, shuffle_fake_parts};
pub use trainer::{
    discriminator_update, DiscStepRecord, FakeSource, GenStepRecord, HeadUpdate, PoolSource,
    TrainEvent, Trainer,
};
