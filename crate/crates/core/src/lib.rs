//! Factorised adversarial training.
//!
//! A GAN discriminator can be split into sub-discriminators that each see
//! only part of a joint sample: one *marginal* head per part, plus a
//! *p-dependency* head (real joints vs. real parts recombined independently)
//! and a *q-dependency* head (generated joints vs. generated parts shuffled
//! across samples). Summing their logits, with the q-dependency logit
//! subtracted, gives the logit of the joint discriminator. Marginal heads can
//! therefore train on incomplete observations, and only the dependency heads
//! need paired data.
//!
//! Modules:
//!
//! - [`nn`]: dense networks with manual backpropagation, Adam, spectral
//!   normalisation and a flat checkpoint format.
//! - [`factorization`]: partitions, head layouts and every logit
//!   combination mode.
//! - [`data`]: synthetic tasks with exact samplers and analytic densities.
//! - [`training`]: losses, decoupling samplers, update steps and the
//!   training loop.
//! - [`eval`]: dependency metric, Fréchet distance, ratio error and
//!   χ² independence test.
//! - [`checks`]: the analytic self-check suite behind `fgan oracle-check`.

pub mod checks;
pub mod data;
pub mod error;
pub mod eval;
pub mod factorization;
pub mod nn;
pub mod training;

pub use error::{Error, Result};
