use serde::{Deserialize, Serialize};

use crate::factorization::{CombinationMode, HierarchySpec, ModelKind};
use crate::nn::{Activation, AdamConfig};
use crate::{Error, Result};

/// Hyperparameters and schedule of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub disc_updates_per_gen_update: usize,
    pub total_gen_steps: usize,
    pub seed: u64,
    pub noise_dim: usize,
    pub model_kind: ModelKind,
    pub combination_mode: CombinationMode,
    /// Sub-partition of each part; required in hierarchical mode.
    pub hierarchy: Option<HierarchySpec>,
    pub disc_hidden: Vec<usize>,
    pub gen_hidden: Vec<usize>,
    pub hidden_activation: Activation,
    /// Output squashing of a direct or conditional generator. Mask
    /// generators always use a sigmoid.
    pub generator_output: Activation,
    pub spectral_norm: bool,
    pub power_iterations: usize,
    /// Start every head with a zero final layer.
    pub zero_init_heads: bool,
    /// Generator steps between evaluations; the last step is always evaluated.
    pub eval_interval: usize,
    /// Generator steps between checkpoints; 0 disables them.
    pub checkpoint_interval: usize,
    /// Fill the wall-time metrics column. Off by default so repeated runs
    /// produce identical files.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 25,
            disc_updates_per_gen_update: 2,
            total_gen_steps: 2000,
            seed: 0,
            noise_dim: 50,
            model_kind: ModelKind::Factorgan,
            combination_mode: CombinationMode::Joint,
            hierarchy: None,
            disc_hidden: vec![64, 64],
            gen_hidden: vec![64, 64],
            hidden_activation: Activation::LeakyRelu,
            generator_output: Activation::Identity,
            spectral_norm: true,
            power_iterations: 1,
            zero_init_heads: false,
            eval_interval: 100,
            checkpoint_interval: 0,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Configuration(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        for (name, v) in [
            ("disc_updates_per_gen_update", self.disc_updates_per_gen_update),
            ("noise_dim", self.noise_dim),
            ("power_iterations", self.power_iterations),
            ("eval_interval", self.eval_interval),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.disc_hidden.contains(&0) || self.gen_hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if !matches!(self.generator_output, Activation::Identity | Activation::Sigmoid) {
            return bad(format!(
                "generator_output must be identity or sigmoid, got {:?}",
                self.generator_output
            ));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}
