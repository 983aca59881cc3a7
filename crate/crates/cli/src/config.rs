use std::fmt;
use std::path::{Path, PathBuf};

use factorgan::data::{DatasetSplitSpec, SyntheticTask, TaskConfig};
use factorgan::factorization::ModelKind;
use factorgan::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn default_n_eval() -> usize {
    1000
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Output directory; `--out` and the default root take over when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Held-out samples drawn for every evaluation.
    #[serde(default = "default_n_eval")]
    pub n_eval: usize,
    pub split: DatasetSplitSpec,
    pub task: TaskConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read_config(path)?;
        Self::from_toml(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment configs are always representable in TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check_schema(self.schema_version)?;
        self.train.validate()?;
        self.split.validate()?;
        if self.n_eval < 2 {
            return Err(CliError::Config(format!("n_eval must be at least 2, got {}", self.n_eval)));
        }
        if self.split.n_total == 0 {
            return Err(CliError::Config("split.n_total must be positive".into()));
        }
        SyntheticTask::from_config(&self.task)?;
        Ok(())
    }

    pub fn task(&self) -> Result<SyntheticTask, CliError> {
        Ok(SyntheticTask::from_config(&self.task)?)
    }
}

/// A paired-sample count, or every sample of the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairedCount {
    Count(usize),
    All(AllKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllKeyword {
    All,
}

impl PairedCount {
    pub fn resolve(self, n_total: usize) -> usize {
        match self {
            PairedCount::Count(n) => n,
            PairedCount::All(_) => n_total,
        }
    }
}

impl fmt::Display for PairedCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairedCount::Count(n) => write!(f, "{n}"),
            PairedCount::All(_) => f.write_str("all"),
        }
    }
}

fn default_model_kinds() -> Vec<ModelKind> {
    vec![ModelKind::Factorgan, ModelKind::GanBaseline]
}

fn default_repeats() -> usize {
    1
}

/// A grid of runs over paired-sample counts, model kinds and seeds. Repeat
/// `r` uses seed `base.train.seed + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub schema_version: u32,
    pub n_paired: Vec<PairedCount>,
    #[serde(default = "default_model_kinds")]
    pub model_kinds: Vec<ModelKind>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    pub base: ExperimentConfig,
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub n_paired: usize,
    pub model_kind: ModelKind,
    pub seed: u64,
    pub config: ExperimentConfig,
}

impl SweepCell {
    pub fn dir_name(&self) -> String {
        format!("n{}_{}_seed{}", self.n_paired, self.model_kind, self.seed)
    }
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let spec: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read_config(path)?;
        Self::from_toml(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sweep specs are always representable in TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check_schema(self.schema_version)?;
        self.base.validate()?;
        if self.n_paired.is_empty() || self.model_kinds.is_empty() || self.repeats == 0 {
            return Err(CliError::Config(
                "a sweep needs at least one n_paired value, model kind and repeat".into(),
            ));
        }
        let n_total = self.base.split.n_total;
        for n in &self.n_paired {
            if n.resolve(n_total) > n_total {
                return Err(CliError::Config(format!("n_paired = {n} exceeds n_total = {n_total}")));
            }
        }
        Ok(())
    }

    /// Cells in `n_paired`, model kind, seed order.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::new();
        for n in &self.n_paired {
            let n_paired = n.resolve(self.base.split.n_total);
            for &kind in &self.model_kinds {
                for r in 0..self.repeats {
                    let mut config = self.base.clone();
                    config.output_dir = None;
                    config.split.n_paired = n_paired;
                    config.train.model_kind = kind;
                    config.train.seed = self.base.train.seed.wrapping_add(r as u64);
                    out.push(SweepCell {
                        n_paired,
                        model_kind: kind,
                        seed: config.train.seed,
                        config,
                    });
                }
            }
        }
        out
    }
}

fn check_schema(version: u32) -> Result<(), CliError> {
    if version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "unsupported schema_version {version}; this build reads version {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

fn read_config(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1

[split]
n_total = 500
n_paired = 50

[task]
kind = "paired_categorical"
coupling = 0.9

[train]
total_gen_steps = 10
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.n_eval, 1000);
        assert_eq!(c.train.batch_size, 25);
        assert_eq!(c.train.total_gen_steps, 10);
    }

    #[test]
    fn round_trip_through_toml() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_field_reports_its_location() {
        let text = BASE.replace("coupling = 0.9", "coupling = 0.9\ncuopling = 1");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("cuopling"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn wrong_schema_version() {
        let text = BASE.replace("schema_version = 1", "schema_version = 7");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn sweep_grid() {
        let text = format!(
            "schema_version = 1\nn_paired = [25, 250, \"all\"]\nrepeats = 3\n{}",
            BASE.replace("schema_version = 1", "")
                .replace("[split]", "[base]\nschema_version = 1\n[base.split]")
                .replace("[task]", "[base.task]")
                .replace("[train]", "[base.train]")
        );
        let spec = SweepSpec::from_toml(&text).unwrap();
        let cells = spec.cells();
        assert_eq!(cells.len(), 18);
        assert_eq!(cells[17].n_paired, 500);
        assert_eq!(cells[17].seed, 2);
        assert_eq!(cells[0].dir_name(), "n25_factorgan_seed0");
        let over = text.replace("[25, 250, \"all\"]", "[501]");
        assert!(SweepSpec::from_toml(&over).is_err());
    }
}
