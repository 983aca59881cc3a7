//! Experiment runner for factorised adversarial training: configuration
//! files, single runs, sweeps over paired-sample counts, the analytic
//! self-check suite and report rendering.

pub mod cli;
pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod sweep;
pub mod table;

pub use cli::{main_with_args, Cli, Command};
pub use config::{ExperimentConfig, PairedCount, SweepCell, SweepSpec, SCHEMA_VERSION};
pub use error::CliError;
pub use report::{report, ReportOutcome};
pub use run::{run_experiment, RunOutcome};
pub use sweep::{aggregate, final_metrics, mean_and_se, run_sweep, SweepOutcome};
pub use table::Table;
