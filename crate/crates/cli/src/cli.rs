use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, SweepSpec};
use crate::error::CliError;
use crate::report::report;
use crate::run::run_experiment;
use crate::sweep::run_sweep;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "FGAN_OUT";
const DEFAULT_ROOT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "fgan", version, about = "Factorised GAN experiments on synthetic tasks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration.
    Train {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Run directory [default: $FGAN_OUT/<config name>, else runs/<config name>]
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Overrides train.seed.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// Run a grid over paired-sample counts, model kinds and seeds.
    Sweep {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Overrides the base seed.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Worker threads; cells run one at a time by default.
        #[arg(long, value_name = "N", default_value_t = 1)]
        parallel: usize,
    },
    /// Check the combination identities, oracle heads, spectral
    /// normalisation and gradients against analytic results.
    OracleCheck {
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
    },
    /// Plot and summarise a run or sweep directory.
    Report {
        #[arg(value_name = "DIR")]
        dir: PathBuf,
    },
}

fn output_dir(out: Option<PathBuf>, configured: Option<&Path>, config_path: &Path) -> PathBuf {
    if let Some(o) = out {
        return o;
    }
    if let Some(c) = configured {
        return c.to_path_buf();
    }
    let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from(DEFAULT_ROOT), PathBuf::from);
    let stem = config_path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    root.join(stem)
}

/// Executes one command, printing its report to stdout.
pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train { config, out, seed } => {
            let mut c = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                c.train.seed = s;
            }
            let dir = output_dir(out, c.output_dir.as_deref(), &config);
            let outcome = run_experiment(&c, &dir)?;
            println!("{}", dir.display());
            println!("{}", outcome.summary);
        }
        Command::Sweep {
            config,
            out,
            seed,
            parallel,
        } => {
            let mut spec = SweepSpec::load(&config)?;
            if let Some(s) = seed {
                spec.base.train.seed = s;
            }
            let dir = output_dir(out, spec.base.output_dir.as_deref(), &config);
            let outcome = run_sweep(&spec, &dir, parallel.max(1))?;
            let failed = outcome.failures().count();
            println!("{}", dir.display());
            println!("{} cells, {} failed", outcome.cells.len(), failed);
            if failed > 0 {
                for f in outcome.failures() {
                    println!("  {}: {}", f.cell.dir_name(), f.error.as_deref().unwrap_or_default());
                }
                return Err(CliError::Runtime(format!("{failed} sweep cells failed")));
            }
        }
        Command::OracleCheck { seed } => {
            let report = factorgan::checks::run_all(seed)?;
            for o in &report.outcomes {
                println!(
                    "{} {:<45} max_error={:.3e} tolerance={:.0e}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.name,
                    o.max_error,
                    o.tolerance
                );
            }
            let failed: Vec<&str> = report.failures().map(|o| o.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(CliError::Check(failed.join(", ")));
            }
        }
        Command::Report { dir } => {
            let outcome = report(&dir)?;
            for p in &outcome.plots {
                println!("{}", p.display());
            }
            println!("{}", outcome.summary.display());
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit status:
/// 0 success, 1 usage or configuration error, 2 check failure, 3 runtime
/// failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
