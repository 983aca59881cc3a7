use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use factorgan::data::make_dataset_split;
use factorgan::eval::{metrics_header, MetricsRecord, TaskEvaluator};
use factorgan::factorization::HeadId;
use factorgan::nn::write_checkpoint;
use factorgan::training::{TrainEvent, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Offset mixed into the run seed for the dataset draw. The split depends on
/// the seed only, so model kinds compared at one seed see the same data.
const DATA_STREAM: u64 = 0xda7a_0000_5eed_0002;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub final_record: Option<MetricsRecord>,
    pub summary: String,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn summary_line(steps: usize, record: Option<&MetricsRecord>) -> String {
    let Some(r) = record else {
        return format!("run complete: steps={steps} (no evaluations)");
    };
    let parts: Vec<f64> = r.frechet_per_part.iter().flatten().copied().collect();
    let frechet = (parts.len() == r.frechet_per_part.len() && !parts.is_empty())
        .then(|| parts.iter().sum::<f64>() / parts.len() as f64);
    format!(
        "run complete: steps={steps} gen_loss={} d_dep={} frechet_mean={} ratio_mae={}",
        fmt_opt(r.gen_loss),
        fmt_opt(r.dependency_metric),
        fmt_opt(frechet),
        fmt_opt(r.ratio_mae),
    )
}

fn checkpoint(dir: &Path, name: &str, trainer: &Trainer) -> factorgan::Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(CHECKPOINT_DIR).join(name))?);
    write_checkpoint(&mut w, &trainer.networks())?;
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> factorgan::Error {
    factorgan::Error::Io(std::io::Error::other(e.to_string()))
}

/// Trains one configuration into `dir`: a copy of the config, `metrics.csv`
/// with a row per evaluation, checkpoints and a one-line summary. An
/// `INCOMPLETE` marker stays behind if the run fails.
pub fn run_experiment(config: &ExperimentConfig, dir: &Path) -> Result<RunOutcome, CliError> {
    config.validate()?;
    fs::create_dir_all(dir.join(CHECKPOINT_DIR))?;
    let marker = dir.join(INCOMPLETE_MARKER);
    fs::write(&marker, "run started\n")?;
    let _ = fs::remove_file(dir.join(SUMMARY_FILE));
    match train_into(config, dir) {
        Ok(outcome) => {
            fs::remove_file(&marker)?;
            Ok(outcome)
        }
        Err(e) => {
            let _ = fs::write(&marker, format!("run failed: {e}\n"));
            Err(e)
        }
    }
}

fn train_into(config: &ExperimentConfig, dir: &Path) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    fs::write(dir.join(CONFIG_FILE), config.to_toml())?;

    let task = config.task()?;
    let train = config.train.clone();
    let mut data_rng = ChaCha8Rng::seed_from_u64(train.seed ^ DATA_STREAM);
    let split = make_dataset_split(&task, config.split, &mut data_rng)?;
    let mut trainer = Trainer::new(&task, split, train.clone())?;
    let evaluator = TaskEvaluator::new(&task, &train, config.n_eval)?;

    let heads: Vec<HeadId> = trainer.head_ids();
    let mut writer = csv::Writer::from_path(dir.join(METRICS_FILE))?;
    writer.write_record(metrics_header(&heads, task.partition().len()))?;
    writer.flush()?;

    let mut head_losses: Vec<(HeadId, f64)> = Vec::new();
    let mut gen_loss = None;
    let mut last = None;
    trainer.run(|event| {
        match event {
            TrainEvent::Disc(record) => {
                head_losses = record.heads.iter().map(|h| (h.id, h.loss)).collect();
            }
            TrainEvent::Gen(record) => gen_loss = Some(record.loss),
            TrainEvent::Eval { step, trainer } => {
                let m = evaluator.evaluate(trainer)?;
                let record = MetricsRecord {
                    step,
                    gen_loss,
                    head_losses: head_losses.clone(),
                    dependency_metric: m.dependency_metric,
                    frechet_per_part: m.frechet_per_part,
                    ratio_mae: m.ratio_mae,
                    wall_time: train.record_wall_time.then(|| started.elapsed().as_secs_f64()),
                };
                writer.write_record(record.cells(&heads)).map_err(csv_err)?;
                writer.flush()?;
                last = Some(record);
            }
            TrainEvent::Checkpoint { step, trainer } => {
                checkpoint(dir, &format!("step_{step:06}.fgan"), trainer)?;
            }
        }
        Ok(())
    })?;
    writer.flush()?;
    checkpoint(dir, "final.fgan", &trainer)?;

    let summary = summary_line(trainer.gen_steps(), last.as_ref());
    fs::write(dir.join(SUMMARY_FILE), format!("{summary}\n"))?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        final_record: last,
        summary,
    })
}
