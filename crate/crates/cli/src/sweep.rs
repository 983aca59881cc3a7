use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use factorgan::factorization::ModelKind;

use crate::config::{SweepCell, SweepSpec};
use crate::error::CliError;
use crate::run::{run_experiment, METRICS_FILE};
use crate::table::Table;

pub const SWEEP_FILE: &str = "sweep.toml";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const RUNS_DIR: &str = "runs";

#[derive(Debug)]
pub struct CellResult {
    pub cell: SweepCell,
    pub dir: PathBuf,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub cells: Vec<CellResult>,
    pub aggregate: Table,
}

impl SweepOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

/// Runs every cell of `spec` under `dir/runs`, then writes the aggregate
/// table and a list of failed cells. A failing cell does not stop the sweep.
/// With `parallel > 1` cells run on that many worker threads; each cell owns
/// its data, so results do not depend on scheduling.
pub fn run_sweep(spec: &SweepSpec, dir: &Path, parallel: usize) -> Result<SweepOutcome, CliError> {
    spec.validate()?;
    fs::create_dir_all(dir.join(RUNS_DIR))?;
    fs::write(dir.join(SWEEP_FILE), spec.to_toml())?;
    let cells = spec.cells();
    let run_cell = |cell: &SweepCell| -> CellResult {
        let run_dir = dir.join(RUNS_DIR).join(cell.dir_name());
        log::info!("sweep cell {}", cell.dir_name());
        let error = match run_experiment(&cell.config, &run_dir) {
            Ok(_) => None,
            Err(e) => {
                log::warn!("cell {} failed: {e}", cell.dir_name());
                Some(e.to_string())
            }
        };
        CellResult {
            cell: cell.clone(),
            dir: run_dir,
            error,
        }
    };

    let results: Vec<CellResult> = if parallel <= 1 {
        cells.iter().map(run_cell).collect()
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<CellResult>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
        thread::scope(|s| {
            for _ in 0..parallel.min(cells.len()) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(cell) = cells.get(i) else { break };
                    let r = run_cell(cell);
                    slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
                });
            }
        });
        slots
            .into_inner()
            .expect("workers have finished")
            .into_iter()
            .map(|r| r.expect("every cell ran"))
            .collect()
    };

    let failures = Table {
        header: ["n_paired", "model_kind", "seed", "error"].map(String::from).to_vec(),
        rows: results
            .iter()
            .filter_map(|r| {
                let e = r.error.as_ref()?;
                Some(vec![
                    r.cell.n_paired.to_string(),
                    r.cell.model_kind.to_string(),
                    r.cell.seed.to_string(),
                    e.clone(),
                ])
            })
            .collect(),
    };
    failures.write(&dir.join(FAILURES_FILE))?;

    let aggregate = aggregate(&results)?;
    aggregate.write(&dir.join(AGGREGATE_FILE))?;
    Ok(SweepOutcome {
        dir: dir.to_path_buf(),
        cells: results,
        aggregate,
    })
}

/// Final-row metrics of one run, by name. `frechet_mean` averages the
/// per-part distances and is missing if any part is.
pub fn final_metrics(metrics: &Table) -> Vec<(String, Option<f64>)> {
    let Some(last) = metrics.rows.len().checked_sub(1) else {
        return Vec::new();
    };
    let parts: Vec<&String> = metrics.header.iter().filter(|h| h.starts_with("frechet_part_")).collect();
    let mut out = vec![("gen_loss".to_string(), metrics.value(last, "gen_loss"))];
    out.push(("d_dep".into(), metrics.value(last, "d_dep")));
    let values: Vec<Option<f64>> = parts.iter().map(|p| metrics.value(last, p)).collect();
    for (p, v) in parts.iter().zip(&values) {
        out.push(((*p).clone(), *v));
    }
    let mean = values
        .iter()
        .copied()
        .collect::<Option<Vec<f64>>>()
        .filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64);
    out.push(("frechet_mean".into(), mean));
    out.push(("ratio_mae".into(), metrics.value(last, "ratio_mae")));
    out
}

/// Mean and standard error (sample standard deviation over `√n`). The error
/// is missing for fewer than two values.
pub fn mean_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per `(n_paired, model_kind)` with `<metric>_mean` and
/// `<metric>_se` columns, computed from each run's `metrics.csv`.
pub fn aggregate(results: &[CellResult]) -> Result<Table, CliError> {
    let mut groups: Vec<((usize, ModelKind), Vec<Vec<(String, Option<f64>)>>)> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for r in results {
        let key = (r.cell.n_paired, r.cell.model_kind);
        let idx = match groups.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, Vec::new()));
                groups.len() - 1
            }
        };
        if r.error.is_some() {
            continue;
        }
        let metrics = final_metrics(&Table::read(&r.dir.join(METRICS_FILE))?);
        if metrics.is_empty() {
            continue;
        }
        for (name, _) in &metrics {
            if !names.contains(name) {
                names.push(name.clone());
            }
        }
        groups[idx].1.push(metrics);
    }
    let mut header: Vec<String> = ["n_paired", "model_kind", "runs"].map(String::from).to_vec();
    for n in &names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_se"));
    }
    let rows = groups
        .iter()
        .map(|((n_paired, kind), runs)| {
            let mut row = vec![n_paired.to_string(), kind.to_string(), runs.len().to_string()];
            for name in &names {
                let values: Vec<f64> = runs
                    .iter()
                    .filter_map(|m| m.iter().find(|(k, _)| k == name).and_then(|(_, v)| *v))
                    .collect();
                let (mean, se) = mean_and_se(&values);
                row.push(cell(mean));
                row.push(cell(se));
            }
            row
        })
        .collect();
    Ok(Table { header, rows })
}
