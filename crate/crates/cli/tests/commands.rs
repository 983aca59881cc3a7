//! The `fgan` binary and the run, sweep and report pipeline on small configs.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use factorgan_cli::{report, run_experiment, run_sweep, ExperimentConfig, SweepSpec, Table};

const SMALL: &str = r#"
schema_version = 1
n_eval = 200
[split]
n_total = 400
n_paired = 50
[task]
kind = "paired_categorical"
coupling = 0.9
[train]
total_gen_steps = 20
eval_interval = 10
disc_hidden = [16]
gen_hidden = [16]
noise_dim = 4
seed = 4
"#;

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("fgan-cmd-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn fgan(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fgan"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn exit_codes() {
    let dir = scratch("exit");
    assert_eq!(fgan(&["--help"]).status.code(), Some(0));
    assert_eq!(fgan(&["train"]).status.code(), Some(1));
    assert_eq!(fgan(&["frobnicate"]).status.code(), Some(1));

    let bad = dir.join("bad.toml");
    fs::write(&bad, SMALL.replace("coupling = 0.9", "coupling = 0.9\ncolour = 3")).unwrap();
    let out = fgan(&["train", "--config", bad.to_str().unwrap(), "--out", dir.join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    assert_eq!(fgan(&["report", dir.to_str().unwrap()]).status.code(), Some(1));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn binary_train_writes_a_run_directory() {
    let dir = scratch("bin");
    let cfg = dir.join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fgan"))
        .args(["train", "--config", cfg.to_str().unwrap(), "--seed", "9"])
        .env("FGAN_OUT", &dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.join("small");
    let archived = ExperimentConfig::load(&run.join("config.toml")).unwrap();
    assert_eq!(archived.train.seed, 9);
    assert_eq!(Table::read(&run.join("metrics.csv")).unwrap().rows.len(), 2);
    assert!(fs::read_to_string(run.join("summary.txt")).unwrap().starts_with("run complete: steps=20"));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn single_cell_sweep_reproduces_train() {
    let dir = scratch("cell");
    let base = ExperimentConfig::from_toml(SMALL).unwrap();
    run_experiment(&base, &dir.join("direct")).unwrap();

    let spec = SweepSpec::from_toml(&format!(
        "schema_version = 1\nn_paired = [50]\nmodel_kinds = [\"factorgan\"]\n[base]\n{}",
        SMALL.replace("\n[", "\n[base.")
    ))
    .unwrap();
    let outcome = run_sweep(&spec, &dir.join("sweep"), 1).unwrap();
    assert_eq!(outcome.cells.len(), 1);
    assert_eq!(outcome.failures().count(), 0);
    let direct = fs::read(dir.join("direct").join("metrics.csv")).unwrap();
    let cell = fs::read(outcome.cells[0].dir.join("metrics.csv")).unwrap();
    assert_eq!(direct, cell);
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn sweep_report_copies_aggregate_values() {
    let dir = scratch("report");
    let spec = SweepSpec::from_toml(&format!(
        "schema_version = 1\nn_paired = [10, 50]\nrepeats = 2\n[base]\n{}",
        SMALL.replace("\n[", "\n[base.")
    ))
    .unwrap();
    let outcome = run_sweep(&spec, &dir, 2).unwrap();
    assert_eq!(outcome.cells.len(), 8);
    let rendered = report(&dir).unwrap();
    assert!(rendered.plots.iter().all(|p| p.exists()));
    assert!(rendered.plots.iter().any(|p| p.ends_with("frechet_mean_vs_n_paired.svg")));

    let agg = Table::read(&dir.join("aggregate.csv")).unwrap();
    let plot = Table::read(&dir.join("plot_data.csv")).unwrap();
    assert!(!plot.rows.is_empty());
    for row in &plot.rows {
        let source = agg
            .rows
            .iter()
            .find(|r| r[0] == row[2] && r[1] == row[1])
            .expect("plotted cell exists in the aggregate");
        let mean = agg.column(&format!("{}_mean", row[0])).unwrap();
        let se = agg.column(&format!("{}_se", row[0])).unwrap();
        assert_eq!(row[3], source[mean]);
        assert_eq!(row[4], source[se]);
    }
    assert!(fs::read_to_string(dir.join("summary.md")).unwrap().contains(" ± "));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn empty_run_reports_no_rows() {
    let dir = scratch("empty");
    let config = ExperimentConfig::from_toml(&SMALL.replace("total_gen_steps = 20", "total_gen_steps = 0")).unwrap();
    run_experiment(&config, &dir).unwrap();
    let rendered = report(&dir).unwrap();
    assert!(rendered.plots.is_empty());
    assert!(fs::read_to_string(rendered.summary).unwrap().contains("no eval rows"));
    fs::remove_dir_all(dir).unwrap();
}
