use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::CliError;
use crate::run::METRICS_FILE;
use crate::sweep::AGGREGATE_FILE;
use crate::table::Table;

pub const SUMMARY_MD: &str = "summary.md";
pub const PLOT_DATA_FILE: &str = "plot_data.csv";
pub const PLOTS_DIR: &str = "plots";

#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

/// Renders plots and a markdown summary for a run directory (with
/// `metrics.csv`) or a sweep directory (with `aggregate.csv`).
pub fn report(dir: &Path) -> Result<ReportOutcome, CliError> {
    if dir.join(AGGREGATE_FILE).is_file() {
        sweep_report(dir)
    } else if dir.join(METRICS_FILE).is_file() {
        run_report(dir)
    } else {
        Err(CliError::Config(format!(
            "{} has neither {METRICS_FILE} nor {AGGREGATE_FILE}; nothing to report",
            dir.display()
        )))
    }
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    /// Standard errors matching `points`, if any.
    errors: Vec<Option<f64>>,
}

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(format!("plotting failed: {e}"))
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

fn line_plot(path: &Path, title: &str, x_desc: &str, series: &[Series], log_x: bool) -> Result<(), CliError> {
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = bounds(all().map(|p| p.0));
    let (y0, y1) = bounds(series.iter().flat_map(|s| {
        s.points.iter().zip(&s.errors).flat_map(|(p, e)| {
            let e = e.unwrap_or(0.0);
            [p.1 - e, p.1 + e]
        })
    }));
    let mut builder = ChartBuilder::on(&root);
    builder
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70);
    if log_x {
        let lo = all().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = all().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let mut chart = builder
            .build_cartesian_2d((lo / 1.5..hi * 1.5).log_scale(), y0..y1)
            .map_err(plot_err)?;
        chart.configure_mesh().x_desc(x_desc).draw().map_err(plot_err)?;
        for (i, s) in series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            chart
                .draw_series(LineSeries::new(s.points.clone(), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(s.label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
            chart
                .draw_series(s.points.iter().zip(&s.errors).map(|(&(x, y), e)| {
                    let e = e.unwrap_or(0.0);
                    ErrorBar::new_vertical(x, y - e, y, y + e, color.filled(), 8)
                }))
                .map_err(plot_err)?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    } else {
        let mut chart = builder.build_cartesian_2d(x0..x1, y0..y1).map_err(plot_err)?;
        chart.configure_mesh().x_desc(x_desc).draw().map_err(plot_err)?;
        for (i, s) in series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            chart
                .draw_series(LineSeries::new(s.points.clone(), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(s.label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

fn step_series(metrics: &Table, columns: &[&String]) -> Vec<Series> {
    columns
        .iter()
        .map(|c| {
            let points = metrics.series("step", c);
            Series {
                label: (*c).clone(),
                errors: vec![None; points.len()],
                points,
            }
        })
        .filter(|s| !s.points.is_empty())
        .collect()
}

fn run_report(dir: &Path) -> Result<ReportOutcome, CliError> {
    let metrics = Table::read(&dir.join(METRICS_FILE))?;
    let summary = dir.join(SUMMARY_MD);
    let mut md = format!("# Run report: {}\n\n", dir.display());
    if metrics.rows.is_empty() {
        md.push_str("no eval rows\n");
        fs::write(&summary, md)?;
        return Ok(ReportOutcome {
            summary,
            plots: Vec::new(),
        });
    }
    let plots_dir = dir.join(PLOTS_DIR);
    fs::create_dir_all(&plots_dir)?;
    let cols = |pred: &dyn Fn(&str) -> bool| -> Vec<&String> {
        metrics.header.iter().filter(|h| pred(h.as_str())).collect()
    };
    let groups: [(&str, &str, Vec<&String>); 4] = [
        ("losses", "Losses", cols(&|h| h == "gen_loss" || h.starts_with("d_") && h != "d_dep")),
        ("d_dep", "Dependency metric", cols(&|h| h == "d_dep")),
        ("frechet", "Frechet distance per part", cols(&|h| h.starts_with("frechet_part_"))),
        ("ratio_mae", "Ratio MAE", cols(&|h| h == "ratio_mae")),
    ];
    let mut plots = Vec::new();
    for (file, title, columns) in groups {
        let series = step_series(&metrics, &columns);
        if series.is_empty() {
            continue;
        }
        let path = plots_dir.join(format!("{file}.svg"));
        line_plot(&path, title, "generator step", &series, false)?;
        plots.push(path);
    }

    let last = metrics.rows.len() - 1;
    let _ = writeln!(md, "{} eval rows; final row at step {}.\n", metrics.rows.len(), metrics.rows[last][0]);
    md.push_str("| metric | final value |\n|---|---|\n");
    for (c, name) in metrics.header.iter().enumerate().skip(1) {
        let v = &metrics.rows[last][c];
        let _ = writeln!(md, "| {name} | {} |", if v.is_empty() { "-" } else { v });
    }
    fs::write(&summary, md)?;
    Ok(ReportOutcome { summary, plots })
}

fn sweep_report(dir: &Path) -> Result<ReportOutcome, CliError> {
    let agg = Table::read(&dir.join(AGGREGATE_FILE))?;
    let summary = dir.join(SUMMARY_MD);
    let metrics: Vec<String> = agg
        .header
        .iter()
        .filter_map(|h| h.strip_suffix("_mean").map(str::to_string))
        .collect();
    let mut kinds: Vec<String> = Vec::new();
    for row in &agg.rows {
        if !kinds.contains(&row[1]) {
            kinds.push(row[1].clone());
        }
    }

    let plots_dir = dir.join(PLOTS_DIR);
    fs::create_dir_all(&plots_dir)?;
    let mut plot_data = Table {
        header: ["metric", "model_kind", "n_paired", "mean", "se"].map(String::from).to_vec(),
        rows: Vec::new(),
    };
    let mut plots = Vec::new();
    for metric in &metrics {
        let mean_col = agg.column(&format!("{metric}_mean")).expect("listed from the header");
        let se_col = agg.column(&format!("{metric}_se")).expect("written in pairs");
        let mut series = Vec::new();
        for kind in &kinds {
            let mut s = Series {
                label: kind.clone(),
                points: Vec::new(),
                errors: Vec::new(),
            };
            for row in agg.rows.iter().filter(|r| &r[1] == kind) {
                let Ok(mean) = row[mean_col].parse::<f64>() else { continue };
                let n: f64 = row[0].parse().map_err(|_| CliError::Runtime(format!("bad n_paired {}", row[0])))?;
                s.points.push((n, mean));
                s.errors.push(row[se_col].parse().ok());
                plot_data.rows.push(vec![
                    metric.clone(),
                    kind.clone(),
                    row[0].clone(),
                    row[mean_col].clone(),
                    row[se_col].clone(),
                ]);
            }
            if !s.points.is_empty() {
                series.push(s);
            }
        }
        if series.is_empty() {
            continue;
        }
        let log_x = series.iter().flat_map(|s| &s.points).all(|p| p.0 > 0.0);
        let path = plots_dir.join(format!("{metric}_vs_n_paired.svg"));
        line_plot(&path, metric, "paired samples", &series, log_x)?;
        plots.push(path);
    }
    plot_data.write(&dir.join(PLOT_DATA_FILE))?;

    let mut md = format!("# Sweep report: {}\n\n", dir.display());
    if agg.rows.is_empty() {
        md.push_str("no eval rows\n");
    } else {
        md.push_str("| n_paired | model_kind | runs |");
        for m in &metrics {
            let _ = write!(md, " {m} |");
        }
        md.push_str("\n|---|---|---|");
        md.push_str(&"---|".repeat(metrics.len()));
        md.push('\n');
        for row in &agg.rows {
            let _ = write!(md, "| {} | {} | {} |", row[0], row[1], row[2]);
            for m in &metrics {
                let mean = &row[agg.column(&format!("{m}_mean")).expect("present")];
                let se = &row[agg.column(&format!("{m}_se")).expect("present")];
                let text = match (mean.parse::<f64>(), se.parse::<f64>()) {
                    (Ok(a), Ok(b)) => format!("{a:.4} ± {b:.4}"),
                    (Ok(a), Err(_)) => format!("{a:.4}"),
                    _ => "-".into(),
                };
                let _ = write!(md, " {text} |");
            }
            md.push('\n');
        }
    }
    fs::write(&summary, md)?;
    Ok(ReportOutcome { summary, plots })
}
