//! Report files: per-seed metrics CSV, aggregate JSON and plot-ready CSVs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::RunReport;
use crate::error::{Error, Result};

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub seed: u64,
    pub budget: usize,
    pub uniform: f64,
    pub hyre: f64,
    pub best_head: f64,
    pub finetune: Option<f64>,
    pub config_hash: String,
}

impl RunReport {
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        let mut rows = Vec::with_capacity(self.seeds.len() * self.budgets.len());
        for s in &self.seeds {
            for (b, &budget) in self.budgets.iter().enumerate() {
                rows.push(MetricRow {
                    seed: s.seed,
                    budget,
                    uniform: s.uniform,
                    hyre: s.hyre[b],
                    best_head: s.best_head,
                    finetune: s.finetune[b],
                    config_hash: self.config_hash.clone(),
                });
            }
        }
        rows
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct BudgetPoint {
    budget: usize,
    hyre_mean: f64,
    hyre_std: f64,
    finetune_mean: Option<f64>,
    finetune_std: Option<f64>,
    uniform_mean: f64,
    best_head_mean: f64,
    n: usize,
}

#[derive(Serialize)]
struct Bar {
    task: String,
    uniform_mean: f64,
    uniform_std: f64,
    best_head_mean: f64,
    best_head_std: f64,
    n: usize,
}

/// Writes `metrics.csv`, `summary.json`, `plot_budget.csv` (score against budget) and
/// `plot_bars.csv` (uniform against best head). Returns the written paths.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let metrics = dir.join("metrics.csv");
    write_rows(&metrics, &report.metric_rows())?;

    let summary = dir.join("summary.json");
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&summary, json + "\n").map_err(|e| Error::io(&summary, e))?;

    let a = &report.aggregate;
    let points: Vec<BudgetPoint> = report
        .budgets
        .iter()
        .enumerate()
        .map(|(b, &budget)| BudgetPoint {
            budget,
            hyre_mean: a.hyre[b].mean,
            hyre_std: a.hyre[b].std,
            finetune_mean: a.finetune[b].map(|s| s.mean),
            finetune_std: a.finetune[b].map(|s| s.std),
            uniform_mean: a.uniform.mean,
            best_head_mean: a.best_head.mean,
            n: a.hyre[b].n,
        })
        .collect();
    let budget_plot = dir.join("plot_budget.csv");
    write_rows(&budget_plot, &points)?;

    let bars = dir.join("plot_bars.csv");
    write_rows(
        &bars,
        &[Bar {
            task: report.name.clone(),
            uniform_mean: a.uniform.mean,
            uniform_std: a.uniform.std,
            best_head_mean: a.best_head.mean,
            best_head_std: a.best_head.std,
            n: a.uniform.n,
        }],
    )?;
    Ok(vec![metrics, summary, budget_plot, bars])
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

pub fn read_summary(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}
