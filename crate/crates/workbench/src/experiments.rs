//! Multi-run orchestration: noise sweeps and configuration comparisons.

use std::path::Path;

use rft_inverse::evaluation::{format_metrics_table, ComponentMetrics};
use rft_inverse::{Component, MetricsReport};

use crate::config::ExperimentConfig;
use crate::error::{Result, WorkbenchError};
use crate::pipeline::{run_experiment, write_file, RunArtifacts};

/// One `(level, seed)` cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub level: f64,
    pub seed: u64,
    pub metrics: MetricsReport,
}

/// Mean and sample standard deviation of one metric across seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// `std` is 0 for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Aggregates over seeds at one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub level: f64,
    pub runs: usize,
    pub rmse_z: MeanStd,
    pub mae_z: MeanStd,
    pub rmse_x: MeanStd,
    pub mae_x: MeanStd,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    /// Level-major, seeds in the order given.
    pub cells: Vec<SweepCell>,
    pub summary: Vec<LevelSummary>,
}

/// Runs `config` at every `(level, seed)` pair, each in its own
/// subdirectory of `config.output_dir`, and writes `sweep.csv` and
/// `sweep_summary.csv` there.
pub fn sweep_noise(config: &ExperimentConfig, levels: &[f64], seeds: &[u64]) -> Result<SweepTable> {
    if levels.is_empty() || seeds.is_empty() {
        return Err(WorkbenchError::Config(
            "sweep needs at least one level and one seed".into(),
        ));
    }
    let root = config.output_dir.clone();
    std::fs::create_dir_all(&root).map_err(|e| WorkbenchError::io(&root, e))?;
    let mut cells = Vec::with_capacity(levels.len() * seeds.len());
    for (li, &level) in levels.iter().enumerate() {
        for &seed in seeds {
            let mut cfg = config.clone();
            cfg.noise.level = level;
            cfg.noise.seed = seed;
            cfg.output_dir = root.join(format!("level{li}_seed{seed}"));
            let run = run_experiment(&cfg)?;
            cells.push(SweepCell {
                level,
                seed,
                metrics: *run.metrics(),
            });
        }
    }
    let summary = levels
        .iter()
        .map(|&level| {
            let at: Vec<&SweepCell> = cells.iter().filter(|c| c.level == level).collect();
            let stat = |c: Component, f: fn(&ComponentMetrics) -> f64| {
                MeanStd::of(
                    &at.iter()
                        .map(|x| f(x.metrics.component(c)))
                        .collect::<Vec<_>>(),
                )
            };
            LevelSummary {
                level,
                runs: at.len(),
                rmse_z: stat(Component::Z, |m| m.rmse),
                mae_z: stat(Component::Z, |m| m.mae),
                rmse_x: stat(Component::X, |m| m.rmse),
                mae_x: stat(Component::X, |m| m.mae),
            }
        })
        .collect();
    let table = SweepTable { cells, summary };
    write_sweep(&root, &table)?;
    Ok(table)
}

fn write_sweep(dir: &Path, table: &SweepTable) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:.16e}"));
    write_file(&dir.join("sweep.csv"), |w| {
        writeln!(
            w,
            "level,seed,z_rmse,z_mae,z_r2,z_pearson,z_acr_pct,x_rmse,x_mae,x_r2,x_pearson,x_acr_pct"
        )?;
        for c in &table.cells {
            let (z, x) = (&c.metrics.z, &c.metrics.x);
            writeln!(
                w,
                "{:.16e},{},{:.16e},{:.16e},{},{},{},{:.16e},{:.16e},{},{},{}",
                c.level,
                c.seed,
                z.rmse,
                z.mae,
                opt(z.r2),
                opt(z.pearson),
                opt(z.acr_pct),
                x.rmse,
                x.mae,
                opt(x.r2),
                opt(x.pearson),
                opt(x.acr_pct)
            )?;
        }
        Ok(())
    })?;
    write_file(&dir.join("sweep_summary.csv"), |w| {
        writeln!(
            w,
            "level,runs,z_rmse_mean,z_rmse_std,z_mae_mean,z_mae_std,x_rmse_mean,x_rmse_std,x_mae_mean,x_mae_std"
        )?;
        for s in &table.summary {
            writeln!(
                w,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.level,
                s.runs,
                s.rmse_z.mean,
                s.rmse_z.std,
                s.mae_z.mean,
                s.mae_z.std,
                s.rmse_x.mean,
                s.rmse_x.std,
                s.mae_x.mean,
                s.mae_x.std
            )?;
        }
        Ok(())
    })
}

/// One row of a comparison.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub name: String,
    pub metrics: MetricsReport,
    pub artifacts: RunArtifacts,
}

/// Runs each config under `out/<index>_<name>` and returns the rows sorted
/// by z-axis grid RMSE, ties in input order. Writes `compare.txt` to `out`.
pub fn compare_configs(configs: &[ExperimentConfig], out: &Path) -> Result<Vec<ComparisonRow>> {
    if configs.is_empty() {
        return Err(WorkbenchError::Config("nothing to compare".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| WorkbenchError::io(out, e))?;
    let mut rows = Vec::with_capacity(configs.len());
    for (i, cfg) in configs.iter().enumerate() {
        let mut cfg = cfg.clone();
        cfg.output_dir = out.join(format!("{i}_{}", cfg.name));
        let artifacts = run_experiment(&cfg)?;
        rows.push(ComparisonRow {
            name: cfg.name.clone(),
            metrics: *artifacts.metrics(),
            artifacts,
        });
    }
    rows.sort_by(|a, b| a.metrics.z.rmse.total_cmp(&b.metrics.z.rmse));
    let table: Vec<(String, MetricsReport)> =
        rows.iter().map(|r| (r.name.clone(), r.metrics)).collect();
    let text = format_metrics_table(&table);
    write_file(&out.join("compare.txt"), |w| w.write_all(text.as_bytes()))?;
    Ok(rows)
}
