use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rft_inverse::evaluation::format_metrics_table;
use rft_inverse::Component;
use rft_workbench::config::DEFAULT_CONFIG_NAMES;
use rft_workbench::pipeline::{self, load_dataset, load_map, OBSERVATIONS_FILE, SEGMENTS_FILE};
use rft_workbench::{
    compare_configs, default_config, export_heatmap, parse_component, run_experiment, sweep_noise,
    ExperimentConfig, GridSpec, Mode, Render, Result, Stage, WorkbenchError,
};

#[derive(Parser)]
#[command(
    name = "rft-workbench",
    version,
    about = "Stress-map reconstruction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in config: i_toe_gait1, i_toe_gait2, c_toe_gait1, c_toe_gait2.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Reconstruction grid, e.g. 37x37.
    #[arg(long)]
    grid: Option<GridSpec>,
    /// Observation mode, `force` or `torque`, overriding the config.
    #[arg(long)]
    mode: Option<Mode>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(p), _) => ExperimentConfig::load(p)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => {
                return Err(WorkbenchError::Config(
                    "one of --config or --preset is required".into(),
                ))
            }
        };
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.noise.seed = s;
        }
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        if let Some(m) = self.mode {
            cfg.observation.mode = m;
        }
    }
}

fn preset(name: &str) -> Result<ExperimentConfig> {
    default_config(name).ok_or_else(|| {
        WorkbenchError::Config(format!(
            "unknown preset {name:?}; expected one of {}",
            DEFAULT_CONFIG_NAMES.join(", ")
        ))
    })
}

#[derive(Subcommand)]
enum Command {
    /// Forward model only: states, ground truth and observations.
    Simulate(Common),
    /// Fit and reconstruct from a dataset directory written by `simulate`.
    Invert {
        #[command(flatten)]
        common: Common,
        /// Directory holding dataset_segments.csv and observations.csv.
        #[arg(long)]
        data: PathBuf,
        /// Ground-truth map for metrics.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Full pipeline.
    Run(Common),
    /// Repeat a run over noise levels and seeds.
    SweepNoise {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.2")]
        levels: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: Vec<u64>,
    },
    /// Run several configs and rank them by z-axis RMSE.
    Compare {
        /// Experiment config (TOML); repeatable.
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
        /// Built-in config name; repeatable.
        #[arg(long = "preset")]
        presets: Vec<String>,
        /// All four built-in configs.
        #[arg(long)]
        defaults: bool,
        /// Directory for per-run outputs and compare.txt.
        #[arg(long)]
        out: PathBuf,
        /// Reconstruction grid applied to every config.
        #[arg(long)]
        grid: Option<GridSpec>,
        /// Observation mode applied to every config.
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Export a stress-map CSV as CSV or SVG.
    Export {
        /// Stress-map CSV written by `run` or `invert`.
        #[arg(long)]
        input: PathBuf,
        /// Output file; `.csv` or `.svg`.
        #[arg(long)]
        out: PathBuf,
        /// Stress component, `z` or `x`.
        #[arg(long, value_parser = parse_component, default_value = "z")]
        component: Component,
        /// Defaults to the output extension.
        #[arg(long)]
        format: Option<Render>,
    },
    /// Write the built-in configs as TOML files.
    Presets {
        /// Directory to write the TOML files into.
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| WorkbenchError::io(path, e))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = common.load()?;
            let sim = pipeline::run_simulation(&cfg)?;
            println!(
                "simulated {} steps, {} active samples -> {}",
                sim.series.step_count(),
                sim.dataset.active_angles().len(),
                cfg.output_dir.display()
            );
        }
        Command::Invert {
            common,
            data,
            truth,
        } => {
            let cfg = common.load()?;
            let ds = load_dataset(&data.join(SEGMENTS_FILE), &data.join(OBSERVATIONS_FILE))?;
            let truth = truth.map(|p| load_map(&p, Stage::Metrics)).transpose()?;
            let (recon, eval) = pipeline::run_inversion(&cfg, &ds, truth.as_ref())?;
            println!("log_likelihood={:.6e}", recon.log_likelihood);
            if let Some(e) = eval {
                print!("{}", format_metrics_table(&[(cfg.name.clone(), e.grid)]));
            }
        }
        Command::Run(common) => {
            let cfg = common.load()?;
            let run = run_experiment(&cfg)?;
            print!(
                "{}",
                format_metrics_table(&[(cfg.name.clone(), *run.metrics())])
            );
            for w in &run.warnings {
                eprintln!("warning: {w}");
            }
            println!("artifacts in {}", run.output_dir.display());
        }
        Command::SweepNoise {
            common,
            levels,
            seeds,
        } => {
            let cfg = common.load()?;
            let table = sweep_noise(&cfg, &levels, &seeds)?;
            println!("level  runs  z_rmse_mean  z_rmse_std  x_rmse_mean  x_rmse_std");
            for s in &table.summary {
                println!(
                    "{:<6} {:>4}  {:.4e}  {:.4e}  {:.4e}  {:.4e}",
                    s.level, s.runs, s.rmse_z.mean, s.rmse_z.std, s.rmse_x.mean, s.rmse_x.std
                );
            }
        }
        Command::Compare {
            configs,
            presets,
            defaults,
            out,
            grid,
            mode,
        } => {
            let mut list = Vec::new();
            for p in &configs {
                list.push(ExperimentConfig::load(p)?);
            }
            for n in &presets {
                list.push(preset(n)?);
            }
            if defaults {
                list.extend(rft_workbench::default_configs());
            }
            for cfg in &mut list {
                if let Some(g) = grid {
                    cfg.grid = g;
                }
                if let Some(m) = mode {
                    cfg.observation.mode = m;
                }
            }
            let rows = compare_configs(&list, &out)?;
            let table: Vec<_> = rows.iter().map(|r| (r.name.clone(), r.metrics)).collect();
            print!("{}", format_metrics_table(&table));
        }
        Command::Export {
            input,
            out,
            component,
            format,
        } => {
            let render = match format {
                Some(r) => r,
                None => match out.extension().and_then(|e| e.to_str()) {
                    Some("svg") => Render::Svg,
                    Some("csv") => Render::Csv,
                    _ => {
                        return Err(WorkbenchError::Config(
                            "cannot infer --format from the output extension".into(),
                        ))
                    }
                },
            };
            let map = load_map(&input, Stage::Metrics)?;
            export_heatmap(&map, component, &out, render)?;
        }
        Command::Presets { out } => {
            std::fs::create_dir_all(&out).map_err(|e| WorkbenchError::io(&out, e))?;
            for name in DEFAULT_CONFIG_NAMES {
                let cfg = preset(name)?;
                write_text(&out.join(format!("{name}.toml")), &cfg.to_toml_string())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
