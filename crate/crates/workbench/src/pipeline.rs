//! Single-run pipeline: geometry, forward model, noise, inversion, metrics,
//! and the artifacts each stage leaves on disk.
//!
//! A run directory holds
//!
//! | file | content |
//! |---|---|
//! | `config.toml` | canonical config |
//! | `states.csv` | per-step, per-segment interaction states |
//! | `ground_truth.csv` | ground-truth stress map |
//! | `dataset_segments.csv`, `observations.csv` | composite dataset |
//! | `model.toml` | fitted model ([`ModelFile`]) |
//! | `posterior_mean.csv`, `posterior_variance.csv` | reconstruction grids |
//! | `results.txt` | `key=value` summary |
//! | `run.log` | stage log |
//! | `FAILED` | present only after a failed run |

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rft_inverse::evaluation::{format_metrics_table, SamplingDiagnostics};
use rft_inverse::fivebar::sensor_map;
use rft_inverse::forward::{
    forward_sensor, forward_series, inject_noise_channels, read_dataset_csv, write_dataset_csv,
};
use rft_inverse::geometry::write_states_csv;
use rft_inverse::inverse::{data_scales, fit_residual, fit_scaling, GridPosterior};
use rft_inverse::{
    assemble_dataset, fit_hyperparameters, fivebar_jacobian, make_toe, make_trajectory,
    reconstruction_metrics, sample_prior_map, sampled_region_mask, sampling_diagnostics,
    segment_states, CompositeDataset, GpModel, GridStressMap, Hyperparameters, KernelConfig,
    MetricsReport, SegmentStateSeries,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, GroundTruth, Mode};
use crate::error::{AtStage, Result, Stage, WorkbenchError};

pub const CONFIG_FILE: &str = "config.toml";
pub const STATES_FILE: &str = "states.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const SEGMENTS_FILE: &str = "dataset_segments.csv";
pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const MODEL_FILE: &str = "model.toml";
pub const MEAN_FILE: &str = "posterior_mean.csv";
pub const VARIANCE_FILE: &str = "posterior_variance.csv";
pub const RESULTS_FILE: &str = "results.txt";
pub const LOG_FILE: &str = "run.log";
pub const FAILURE_MARKER: &str = "FAILED";

/// Numeric CSV artifacts of a run, the ones covered by the determinism check.
pub const NUMERIC_CSVS: [&str; 6] = [
    STATES_FILE,
    GROUND_TRUTH_FILE,
    SEGMENTS_FILE,
    OBSERVATIONS_FILE,
    MEAN_FILE,
    VARIANCE_FILE,
];

pub const MODEL_FORMAT: &str = "rft-gp-model";
pub const MODEL_VERSION: u32 = 1;

/// Stage log, written to `run.log` whether or not the run succeeds.
#[derive(Debug, Default, Clone)]
pub struct RunLog {
    lines: Vec<String>,
    warnings: Vec<String>,
}

impl RunLog {
    pub fn info(&mut self, stage: &str, msg: impl AsRef<str>) {
        self.lines.push(format!("[{stage}] {}", msg.as_ref()));
    }

    pub fn warn(&mut self, stage: &str, msg: impl Into<String>) {
        let msg = msg.into();
        self.lines.push(format!("[{stage}] warning: {msg}"));
        self.warnings.push(msg);
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

pub(crate) fn write_file(
    path: &Path,
    f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| WorkbenchError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| WorkbenchError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| WorkbenchError::io(path, e))
}

/// Reads a stress-map CSV.
pub fn load_map(path: &Path, stage: Stage) -> Result<GridStressMap> {
    let file = File::open(path).map_err(|e| WorkbenchError::io(path, e))?;
    GridStressMap::read_csv(BufReader::new(file)).at(stage)
}

/// Reads a dataset written by [`write_dataset_csv`].
pub fn load_dataset(segments: &Path, observations: &Path) -> Result<CompositeDataset> {
    let open = |p: &Path| {
        File::open(p)
            .map(BufReader::new)
            .map_err(|e| WorkbenchError::io(p, e))
    };
    read_dataset_csv(open(segments)?, open(observations)?).at(Stage::Dataset)
}

/// Materializes the configured ground truth.
pub fn ground_truth(cfg: &ExperimentConfig) -> Result<GridStressMap> {
    match &cfg.ground_truth {
        GroundTruth::Prior {
            seed,
            kernel_z,
            kernel_x,
            grid,
        } => sample_prior_map(kernel_z, kernel_x, *seed, &grid.axes()).at(Stage::GroundTruth),
        GroundTruth::File { path } => load_map(path, Stage::GroundTruth),
        GroundTruth::ScaledBase {
            path,
            zeta_z,
            zeta_x,
        } => Ok(load_map(path, Stage::GroundTruth)?.scaled(*zeta_z, *zeta_x)),
    }
}

/// Per-step sensor maps of the five-bar leg, hip fixed at `cfg.observation.hip`.
fn sensor_maps(
    cfg: &ExperimentConfig,
    series: &SegmentStateSeries,
) -> Result<Vec<Vec<DMatrix<f64>>>> {
    let obs = &cfg.observation;
    series
        .toe_positions
        .iter()
        .zip(&series.steps)
        .map(|(p, states)| {
            // leg frame: x along world x, y pointing down
            let (x, y) = (p[0] - obs.hip[0], obs.hip[1] - p[1]);
            let (phi1, phi2) = obs.leg.inverse_kinematics(x, y).at(Stage::Forward)?;
            let j = fivebar_jacobian(phi1, phi2, &obs.leg).at(Stage::Forward)?;
            Ok(vec![sensor_map(&j); states.len()])
        })
        .collect()
}

/// Output of the forward half of a run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub series: SegmentStateSeries,
    pub truth: GridStressMap,
    /// Observations before noise.
    pub clean: Vec<Vec<f64>>,
    pub dataset: CompositeDataset,
}

/// Geometry, ground truth, forward model and noise.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let toe = make_toe(&cfg.toe).at(Stage::Geometry)?;
    let trajectory = make_trajectory(&cfg.trajectory).at(Stage::Geometry)?;
    let series = segment_states(&toe, &trajectory, cfg.surface_height);
    let truth = ground_truth(cfg)?;
    let opts = cfg.observation.forward_options();
    let sensors = match cfg.observation.mode {
        Mode::Force => None,
        Mode::Torque => Some(sensor_maps(cfg, &series)?),
    };
    let clean: Vec<Vec<f64>> = match &sensors {
        None => forward_series(&series, &truth, opts)
            .into_iter()
            .map(|f| vec![f.f_z, f.f_x])
            .collect(),
        Some(maps) => series
            .steps
            .iter()
            .zip(maps)
            .map(|(states, g)| forward_sensor(states, g, &truth, opts))
            .collect(),
    };
    let noisy = clean
        .iter()
        .enumerate()
        .map(|(i, o)| inject_noise_channels(o, i, cfg.noise.level, cfg.noise.seed))
        .collect::<std::result::Result<Vec<_>, _>>()
        .at(Stage::Forward)?;
    let dataset =
        assemble_dataset(&series, &noisy, 0.0, sensors.as_deref(), opts).at(Stage::Dataset)?;
    Ok(Simulation {
        series,
        truth,
        clean,
        dataset,
    })
}

/// Fitted model summary plus its grid posterior.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub posterior: GridPosterior,
    pub hyperparameters: Hyperparameters,
    /// Log marginal likelihood of the GP part.
    pub log_likelihood: f64,
    pub jitter: f64,
    /// `(zeta_z, zeta_x)` for semi-parametric runs.
    pub scaling: Option<(f64, f64)>,
    pub best_restart: Option<usize>,
    pub iterations: Vec<usize>,
}

/// Initial hyperparameters scaled to the data.
pub fn initial_hyperparameters(cfg: &ExperimentConfig, ds: &CompositeDataset) -> Hyperparameters {
    let (o, s) = data_scales(ds);
    let k = KernelConfig::isotropic(s * s, cfg.inversion.init_lengthscale);
    Hyperparameters::new(k, k, cfg.inversion.init_noise_ratio * o * o)
}

/// Fits hyperparameters (or scaling plus residual) and evaluates the grid
/// posterior. Without active samples the prior is returned with a warning.
pub fn reconstruct(
    cfg: &ExperimentConfig,
    ds: &CompositeDataset,
    log: &mut RunLog,
) -> Result<Reconstruction> {
    let axes = cfg.grid.axes();
    let init = initial_hyperparameters(cfg, ds);
    if ds.active_angles().is_empty() {
        log.warn(
            "fit",
            "no submerged moving segments; the posterior equals the prior",
        );
        let model = GpModel::new(ds.clone(), init.clone()).at(Stage::Posterior)?;
        return Ok(Reconstruction {
            posterior: model.posterior_stress_grid(&axes).at(Stage::Posterior)?,
            hyperparameters: init,
            log_likelihood: model.log_marginal_likelihood(),
            jitter: model.jitter(),
            scaling: None,
            best_restart: None,
            iterations: Vec::new(),
        });
    }
    let opts = &cfg.inversion.fit;
    if let Some(base_path) = &cfg.inversion.base_map {
        let base = load_map(base_path, Stage::Fit)?;
        let zeta = fit_scaling(ds, &base).at(Stage::Fit)?;
        log.info(
            "fit",
            format!("scaling zeta_z={:.17e} zeta_x={:.17e}", zeta.0, zeta.1),
        );
        let model = fit_residual(ds, &base, zeta, &init, opts).at(Stage::Fit)?;
        let posterior = model.posterior_grid(&axes).at(Stage::Posterior)?;
        return Ok(Reconstruction {
            posterior,
            hyperparameters: model.residual.hyperparameters().clone(),
            log_likelihood: model.residual_log_likelihood,
            jitter: model.residual.jitter(),
            scaling: Some(zeta),
            best_restart: None,
            iterations: Vec::new(),
        });
    }
    let report = fit_hyperparameters(ds, &init, opts).at(Stage::Fit)?;
    for (i, r) in report.restarts.iter().enumerate() {
        match &r.result {
            Some((_, lml)) => log.info(
                "fit",
                format!("restart {i}: lml={lml:.17e} iterations={}", r.iterations),
            ),
            None => log.warn("fit", format!("restart {i} failed to factorize")),
        }
    }
    let posterior = report
        .model
        .posterior_stress_grid(&axes)
        .at(Stage::Posterior)?;
    if report.model.variance_floor_hits() > 0 {
        log.warn(
            "posterior",
            format!(
                "{} negative variances clamped to 0",
                report.model.variance_floor_hits()
            ),
        );
    }
    Ok(Reconstruction {
        posterior,
        hyperparameters: report.model.hyperparameters().clone(),
        log_likelihood: report.log_likelihood,
        jitter: report.model.jitter(),
        scaling: None,
        best_restart: Some(report.best_restart),
        iterations: report.restarts.iter().map(|r| r.iterations).collect(),
    })
}

/// Metrics against the truth on the reconstruction grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Whole grid.
    pub grid: MetricsReport,
    /// Nodes near sampled angles only.
    pub region: MetricsReport,
    pub sampling: SamplingDiagnostics,
}

pub fn evaluate(
    cfg: &ExperimentConfig,
    ds: &CompositeDataset,
    estimate: &GridStressMap,
    truth: &GridStressMap,
) -> Result<Evaluation> {
    let axes = cfg.grid.axes();
    let truth = if truth.beta_axis() == axes.beta.as_slice()
        && truth.gamma_axis() == axes.gamma.as_slice()
    {
        truth.clone()
    } else {
        GridStressMap::from_field(&axes, truth).at(Stage::Metrics)?
    };
    let e = &cfg.evaluation;
    let mask = sampled_region_mask(&axes, ds, e.mask_radius_deg.to_radians());
    Ok(Evaluation {
        grid: reconstruction_metrics(estimate, &truth, None).at(Stage::Metrics)?,
        region: reconstruction_metrics(estimate, &truth, Some(&mask)).at(Stage::Metrics)?,
        sampling: sampling_diagnostics(
            ds,
            e.angle_quantum_deg.to_radians(),
            e.bin_size_deg.to_radians(),
        )
        .at(Stage::Metrics)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingRecord {
    pub zeta_z: f64,
    pub zeta_x: f64,
    pub base_map: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRecord {
    pub n_beta: usize,
    pub n_gamma: usize,
    pub mean: String,
    pub variance: String,
}

/// Versioned fitted-model file.
///
/// The dataset files and grids are named relative to the model file;
/// `dataset_digest` is the SHA-256 of the segment file bytes followed by the
/// observation file bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub config_digest: String,
    pub dataset_digest: String,
    pub dataset_segments: String,
    pub dataset_observations: String,
    pub log_likelihood: f64,
    pub jitter: f64,
    pub hyperparameters: Hyperparameters,
    pub grid: GridRecord,
    #[serde(default)]
    pub scaling: Option<ScalingRecord>,
}

impl ModelFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| WorkbenchError::io(path, e))?;
        let m: Self = toml::from_str(&text)
            .map_err(|e| WorkbenchError::Config(format!("{}: {e}", path.display())))?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(WorkbenchError::Config(format!(
                "{}: unsupported model format {} v{}",
                path.display(),
                m.format,
                m.version
            )));
        }
        Ok(m)
    }

    /// Rebuilds the GP from the referenced dataset after checking its digest.
    /// Semi-parametric models are rejected.
    pub fn load_model(path: &Path) -> Result<GpModel> {
        let m = Self::read(path)?;
        if m.scaling.is_some() {
            return Err(WorkbenchError::Config(
                "semi-parametric models cannot be rebuilt from the dataset alone".into(),
            ));
        }
        let dir = path.parent().unwrap_or(Path::new("."));
        let (seg, obs) = (
            dir.join(&m.dataset_segments),
            dir.join(&m.dataset_observations),
        );
        let read = |p: &Path| std::fs::read(p).map_err(|e| WorkbenchError::io(p, e));
        let (sb, ob) = (read(&seg)?, read(&obs)?);
        if dataset_digest(&sb, &ob) != m.dataset_digest {
            return Err(WorkbenchError::Config(format!(
                "{}: dataset digest mismatch",
                path.display()
            )));
        }
        let ds = read_dataset_csv(&sb[..], &ob[..]).at(Stage::Dataset)?;
        GpModel::new(ds, m.hyperparameters).at(Stage::Posterior)
    }
}

pub fn dataset_digest(segments: &[u8], observations: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(segments);
    h.update(observations);
    hex::encode(h.finalize())
}

/// Writes the dataset files and returns their digest.
pub fn write_dataset(dir: &Path, ds: &CompositeDataset) -> Result<String> {
    let (mut seg, mut obs) = (Vec::new(), Vec::new());
    write_dataset_csv(ds, &mut seg, &mut obs).map_err(|e| WorkbenchError::io(dir, e))?;
    write_bytes(&dir.join(SEGMENTS_FILE), &seg)?;
    write_bytes(&dir.join(OBSERVATIONS_FILE), &obs)?;
    Ok(dataset_digest(&seg, &obs))
}

fn fmt_f(v: f64) -> String {
    format!("{v:.17e}")
}

/// Artifacts and summary of a completed run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config_digest: String,
    pub output_dir: PathBuf,
    pub states_csv: PathBuf,
    pub segments_csv: PathBuf,
    pub observations_csv: PathBuf,
    pub ground_truth_csv: PathBuf,
    pub model_file: PathBuf,
    pub mean_csv: PathBuf,
    pub variance_csv: PathBuf,
    pub results_file: PathBuf,
    pub log_file: PathBuf,
    pub reconstruction: Reconstruction,
    pub evaluation: Evaluation,
    pub warnings: Vec<String>,
}

impl RunArtifacts {
    pub fn metrics(&self) -> &MetricsReport {
        &self.evaluation.grid
    }

    pub fn region_metrics(&self) -> &MetricsReport {
        &self.evaluation.region
    }

    pub fn diagnostics(&self) -> &SamplingDiagnostics {
        &self.evaluation.sampling
    }
}

/// Writes the model, the posterior grids and `results.txt` into `dir`.
pub(crate) fn write_reconstruction(
    dir: &Path,
    cfg: &ExperimentConfig,
    ds_digest: &str,
    recon: &Reconstruction,
    evaluation: Option<&Evaluation>,
    steps: usize,
    log: &RunLog,
) -> Result<()> {
    write_file(&dir.join(MEAN_FILE), |w| recon.posterior.mean.write_csv(w))?;
    write_file(&dir.join(VARIANCE_FILE), |w| {
        recon.posterior.variance.write_csv(w)
    })?;
    let model = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        config_digest: cfg.digest(),
        dataset_digest: ds_digest.into(),
        dataset_segments: SEGMENTS_FILE.into(),
        dataset_observations: OBSERVATIONS_FILE.into(),
        log_likelihood: recon.log_likelihood,
        jitter: recon.jitter,
        hyperparameters: recon.hyperparameters.clone(),
        grid: GridRecord {
            n_beta: cfg.grid.n_beta,
            n_gamma: cfg.grid.n_gamma,
            mean: MEAN_FILE.into(),
            variance: VARIANCE_FILE.into(),
        },
        scaling: recon.scaling.map(|(zeta_z, zeta_x)| ScalingRecord {
            zeta_z,
            zeta_x,
            base_map: cfg.inversion.base_map.clone().unwrap_or_default(),
        }),
    };
    let text = toml::to_string(&model).map_err(|e| WorkbenchError::Config(e.to_string()))?;
    write_bytes(&dir.join(MODEL_FILE), text.as_bytes())?;

    let mut kv: Vec<(String, String)> = vec![
        ("status".into(), "ok".into()),
        ("name".into(), cfg.name.clone()),
        ("config_digest".into(), cfg.digest()),
        ("dataset_digest".into(), ds_digest.into()),
        ("steps".into(), steps.to_string()),
        ("log_likelihood".into(), fmt_f(recon.log_likelihood)),
        ("jitter".into(), fmt_f(recon.jitter)),
    ];
    let h = &recon.hyperparameters;
    for (label, k) in [("z", &h.kernel_z), ("x", &h.kernel_x)] {
        kv.push((
            format!("kernel_{label}.signal_variance"),
            fmt_f(k.signal_variance),
        ));
        for (d, l) in k.lengthscales.iter().enumerate() {
            kv.push((format!("kernel_{label}.lengthscale{d}"), fmt_f(*l)));
        }
    }
    for c in 0..h.noise.parameter_count() {
        kv.push((format!("noise_variance{c}"), fmt_f(h.noise.variance(c))));
    }
    if let Some((zz, zx)) = recon.scaling {
        kv.push(("zeta_z".into(), fmt_f(zz)));
        kv.push(("zeta_x".into(), fmt_f(zx)));
    }
    if let Some(e) = evaluation {
        kv.extend(e.grid.key_values("grid."));
        kv.extend(e.region.key_values("region."));
        kv.extend(e.sampling.key_values("sampling."));
    }
    kv.push(("warnings".into(), log.warnings().len().to_string()));
    write_file(&dir.join(RESULTS_FILE), |w| {
        for (k, v) in &kv {
            writeln!(w, "{k}={v}")?;
        }
        if let Some(e) = evaluation {
            writeln!(w)?;
            for line in format_metrics_table(&[(cfg.name.clone(), e.grid)]).lines() {
                writeln!(w, "# {line}")?;
            }
        }
        Ok(())
    })
}

/// Full pipeline. On error the partial artifacts stay in place next to a
/// `FAILED` marker naming the stage.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| WorkbenchError::io(&dir, e))?;
    let marker = dir.join(FAILURE_MARKER);
    if marker.exists() {
        std::fs::remove_file(&marker).map_err(|e| WorkbenchError::io(&marker, e))?;
    }
    let mut log = RunLog::default();
    let result = run_stages(cfg, &dir, &mut log);
    if let Err(e) = &result {
        log.info("run", format!("failed: {e}"));
        let stage = match e {
            WorkbenchError::Stage { stage, .. } => stage.to_string(),
            WorkbenchError::Config(_) => "config".into(),
            WorkbenchError::Io { .. } => "io".into(),
        };
        // best effort: the original error is what the caller needs
        let _ = std::fs::write(
            &marker,
            format!("stage={stage}\nexit_code={}\nerror={e}\n", e.exit_code()),
        );
    }
    write_bytes(&dir.join(LOG_FILE), log.text().as_bytes())?;
    result
}

fn run_stages(cfg: &ExperimentConfig, dir: &Path, log: &mut RunLog) -> Result<RunArtifacts> {
    write_bytes(&dir.join(CONFIG_FILE), cfg.to_toml_string().as_bytes())?;
    log.info(
        "config",
        format!("name={} digest={}", cfg.name, cfg.digest()),
    );

    let sim = simulate(cfg)?;
    write_file(&dir.join(STATES_FILE), |w| write_states_csv(&sim.series, w))?;
    write_file(&dir.join(GROUND_TRUTH_FILE), |w| sim.truth.write_csv(w))?;
    let ds = &sim.dataset;
    let digest = write_dataset(dir, ds)?;
    let active = ds.active_angles().len();
    log.info(
        "forward",
        format!(
            "steps={} segments={} active_samples={active} stationary={} noise_level={} noise_seed={}",
            sim.series.step_count(),
            sim.series.segment_count(),
            sim.series.stationary_count(),
            cfg.noise.level,
            cfg.noise.seed
        ),
    );
    if sim.truth.clamp_count() > 0 {
        log.warn(
            "forward",
            format!(
                "{} ground-truth lookups clamped in gamma",
                sim.truth.clamp_count()
            ),
        );
    }
    if active == 0 {
        log.warn("dataset", "all segment weights are zero");
    }

    let recon = reconstruct(cfg, ds, log)?;
    log.info(
        "fit",
        format!(
            "log_likelihood={:.17e} jitter={:e}",
            recon.log_likelihood, recon.jitter
        ),
    );
    let evaluation = evaluate(cfg, ds, &recon.posterior.mean, &sim.truth)?;
    log.info(
        "metrics",
        format!(
            "grid z rmse={:.6e} x rmse={:.6e}; region z acr={:?} pearson={:?}",
            evaluation.grid.z.rmse,
            evaluation.grid.x.rmse,
            evaluation.region.z.acr_pct,
            evaluation.region.z.pearson
        ),
    );
    write_reconstruction(
        dir,
        cfg,
        &digest,
        &recon,
        Some(&evaluation),
        sim.series.step_count(),
        log,
    )?;
    log.info("run", "completed");
    Ok(RunArtifacts {
        config_digest: cfg.digest(),
        output_dir: dir.to_path_buf(),
        states_csv: dir.join(STATES_FILE),
        segments_csv: dir.join(SEGMENTS_FILE),
        observations_csv: dir.join(OBSERVATIONS_FILE),
        ground_truth_csv: dir.join(GROUND_TRUTH_FILE),
        model_file: dir.join(MODEL_FILE),
        mean_csv: dir.join(MEAN_FILE),
        variance_csv: dir.join(VARIANCE_FILE),
        results_file: dir.join(RESULTS_FILE),
        log_file: dir.join(LOG_FILE),
        reconstruction: recon,
        evaluation,
        warnings: log.warnings().to_vec(),
    })
}

/// Forward half only: states, ground truth and dataset files.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<Simulation> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| WorkbenchError::io(dir, e))?;
    let sim = simulate(cfg)?;
    write_bytes(&dir.join(CONFIG_FILE), cfg.to_toml_string().as_bytes())?;
    write_file(&dir.join(STATES_FILE), |w| write_states_csv(&sim.series, w))?;
    write_file(&dir.join(GROUND_TRUTH_FILE), |w| sim.truth.write_csv(w))?;
    write_dataset(dir, &sim.dataset)?;
    Ok(sim)
}

/// Inversion of an existing dataset. Metrics are computed when `truth` is given.
pub fn run_inversion(
    cfg: &ExperimentConfig,
    ds: &CompositeDataset,
    truth: Option<&GridStressMap>,
) -> Result<(Reconstruction, Option<Evaluation>)> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| WorkbenchError::io(dir, e))?;
    let mut log = RunLog::default();
    let digest = write_dataset(dir, ds)?;
    let recon = reconstruct(cfg, ds, &mut log)?;
    let evaluation = truth
        .map(|t| evaluate(cfg, ds, &recon.posterior.mean, t))
        .transpose()?;
    write_reconstruction(
        dir,
        cfg,
        &digest,
        &recon,
        evaluation.as_ref(),
        ds.len(),
        &log,
    )?;
    write_bytes(&dir.join(LOG_FILE), log.text().as_bytes())?;
    Ok((recon, evaluation))
}
