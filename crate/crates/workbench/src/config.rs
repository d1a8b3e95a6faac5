//! Experiment configuration: a TOML tree with strict key checking.

use std::path::{Path, PathBuf};

use rft_inverse::evaluation::{DEFAULT_ANGLE_QUANTUM, DEFAULT_BIN_SIZE, DEFAULT_MASK_RADIUS};
use rft_inverse::forward::ForwardOptions;
use rft_inverse::inverse::FitOptions;
use rft_inverse::{
    make_toe, make_trajectory, FiveBarParams, GridAxes, KernelConfig, ToeGeometry, Trajectory,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, WorkbenchError};

/// Where the ground-truth stress map comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroundTruth {
    /// One seeded draw from the GP prior.
    Prior {
        seed: u64,
        #[serde(default = "default_prior_kernel")]
        kernel_z: KernelConfig,
        #[serde(default = "default_prior_kernel")]
        kernel_x: KernelConfig,
        #[serde(default)]
        grid: GridSpec,
    },
    /// A stress-map CSV.
    File { path: PathBuf },
    /// A stress-map CSV scaled per component.
    ScaledBase {
        path: PathBuf,
        zeta_z: f64,
        zeta_x: f64,
    },
}

/// Standard deviation 1e6 N/m^3, unit lengthscale in embedded coordinates.
pub fn default_prior_kernel() -> KernelConfig {
    KernelConfig::isotropic(1e12, 1.0)
}

impl Default for GroundTruth {
    fn default() -> Self {
        GroundTruth::Prior {
            seed: 1,
            kernel_z: default_prior_kernel(),
            kernel_x: default_prior_kernel(),
            grid: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Force,
    Torque,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "force" => Ok(Mode::Force),
            "torque" => Ok(Mode::Torque),
            other => Err(format!("unknown mode {other:?}, expected force or torque")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub leading_edge_only: bool,
    /// Five-bar leg used in torque mode.
    #[serde(default)]
    pub leg: FiveBarParams,
    /// World `(x, z)` of the leg hip in torque mode; fixed during the gait.
    #[serde(default = "default_hip")]
    pub hip: [f64; 2],
}

fn default_hip() -> [f64; 2] {
    [0.0, 0.3]
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Force,
            leading_edge_only: false,
            leg: FiveBarParams::default(),
            hip: default_hip(),
        }
    }
}

impl ObservationConfig {
    pub fn forward_options(&self) -> ForwardOptions {
        ForwardOptions {
            leading_edge_only: self.leading_edge_only,
        }
    }
}

/// Multiplicative `Normal(1, level)` noise on every observation channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    /// Initial lengthscale for both kernels.
    #[serde(default = "default_init_lengthscale")]
    pub init_lengthscale: f64,
    /// Initial noise variance relative to the squared observation RMS.
    #[serde(default = "default_init_noise_ratio")]
    pub init_noise_ratio: f64,
    #[serde(default)]
    pub fit: FitOptions,
    /// Stress-map CSV; when set the run fits a scaled base plus a GP residual.
    #[serde(default)]
    pub base_map: Option<PathBuf>,
}

fn default_init_lengthscale() -> f64 {
    1.0
}

fn default_init_noise_ratio() -> f64 {
    1e-4
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            init_lengthscale: default_init_lengthscale(),
            init_noise_ratio: default_init_noise_ratio(),
            fit: FitOptions::default(),
            base_map: None,
        }
    }
}

/// Uniform node grid over `[-pi/2, pi/2]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_beta: usize,
    pub n_gamma: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_beta: 37,
            n_gamma: 37,
        }
    }
}

impl GridSpec {
    pub fn axes(&self) -> GridAxes {
        GridAxes::uniform(self.n_beta, self.n_gamma)
    }
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    /// `"37x37"`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("grid must look like 37x37, got {s:?}"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad grid size {v:?}: {e}"))
        };
        Ok(Self {
            n_beta: parse(a)?,
            n_gamma: parse(b)?,
        })
    }
}

/// Angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_quantum_deg")]
    pub angle_quantum_deg: f64,
    #[serde(default = "default_bin_deg")]
    pub bin_size_deg: f64,
    #[serde(default = "default_mask_deg")]
    pub mask_radius_deg: f64,
}

fn default_quantum_deg() -> f64 {
    DEFAULT_ANGLE_QUANTUM.to_degrees()
}

fn default_bin_deg() -> f64 {
    DEFAULT_BIN_SIZE.to_degrees()
}

fn default_mask_deg() -> f64 {
    DEFAULT_MASK_RADIUS.to_degrees()
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            angle_quantum_deg: default_quantum_deg(),
            bin_size_deg: default_bin_deg(),
            mask_radius_deg: default_mask_deg(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub toe: ToeGeometry,
    pub trajectory: Trajectory,
    #[serde(default)]
    pub surface_height: f64,
    #[serde(default)]
    pub ground_truth: GroundTruth,
    #[serde(default)]
    pub observation: ObservationConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub inversion: InversionConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    /// Excluded from the digest.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn config_err(msg: impl Into<String>) -> WorkbenchError {
    WorkbenchError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Relative paths inside it resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| WorkbenchError::io(path, e))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        match &mut self.ground_truth {
            GroundTruth::File { path } | GroundTruth::ScaledBase { path, .. } => fix(path),
            GroundTruth::Prior { .. } => {}
        }
        if let Some(p) = &mut self.inversion.base_map {
            fix(p);
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization with `output_dir` blanked.
    pub fn digest(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(canon.to_toml_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(config_err(format!("{name} must be finite")))
            }
        };
        make_toe(&self.toe).map_err(|e| config_err(format!("toe: {e}")))?;
        make_trajectory(&self.trajectory).map_err(|e| config_err(format!("trajectory: {e}")))?;
        finite("surface_height", self.surface_height)?;
        if !(self.noise.level >= 0.0 && self.noise.level.is_finite()) {
            return Err(config_err("noise.level must be finite and >= 0"));
        }
        for (name, g) in [("grid", self.grid)] {
            if g.n_beta < 2 || g.n_gamma < 2 {
                return Err(config_err(format!("{name} needs at least 2x2 nodes")));
            }
        }
        match &self.ground_truth {
            GroundTruth::Prior {
                kernel_z,
                kernel_x,
                grid,
                ..
            } => {
                kernel_z
                    .validate()
                    .and_then(|_| kernel_x.validate())
                    .map_err(|e| config_err(format!("ground_truth: {e}")))?;
                if grid.n_beta < 2
                    || grid.n_gamma < 2
                    || grid.n_beta > rft_inverse::stress_field::MAX_PRIOR_GRID
                    || grid.n_gamma > rft_inverse::stress_field::MAX_PRIOR_GRID
                {
                    return Err(config_err(
                        "ground_truth.grid must be between 2x2 and 64x64",
                    ));
                }
            }
            GroundTruth::File { path } => require_file("ground_truth.path", path)?,
            GroundTruth::ScaledBase {
                path,
                zeta_z,
                zeta_x,
            } => {
                require_file("ground_truth.path", path)?;
                finite("ground_truth.zeta_z", *zeta_z)?;
                finite("ground_truth.zeta_x", *zeta_x)?;
            }
        }
        let inv = &self.inversion;
        if !(inv.init_lengthscale > 0.0 && inv.init_lengthscale.is_finite()) {
            return Err(config_err("inversion.init_lengthscale must be positive"));
        }
        if !(inv.init_noise_ratio > 0.0 && inv.init_noise_ratio.is_finite()) {
            return Err(config_err("inversion.init_noise_ratio must be positive"));
        }
        if inv.fit.restarts == 0 {
            return Err(config_err("inversion.fit.restarts must be >= 1"));
        }
        if let Some(b) = &inv.fit.bounds {
            b.validate()
                .map_err(|e| config_err(format!("inversion.fit.bounds: {e}")))?;
        }
        if let Some(p) = &inv.base_map {
            require_file("inversion.base_map", p)?;
        }
        if self.observation.mode == Mode::Torque {
            self.observation
                .leg
                .validate()
                .map_err(|e| config_err(format!("observation.leg: {e}")))?;
            finite("observation.hip[0]", self.observation.hip[0])?;
            finite("observation.hip[1]", self.observation.hip[1])?;
        }
        let e = &self.evaluation;
        for (name, v) in [
            ("angle_quantum_deg", e.angle_quantum_deg),
            ("bin_size_deg", e.bin_size_deg),
            ("mask_radius_deg", e.mask_radius_deg),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("evaluation.{name} must be positive")));
            }
        }
        Ok(())
    }
}

fn require_file(name: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(config_err(format!(
            "{name}: {} does not exist",
            path.display()
        )))
    }
}

/// Names of the four built-in configurations.
pub const DEFAULT_CONFIG_NAMES: [&str; 4] =
    ["i_toe_gait1", "i_toe_gait2", "c_toe_gait1", "c_toe_gait2"];

/// Gait 1: 50 mm down, 400 mm across, 50 mm up.
pub fn rectangle_gait() -> Trajectory {
    Trajectory::rectangle(0.05, 0.4, 0.05, 100)
}

/// Gait 2: natural cubic spline through four control points, in meters.
pub fn cubic_gait() -> Trajectory {
    Trajectory::cubic_spline(
        vec![[-0.2, 0.0], [-0.1, -0.05], [0.1, 0.0], [0.2, -0.05]],
        100,
    )
}

/// 20 mm plate, 8 mm wide, 10 segments.
pub fn i_toe() -> ToeGeometry {
    ToeGeometry::i_toe(0.02, 0.008, 10)
}

/// 20 mm radius arc, 8 mm wide, 10 segments.
pub fn c_toe() -> ToeGeometry {
    ToeGeometry::c_toe(0.02, 0.008, 10)
}

/// One of [`DEFAULT_CONFIG_NAMES`], noise-free with the default prior draw
/// as ground truth.
pub fn default_config(name: &str) -> Option<ExperimentConfig> {
    let (toe, trajectory) = match name {
        "i_toe_gait1" => (i_toe(), rectangle_gait()),
        "i_toe_gait2" => (i_toe(), cubic_gait()),
        "c_toe_gait1" => (c_toe(), rectangle_gait()),
        "c_toe_gait2" => (c_toe(), cubic_gait()),
        _ => return None,
    };
    Some(ExperimentConfig {
        name: name.to_string(),
        toe,
        trajectory,
        surface_height: 0.0,
        ground_truth: GroundTruth::default(),
        observation: ObservationConfig::default(),
        noise: NoiseConfig::default(),
        inversion: InversionConfig::default(),
        grid: GridSpec::default(),
        evaluation: EvaluationConfig::default(),
        output_dir: PathBuf::from("out").join(name),
    })
}

pub fn default_configs() -> Vec<ExperimentConfig> {
    DEFAULT_CONFIG_NAMES
        .iter()
        .filter_map(|n| default_config(n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        for cfg in default_configs() {
            let text = cfg.to_toml_string();
            let back = ExperimentConfig::from_toml_str(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.digest(), cfg.digest());
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let text = r#"
name = "mini"
[toe]
kind = "c_toe"
length_or_radius = 0.02
width = 0.008
[trajectory]
sample_count = 100
[trajectory.shape]
kind = "cubic_spline"
control_points = [[-0.2, 0.0], [-0.1, -0.05], [0.1, 0.0], [0.2, -0.05]]
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let mut expected = default_config("c_toe_gait2").unwrap();
        expected.name = "mini".into();
        expected.output_dir = PathBuf::from("out");
        assert_eq!(cfg, expected);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = default_config("c_toe_gait1").unwrap().to_toml_string();
        text.push_str("\n[noise_typo]\nlevel = 0.1\n");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&text),
            Err(WorkbenchError::Config(_))
        ));
        let text = default_config("c_toe_gait1")
            .unwrap()
            .to_toml_string()
            .replace("level = 0.0", "level = 0.0\nlvl = 1.0");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn digest_tracks_meaningful_fields_only() {
        let a = default_config("c_toe_gait2").unwrap();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.digest(), b.digest());
        b.noise.seed = 9;
        assert_ne!(a.digest(), b.digest());
        let mut c = a.clone();
        c.toe.width = 0.009;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut cfg = default_config("i_toe_gait1").unwrap();
        cfg.noise.level = -0.1;
        assert!(matches!(cfg.validate(), Err(WorkbenchError::Config(_))));
        let mut cfg = default_config("i_toe_gait1").unwrap();
        cfg.toe.segment_count = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = default_config("i_toe_gait1").unwrap();
        cfg.ground_truth = GroundTruth::File {
            path: PathBuf::from("/nonexistent/map.csv"),
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn grid_spec_parses() {
        assert_eq!(
            "19x25".parse::<GridSpec>().unwrap(),
            GridSpec {
                n_beta: 19,
                n_gamma: 25
            }
        );
        assert!("19".parse::<GridSpec>().is_err());
        assert!("ax3".parse::<GridSpec>().is_err());
    }
}
