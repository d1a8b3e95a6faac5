//! Forward resistive-force model, measurement noise and composite datasets.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RftError};
use crate::geometry::{SegmentState, SegmentStateSeries};
use crate::stress_field::StressField;

/// Net contact force at one time step, newtons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    pub f_z: f64,
    pub f_x: f64,
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardOptions {
    /// Count only segments whose exposed face pushes into the medium.
    #[serde(default)]
    pub leading_edge_only: bool,
}

impl ForwardOptions {
    /// Depth-area weight of a segment under these options.
    pub fn weight(&self, s: &SegmentState) -> f64 {
        if self.leading_edge_only && !s.leading {
            0.0
        } else {
            s.weight()
        }
    }
}

/// Sum of `depth * area * alpha(beta, gamma)` over the segments of one step.
pub fn forward_force(
    states: &[SegmentState],
    field: &impl StressField,
    options: ForwardOptions,
    step_index: usize,
) -> ForceSample {
    let (mut f_z, mut f_x) = (0.0, 0.0);
    for s in states {
        let w = options.weight(s);
        if w == 0.0 {
            continue;
        }
        let (az, ax) = field.eval(s.beta, s.gamma);
        f_z += w * az;
        f_x += w * ax;
    }
    ForceSample {
        f_z,
        f_x,
        step_index,
    }
}

/// Forward forces for every step of a series.
pub fn forward_series(
    series: &SegmentStateSeries,
    field: &(impl StressField + Sync),
    options: ForwardOptions,
) -> Vec<ForceSample> {
    series
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| forward_force(s, field, options, i))
        .collect()
}

/// Joint torques `sum_m w_m G_m^T alpha(theta_m)` for one step.
pub fn forward_sensor(
    states: &[SegmentState],
    sensors: &[DMatrix<f64>],
    field: &impl StressField,
    options: ForwardOptions,
) -> Vec<f64> {
    let channels = sensors.first().map_or(0, |g| g.ncols());
    let mut out = vec![0.0; channels];
    for (s, g) in states.iter().zip(sensors) {
        let w = options.weight(s);
        if w == 0.0 {
            continue;
        }
        let (az, ax) = field.eval(s.beta, s.gamma);
        for (c, o) in out.iter_mut().enumerate() {
            *o += w * (g[(0, c)] * az + g[(1, c)] * ax);
        }
    }
    out
}

/// Noise stream for one `(seed, step, channel)` key.
fn noise_rng(seed: u64, step: usize, channel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((step as u64) << 16) | channel as u64);
    rng
}

/// One multiplicative factor `s ~ Normal(1, level)` for a noise key.
pub fn noise_factor(level: f64, seed: u64, step: usize, channel: usize) -> Result<f64> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(RftError::InvalidSpec(format!(
            "noise level must be >= 0, got {level}"
        )));
    }
    if level == 0.0 {
        return Ok(1.0);
    }
    let n: f64 = StandardNormal.sample(&mut noise_rng(seed, step, channel));
    Ok(1.0 + level.sqrt() * n)
}

/// Multiplies each force component by an independent `Normal(1, level)` draw.
/// `level` is the variance of the factor.
pub fn inject_noise(force: ForceSample, level: f64, seed: u64) -> Result<ForceSample> {
    Ok(ForceSample {
        f_z: force.f_z * noise_factor(level, seed, force.step_index, 0)?,
        f_x: force.f_x * noise_factor(level, seed, force.step_index, 1)?,
        step_index: force.step_index,
    })
}

/// [`inject_noise`] for a generic observation vector.
pub fn inject_noise_channels(obs: &[f64], step: usize, level: f64, seed: u64) -> Result<Vec<f64>> {
    obs.iter()
        .enumerate()
        .map(|(c, v)| Ok(v * noise_factor(level, seed, step, c)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// Observations are `(F_z, F_x)`.
    Force,
    /// Observations are joint torques.
    Torque,
}

/// One composite observation and the segments it aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeStep {
    pub observation: Vec<f64>,
    /// `(beta, gamma)` per segment.
    pub angles: Vec<(f64, f64)>,
    /// `|z| * A` per segment, zero when the segment does not contribute.
    pub weights: Vec<f64>,
    /// Per-segment 2 x N maps (rows z, x) in torque mode.
    pub sensors: Option<Vec<DMatrix<f64>>>,
}

impl CompositeStep {
    /// Coefficient of `alpha_component` of segment `m` in observation channel `c`.
    pub fn coefficient(&self, m: usize, component: usize, channel: usize) -> f64 {
        let w = self.weights[m];
        match &self.sensors {
            None => {
                if component == channel {
                    w
                } else {
                    0.0
                }
            }
            Some(g) => w * g[m][(component, channel)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeDataset {
    pub mode: ObservationMode,
    pub channels: usize,
    pub steps: Vec<CompositeStep>,
    pub noise_variance: f64,
}

impl CompositeDataset {
    pub fn empty(mode: ObservationMode, channels: usize) -> Self {
        Self {
            mode,
            channels,
            steps: Vec::new(),
            noise_variance: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn observation_count(&self) -> usize {
        self.steps.len() * self.channels
    }

    /// All observations, step-major.
    pub fn observations(&self) -> Vec<f64> {
        self.steps
            .iter()
            .flat_map(|s| s.observation.iter().copied())
            .collect()
    }

    /// Same angles and weights with replaced observations.
    pub fn with_observations(&self, obs: &[f64]) -> Result<Self> {
        if obs.len() != self.observation_count() {
            return Err(RftError::DimensionMismatch(format!(
                "{} observations for {} channels",
                obs.len(),
                self.observation_count()
            )));
        }
        let mut out = self.clone();
        for (i, s) in out.steps.iter_mut().enumerate() {
            s.observation = obs[i * self.channels..(i + 1) * self.channels].to_vec();
        }
        Ok(out)
    }

    /// Subset of steps, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            steps: indices.iter().map(|&i| self.steps[i].clone()).collect(),
            ..self.clone()
        }
    }

    /// Every `(beta, gamma)` that carries non-zero weight.
    pub fn active_angles(&self) -> Vec<(f64, f64)> {
        self.steps
            .iter()
            .flat_map(|s| {
                s.angles
                    .iter()
                    .zip(&s.weights)
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(a, _)| *a)
            })
            .collect()
    }

    /// Observations predicted by a stress field.
    pub fn predict(&self, field: &impl StressField) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.observation_count());
        for s in &self.steps {
            let mut obs = vec![0.0; self.channels];
            for (m, &(b, g)) in s.angles.iter().enumerate() {
                if s.weights[m] == 0.0 {
                    continue;
                }
                let a = field.eval(b, g);
                for (c, o) in obs.iter_mut().enumerate() {
                    *o += self.coefficient_of(s, m, c, a);
                }
            }
            out.extend(obs);
        }
        out
    }

    fn coefficient_of(&self, s: &CompositeStep, m: usize, c: usize, a: (f64, f64)) -> f64 {
        s.coefficient(m, 0, c) * a.0 + s.coefficient(m, 1, c) * a.1
    }

    /// Checks list lengths, weights and finiteness.
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.steps.iter().enumerate() {
            if s.observation.len() != self.channels {
                return Err(RftError::DimensionMismatch(format!(
                    "step {i} has {} channels, expected {}",
                    s.observation.len(),
                    self.channels
                )));
            }
            if s.angles.len() != s.weights.len() {
                return Err(RftError::DimensionMismatch(format!(
                    "step {i}: {} angles but {} weights",
                    s.angles.len(),
                    s.weights.len()
                )));
            }
            if s.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(RftError::NonFinite(format!("weights at step {i}")));
            }
            if s.observation.iter().any(|v| !v.is_finite())
                || s.angles
                    .iter()
                    .any(|(b, g)| !b.is_finite() || !g.is_finite())
            {
                return Err(RftError::NonFinite(format!("step {i}")));
            }
            match (&s.sensors, self.mode) {
                (None, ObservationMode::Force) => {
                    if self.channels != 2 {
                        return Err(RftError::DimensionMismatch(
                            "force mode has exactly 2 channels".into(),
                        ));
                    }
                }
                (Some(g), ObservationMode::Torque) => {
                    if g.len() != s.weights.len()
                        || g.iter().any(|m| m.shape() != (2, self.channels))
                    {
                        return Err(RftError::DimensionMismatch(format!(
                            "sensor maps at step {i} must be 2 x {}",
                            self.channels
                        )));
                    }
                }
                _ => {
                    return Err(RftError::DimensionMismatch(format!(
                        "step {i}: sensor maps present iff torque mode"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Builds a composite dataset from states and observations.
///
/// With `sensors` (per step, per segment) the dataset is in torque mode and
/// the channel count comes from the sensor maps; otherwise it is force mode.
pub fn assemble_dataset(
    series: &SegmentStateSeries,
    observations: &[Vec<f64>],
    noise_variance: f64,
    sensors: Option<&[Vec<DMatrix<f64>>]>,
    options: ForwardOptions,
) -> Result<CompositeDataset> {
    let t = series.step_count();
    if observations.len() != t {
        return Err(RftError::DimensionMismatch(format!(
            "{} observations for {t} steps",
            observations.len()
        )));
    }
    if let Some(s) = sensors {
        if s.len() != t {
            return Err(RftError::DimensionMismatch(format!(
                "{} sensor steps for {t} steps",
                s.len()
            )));
        }
    }
    let (mode, channels) = match sensors {
        None => (ObservationMode::Force, 2),
        Some(s) => (
            ObservationMode::Torque,
            s.iter()
                .flat_map(|v| v.first())
                .map(|g| g.ncols())
                .next()
                .unwrap_or(2),
        ),
    };
    let steps = series
        .steps
        .iter()
        .enumerate()
        .map(|(i, states)| CompositeStep {
            observation: observations[i].clone(),
            angles: states.iter().map(|s| (s.beta, s.gamma)).collect(),
            weights: states.iter().map(|s| options.weight(s)).collect(),
            sensors: sensors.map(|s| s[i].clone()),
        })
        .collect();
    let ds = CompositeDataset {
        mode,
        channels,
        steps,
        noise_variance,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes the dataset as a segment table plus an observation table.
pub fn write_dataset_csv<W1: Write, W2: Write>(
    ds: &CompositeDataset,
    mut segments: W1,
    mut observations: W2,
) -> std::io::Result<()> {
    let mode = match ds.mode {
        ObservationMode::Force => "force",
        ObservationMode::Torque => "torque",
    };
    writeln!(segments, "# mode: {mode}")?;
    writeln!(segments, "# channels: {}", ds.channels)?;
    writeln!(segments, "# noise_variance: {:.16e}", ds.noise_variance)?;
    let mut header = String::from("step,segment,beta,gamma,weight_m3");
    if ds.mode == ObservationMode::Torque {
        for comp in ["z", "x"] {
            for c in 0..ds.channels {
                header.push_str(&format!(",g_{comp}{c}"));
            }
        }
    }
    writeln!(segments, "{header}")?;
    for (i, s) in ds.steps.iter().enumerate() {
        for (m, ((b, g), w)) in s.angles.iter().zip(&s.weights).enumerate() {
            write!(segments, "{i},{m},{b:.16e},{g:.16e},{w:.16e}")?;
            if let Some(maps) = &s.sensors {
                for comp in 0..2 {
                    for c in 0..ds.channels {
                        write!(segments, ",{:.16e}", maps[m][(comp, c)])?;
                    }
                }
            }
            writeln!(segments)?;
        }
    }
    let names: Vec<String> = match ds.mode {
        ObservationMode::Force => vec!["f_z_N".into(), "f_x_N".into()],
        ObservationMode::Torque => (1..=ds.channels).map(|c| format!("tau{c}_Nm")).collect(),
    };
    writeln!(observations, "step,{}", names.join(","))?;
    for (i, s) in ds.steps.iter().enumerate() {
        let vals: Vec<String> = s.observation.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(observations, "{i},{}", vals.join(","))?;
    }
    Ok(())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| RftError::Parse(format!("{s:?}: {e}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|e| RftError::Parse(format!("{s:?}: {e}")))
}

/// Reads what [`write_dataset_csv`] wrote.
pub fn read_dataset_csv<R1: BufRead, R2: BufRead>(
    segments: R1,
    observations: R2,
) -> Result<CompositeDataset> {
    let mut mode = ObservationMode::Force;
    let mut channels = 2usize;
    let mut noise_variance = 0.0;
    let mut steps: Vec<CompositeStep> = Vec::new();
    for line in segments.lines() {
        let line = line.map_err(|e| RftError::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with("step,") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# mode:") {
            mode = match rest.trim() {
                "force" => ObservationMode::Force,
                "torque" => ObservationMode::Torque,
                other => return Err(RftError::Parse(format!("unknown mode {other:?}"))),
            };
            continue;
        }
        if let Some(rest) = line.strip_prefix("# channels:") {
            channels = parse_usize(rest)?;
            continue;
        }
        if let Some(rest) = line.strip_prefix("# noise_variance:") {
            noise_variance = parse_f64(rest)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let need = 5 + if mode == ObservationMode::Torque {
            2 * channels
        } else {
            0
        };
        if cols.len() != need {
            return Err(RftError::Parse(format!(
                "expected {need} columns, got {}",
                cols.len()
            )));
        }
        let step = parse_usize(cols[0])?;
        if step == steps.len() {
            steps.push(CompositeStep {
                observation: Vec::new(),
                angles: Vec::new(),
                weights: Vec::new(),
                sensors: (mode == ObservationMode::Torque).then(Vec::new),
            });
        } else if step + 1 != steps.len() {
            return Err(RftError::Parse(format!("step {step} out of order")));
        }
        let s = steps.last_mut().unwrap();
        s.angles.push((parse_f64(cols[2])?, parse_f64(cols[3])?));
        s.weights.push(parse_f64(cols[4])?);
        if let Some(maps) = &mut s.sensors {
            let vals: Vec<f64> = cols[5..]
                .iter()
                .map(|c| parse_f64(c))
                .collect::<Result<_>>()?;
            maps.push(DMatrix::from_row_slice(2, channels, &vals));
        }
    }
    let mut seen = 0;
    for line in observations.lines() {
        let line = line.map_err(|e| RftError::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with("step,") || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let step = parse_usize(cols[0])?;
        let s = steps.get_mut(step).ok_or_else(|| {
            RftError::DimensionMismatch(format!("observation for unknown step {step}"))
        })?;
        s.observation = cols[1..]
            .iter()
            .map(|c| parse_f64(c))
            .collect::<Result<_>>()?;
        seen += 1;
    }
    if seen != steps.len() {
        return Err(RftError::DimensionMismatch(format!(
            "{seen} observation rows for {} steps",
            steps.len()
        )));
    }
    let ds = CompositeDataset {
        mode,
        channels,
        steps,
        noise_variance,
    };
    ds.validate()?;
    Ok(ds)
}

/// A force log with columns `t_s,f_x_N,f_z_N`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForceLog {
    pub t: Vec<f64>,
    pub f_x: Vec<f64>,
    pub f_z: Vec<f64>,
}

impl ForceLog {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let rows = read_numeric_rows(input, "t_s,f_x_N,f_z_N", 3)?;
        Ok(Self {
            t: rows.iter().map(|r| r[0]).collect(),
            f_x: rows.iter().map(|r| r[1]).collect(),
            f_z: rows.iter().map(|r| r[2]).collect(),
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_s,f_x_N,f_z_N")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                self.t[i], self.f_x[i], self.f_z[i]
            )?;
        }
        Ok(())
    }
}

/// A torque log with columns `t_s,tau1_Nm,tau2_Nm,phi1_rad,phi2_rad`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TorqueLog {
    pub t: Vec<f64>,
    pub tau: Vec<[f64; 2]>,
    pub phi: Vec<[f64; 2]>,
}

impl TorqueLog {
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let rows = read_numeric_rows(input, "t_s,tau1_Nm,tau2_Nm,phi1_rad,phi2_rad", 5)?;
        Ok(Self {
            t: rows.iter().map(|r| r[0]).collect(),
            tau: rows.iter().map(|r| [r[1], r[2]]).collect(),
            phi: rows.iter().map(|r| [r[3], r[4]]).collect(),
        })
    }

    /// Contact forces `J^{-T} tau` in the leg frame, as a force log (`f_z` up).
    pub fn to_force_log(&self, params: &crate::fivebar::FiveBarParams) -> Result<ForceLog> {
        let mut out = ForceLog::default();
        for i in 0..self.t.len() {
            let j = crate::fivebar::fivebar_jacobian(self.phi[i][0], self.phi[i][1], params)?;
            let f = crate::fivebar::torque_to_force(
                &j,
                &nalgebra::Vector2::new(self.tau[i][0], self.tau[i][1]),
            )?;
            out.t.push(self.t[i]);
            out.f_x.push(f[0]);
            out.f_z.push(-f[1]);
        }
        Ok(out)
    }
}

fn read_numeric_rows<R: BufRead>(input: R, header: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| RftError::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if n == 0
            && line
                .split(',')
                .next()
                .is_some_and(|c| c.trim().parse::<f64>().is_err())
        {
            if line.replace(' ', "") != header {
                return Err(RftError::Parse(format!(
                    "unexpected header {line:?}, expected {header:?}"
                )));
            }
            continue;
        }
        let row: Vec<f64> = line.split(',').map(parse_f64).collect::<Result<_>>()?;
        if row.len() != width {
            return Err(RftError::Parse(format!(
                "line {}: expected {width} columns",
                n + 1
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Index-aligned average of several equal-length series.
fn average_trials(trials: &[&[f64]]) -> Result<Vec<f64>> {
    let n = trials
        .first()
        .map(|t| t.len())
        .ok_or_else(|| RftError::Empty("no trials".into()))?;
    if trials.iter().any(|t| t.len() != n) {
        return Err(RftError::DimensionMismatch(
            "trials differ in length".into(),
        ));
    }
    Ok((0..n)
        .map(|i| trials.iter().map(|t| t[i]).sum::<f64>() / trials.len() as f64)
        .collect())
}

/// Centered moving average, truncating the window at the edges.
pub fn moving_average(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(RftError::InvalidSpec(format!(
            "moving-average window must be odd and >= 1, got {window}"
        )));
    }
    let half = window / 2;
    Ok((0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(x.len() - 1);
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}

/// Default moving-average window for force logs, in samples.
pub const DEFAULT_SMOOTHING_WINDOW: usize = 11;

/// Averages trials, subtracts the in-air baseline and smooths.
pub fn preprocess_force_log(
    raw: &[ForceLog],
    baseline: &[ForceLog],
    window: usize,
) -> Result<Vec<ForceSample>> {
    let avg = |logs: &[ForceLog], pick: fn(&ForceLog) -> &[f64]| {
        average_trials(&logs.iter().map(pick).collect::<Vec<_>>())
    };
    let rz = avg(raw, |l| &l.f_z)?;
    let rx = avg(raw, |l| &l.f_x)?;
    let bz = avg(baseline, |l| &l.f_z)?;
    let bx = avg(baseline, |l| &l.f_x)?;
    if rz.len() != bz.len() {
        return Err(RftError::DimensionMismatch(format!(
            "raw log has {} samples, baseline {}",
            rz.len(),
            bz.len()
        )));
    }
    let dz: Vec<f64> = rz.iter().zip(&bz).map(|(a, b)| a - b).collect();
    let dx: Vec<f64> = rx.iter().zip(&bx).map(|(a, b)| a - b).collect();
    let fz = moving_average(&dz, window)?;
    let fx = moving_average(&dx, window)?;
    Ok(fz
        .into_iter()
        .zip(fx)
        .enumerate()
        .map(|(i, (f_z, f_x))| ForceSample {
            f_z,
            f_x,
            step_index: i,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state(depth: f64, area: f64) -> SegmentState {
        SegmentState {
            beta: 0.1,
            gamma: 0.2,
            depth,
            area,
            submerged: depth > 0.0,
            moving: true,
            leading: true,
        }
    }

    #[test]
    fn emerged_segments_give_zero_force() {
        let states = vec![state(0.0, 1e-3); 4];
        let f = forward_force(
            &states,
            &|_: f64, _: f64| (1e6, 2e6),
            ForwardOptions::default(),
            0,
        );
        assert_eq!((f.f_z, f.f_x), (0.0, 0.0));
    }

    #[test]
    fn single_segment_force() {
        let f = forward_force(
            &[state(0.01, 0.001)],
            &|_: f64, _: f64| (1e6, 0.0),
            ForwardOptions::default(),
            3,
        );
        assert_relative_eq!(f.f_z, 10.0, max_relative = 1e-14);
        assert_eq!(f.step_index, 3);
    }

    #[test]
    fn leading_edge_filter() {
        let mut s = state(0.01, 0.001);
        s.leading = false;
        let field = |_: f64, _: f64| (1e6, 1e6);
        let all = forward_force(&[s], &field, ForwardOptions::default(), 0);
        let lead = forward_force(
            &[s],
            &field,
            ForwardOptions {
                leading_edge_only: true,
            },
            0,
        );
        assert!(all.f_z > 0.0);
        assert_eq!(lead.f_z, 0.0);
    }

    #[test]
    fn zero_noise_is_identity() {
        let f = ForceSample {
            f_z: 3.0,
            f_x: -2.0,
            step_index: 7,
        };
        assert_eq!(inject_noise(f, 0.0, 42).unwrap(), f);
        let z = ForceSample {
            f_z: 0.0,
            f_x: 0.0,
            step_index: 1,
        };
        assert_eq!(inject_noise(z, 0.2, 42).unwrap(), z);
        assert!(inject_noise(f, -0.1, 1).is_err());
    }

    #[test]
    fn noise_moments() {
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|i| {
                inject_noise(
                    ForceSample {
                        f_z: 1.0,
                        f_x: 1.0,
                        step_index: i,
                    },
                    0.05,
                    9,
                )
                .unwrap()
                .f_z
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!((var - 0.05).abs() < 0.005, "var {var}");
    }

    #[test]
    fn noise_keyed_by_step() {
        let a = inject_noise(
            ForceSample {
                f_z: 1.0,
                f_x: 1.0,
                step_index: 5,
            },
            0.1,
            3,
        )
        .unwrap();
        let b = inject_noise(
            ForceSample {
                f_z: 1.0,
                f_x: 1.0,
                step_index: 5,
            },
            0.1,
            3,
        )
        .unwrap();
        let c = inject_noise(
            ForceSample {
                f_z: 1.0,
                f_x: 1.0,
                step_index: 6,
            },
            0.1,
            3,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_ne!(a.f_z, c.f_z);
        assert_ne!(a.f_z, a.f_x);
    }

    #[test]
    fn moving_average_edges() {
        let x = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let y = moving_average(&x, 3).unwrap();
        assert_relative_eq!(y[0], 0.0);
        assert_relative_eq!(y[2], 1.0 / 3.0);
        assert_relative_eq!(y[5], 1.0);
        assert_eq!(moving_average(&x, 1).unwrap(), x.to_vec());
        assert!(moving_average(&x, 4).is_err());
    }

    #[test]
    fn baseline_equal_to_raw_is_zero() {
        let log = ForceLog {
            t: vec![0.0, 1.0, 2.0],
            f_x: vec![1.0, 2.0, 3.0],
            f_z: vec![-1.0, 5.0, 0.5],
        };
        let out = preprocess_force_log(std::slice::from_ref(&log), std::slice::from_ref(&log), 3)
            .unwrap();
        assert!(out.iter().all(|f| f.f_z == 0.0 && f.f_x == 0.0));
        let short = ForceLog {
            t: vec![0.0],
            f_x: vec![0.0],
            f_z: vec![0.0],
        };
        assert!(preprocess_force_log(&[log], &[short], 1).is_err());
    }

    #[test]
    fn trial_averaging() {
        let a = ForceLog {
            t: vec![0.0, 1.0],
            f_x: vec![1.0, 1.0],
            f_z: vec![2.0, 2.0],
        };
        let b = ForceLog {
            t: vec![0.0, 1.0],
            f_x: vec![3.0, 3.0],
            f_z: vec![4.0, 6.0],
        };
        let air = ForceLog {
            t: vec![0.0, 1.0],
            f_x: vec![0.0, 0.0],
            f_z: vec![1.0, 1.0],
        };
        let out = preprocess_force_log(&[a, b], &[air], 1).unwrap();
        assert_relative_eq!(out[0].f_x, 2.0);
        assert_relative_eq!(out[1].f_z, 3.0);
    }

    #[test]
    fn force_log_csv() {
        let text = "t_s,f_x_N,f_z_N\n0.0,1.5,-2\n0.1,2,3\n";
        let log = ForceLog::read_csv(text.as_bytes()).unwrap();
        assert_eq!(log.f_z, vec![-2.0, 3.0]);
        assert!(ForceLog::read_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        assert_eq!(ForceLog::read_csv(&buf[..]).unwrap(), log);
    }

    #[test]
    fn torque_log_conversion() {
        let params = crate::fivebar::FiveBarParams::default();
        let j = crate::fivebar::fivebar_jacobian(-0.6, 0.4, &params).unwrap();
        let f = nalgebra::Vector2::new(1.0, -2.0);
        let tau = crate::fivebar::force_to_torque(&j, &f);
        let text = format!(
            "t_s,tau1_Nm,tau2_Nm,phi1_rad,phi2_rad\n0,{},{},-0.6,0.4\n",
            tau[0], tau[1]
        );
        let log = TorqueLog::read_csv(text.as_bytes()).unwrap();
        let forces = log.to_force_log(&params).unwrap();
        assert_relative_eq!(forces.f_x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(forces.f_z[0], 2.0, epsilon = 1e-12);
    }
}
