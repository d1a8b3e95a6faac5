//! Reconstruction metrics and sampling diagnostics.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RftError};
use crate::forward::CompositeDataset;
use crate::geometry::normalize_beta;
use crate::stress_field::{Component, GridAxes, GridStressMap};

/// Uniqueness quantum for the redundancy ratio, 1 degree.
pub const DEFAULT_ANGLE_QUANTUM: f64 = PI / 180.0;
/// Coverage bin size, 5 degrees.
pub const DEFAULT_BIN_SIZE: f64 = PI / 36.0;
/// Radius of the sampled-region mask around each active sample, 10 degrees.
pub const DEFAULT_MASK_RADIUS: f64 = PI / 18.0;
/// Accurate-coverage tolerance as a fraction of the truth range.
pub const ACR_TOLERANCE: f64 = 0.05;

/// Metrics of one component. Range-normalized quantities are `None` when the
/// truth range is zero; `r2` and `pearson` are `None` for zero variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentMetrics {
    pub nodes: usize,
    pub rmse: f64,
    pub mae: f64,
    pub rmse_pct: Option<f64>,
    pub mae_pct: Option<f64>,
    pub r2: Option<f64>,
    pub pearson: Option<f64>,
    pub acr_pct: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub z: ComponentMetrics,
    pub x: ComponentMetrics,
}

impl MetricsReport {
    pub fn component(&self, c: Component) -> &ComponentMetrics {
        match c {
            Component::Z => &self.z,
            Component::X => &self.x,
        }
    }

    /// Flat `key=value` records, `undefined` for missing values.
    pub fn key_values(&self, prefix: &str) -> Vec<(String, String)> {
        let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.17e}"));
        let mut out = Vec::new();
        for c in Component::BOTH {
            let m = self.component(c);
            let p = format!("{prefix}{}.", c.name());
            out.push((format!("{p}nodes"), m.nodes.to_string()));
            out.push((format!("{p}rmse"), format!("{:.17e}", m.rmse)));
            out.push((format!("{p}mae"), format!("{:.17e}", m.mae)));
            out.push((format!("{p}rmse_pct"), opt(m.rmse_pct)));
            out.push((format!("{p}mae_pct"), opt(m.mae_pct)));
            out.push((format!("{p}r2"), opt(m.r2)));
            out.push((format!("{p}pearson"), opt(m.pearson)));
            out.push((format!("{p}acr_pct"), opt(m.acr_pct)));
        }
        out
    }
}

/// Table rows in the order RMSE, MAE, R2, Pearson, ACR%.
pub fn format_metrics_table(rows: &[(String, MetricsReport)]) -> String {
    let opt = |v: Option<f64>, w: usize| v.map_or(format!("{:>w$}", "-"), |v| format!("{v:>w$.4}"));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>4} {:>12} {:>12} {:>8} {:>8} {:>8}",
        "config", "axis", "RMSE", "MAE", "R2", "Pearson", "ACR%"
    );
    for (name, r) in rows {
        for c in Component::BOTH {
            let m = r.component(c);
            let _ = writeln!(
                s,
                "{:<24} {:>4} {:>12.4e} {:>12.4e} {} {} {}",
                name,
                c.name(),
                m.rmse,
                m.mae,
                opt(m.r2, 8),
                opt(m.pearson, 8),
                opt(m.acr_pct, 8)
            );
        }
    }
    s
}

fn component_metrics(est: &[f64], truth: &[f64], range: f64) -> ComponentMetrics {
    let n = est.len();
    if n == 0 {
        return ComponentMetrics {
            nodes: 0,
            rmse: 0.0,
            mae: 0.0,
            rmse_pct: None,
            mae_pct: None,
            r2: None,
            pearson: None,
            acr_pct: None,
        };
    }
    let nf = n as f64;
    let err: Vec<f64> = est.iter().zip(truth).map(|(e, t)| e - t).collect();
    let rmse = (err.iter().map(|e| e * e).sum::<f64>() / nf).sqrt();
    let mae = err.iter().map(|e| e.abs()).sum::<f64>() / nf;
    let mt = truth.iter().sum::<f64>() / nf;
    let me = est.iter().sum::<f64>() / nf;
    let ss_res: f64 = err.iter().map(|e| e * e).sum();
    let ss_tot: f64 = truth.iter().map(|t| (t - mt).powi(2)).sum();
    let ss_est: f64 = est.iter().map(|e| (e - me).powi(2)).sum();
    let cov: f64 = est
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - me) * (t - mt))
        .sum();
    let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    let pearson = (ss_tot > 0.0 && ss_est > 0.0)
        .then(|| (cov / (ss_tot.sqrt() * ss_est.sqrt())).clamp(-1.0, 1.0));
    let norm = (range > 0.0).then_some(range);
    let acr_pct = norm.map(|r| {
        let hits = err.iter().filter(|e| e.abs() <= ACR_TOLERANCE * r).count();
        100.0 * hits as f64 / nf
    });
    ComponentMetrics {
        nodes: n,
        rmse,
        mae,
        rmse_pct: norm.map(|r| 100.0 * rmse / r),
        mae_pct: norm.map(|r| 100.0 * mae / r),
        r2,
        pearson,
        acr_pct,
    }
}

/// Compares two grids on shared axes, optionally over a node mask
/// (row-major, beta rows). Normalization uses the full-grid truth range.
pub fn reconstruction_metrics(
    estimate: &GridStressMap,
    truth: &GridStressMap,
    mask: Option<&[bool]>,
) -> Result<MetricsReport> {
    if estimate.beta_axis() != truth.beta_axis() || estimate.gamma_axis() != truth.gamma_axis() {
        return Err(RftError::DimensionMismatch(
            "grids do not share axes".into(),
        ));
    }
    let ng = truth.gamma_axis().len();
    let nodes = truth.beta_axis().len() * ng;
    if let Some(m) = mask {
        if m.len() != nodes {
            return Err(RftError::DimensionMismatch(format!(
                "mask has {} entries for {nodes} nodes",
                m.len()
            )));
        }
    }
    let pick = |c: Component| {
        let (e, t) = (estimate.values(c), truth.values(c));
        let (mut ev, mut tv) = (Vec::new(), Vec::new());
        for k in 0..nodes {
            if mask.is_none_or(|m| m[k]) {
                let (i, j) = (k / ng, k % ng);
                ev.push(e[(i, j)]);
                tv.push(t[(i, j)]);
            }
        }
        let range = t.max() - t.min();
        component_metrics(&ev, &tv, range)
    };
    Ok(MetricsReport {
        z: pick(Component::Z),
        x: pick(Component::X),
    })
}

/// Wrapped distance between two angle pairs, beta taken modulo pi.
fn angle_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let db = normalize_beta(a.0 - b.0);
    (db * db + (a.1 - b.1).powi(2)).sqrt()
}

/// Grid nodes within `radius` of at least one active sample.
///
/// Samples are deduplicated on a 1 degree lattice first; the radius is
/// widened by the lattice half-diagonal so no covered node is dropped.
pub fn sampled_region_mask(axes: &GridAxes, ds: &CompositeDataset, radius: f64) -> Vec<bool> {
    let q = DEFAULT_ANGLE_QUANTUM;
    let samples: Vec<(f64, f64)> = quantized_unique(&ds.active_angles(), q)
        .into_iter()
        .map(|(qb, qg)| (qb as f64 * q, qg as f64 * q))
        .collect();
    let r = radius + q * std::f64::consts::FRAC_1_SQRT_2;
    axes.nodes()
        .into_iter()
        .map(|n| samples.iter().any(|s| angle_distance(n, *s) <= r))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingDiagnostics {
    pub total_samples: usize,
    pub unique_samples: usize,
    /// `1 - N_unique / N_total`, 0 for no samples.
    pub redundancy: f64,
    pub coverage_bins: usize,
    pub total_bins: usize,
    /// `coverage_bins * bin_size^2`, rad^2.
    pub coverage_area: f64,
    /// Samples with `gamma > pi/3`.
    pub sign_region_hits: usize,
}

impl SamplingDiagnostics {
    pub fn key_values(&self, prefix: &str) -> Vec<(String, String)> {
        vec![
            (
                format!("{prefix}total_samples"),
                self.total_samples.to_string(),
            ),
            (
                format!("{prefix}unique_samples"),
                self.unique_samples.to_string(),
            ),
            (
                format!("{prefix}redundancy"),
                format!("{:.17e}", self.redundancy),
            ),
            (
                format!("{prefix}coverage_bins"),
                self.coverage_bins.to_string(),
            ),
            (format!("{prefix}total_bins"), self.total_bins.to_string()),
            (
                format!("{prefix}coverage_area"),
                format!("{:.17e}", self.coverage_area),
            ),
            (
                format!("{prefix}sign_region_hits"),
                self.sign_region_hits.to_string(),
            ),
        ]
    }
}

fn quantized_unique(samples: &[(f64, f64)], quantum: f64) -> BTreeSet<(i64, i64)> {
    samples
        .iter()
        .map(|&(b, g)| {
            (
                (normalize_beta(b) / quantum).round() as i64,
                (g / quantum).round() as i64,
            )
        })
        .collect()
}

/// Redundancy over quantized samples and coverage over uniform bins.
pub fn sampling_diagnostics(
    ds: &CompositeDataset,
    angle_quantum: f64,
    bin_size: f64,
) -> Result<SamplingDiagnostics> {
    if !(angle_quantum > 0.0 && bin_size > 0.0) {
        return Err(RftError::InvalidSpec(
            "angle quantum and bin size must be positive".into(),
        ));
    }
    let samples = ds.active_angles();
    let unique = quantized_unique(&samples, angle_quantum).len();
    let per_axis = (PI / bin_size - 1e-9).ceil().max(1.0) as usize;
    let bin = |v: f64| (((v + FRAC_PI_2) / bin_size).floor().max(0.0) as usize).min(per_axis - 1);
    let bins: BTreeSet<(usize, usize)> = samples
        .iter()
        .map(|&(b, g)| (bin(normalize_beta(b)), bin(g)))
        .collect();
    let total = samples.len();
    Ok(SamplingDiagnostics {
        total_samples: total,
        unique_samples: unique,
        redundancy: if total == 0 {
            0.0
        } else {
            1.0 - unique as f64 / total as f64
        },
        coverage_bins: bins.len(),
        total_bins: per_axis * per_axis,
        coverage_area: bins.len() as f64 * bin_size * bin_size,
        sign_region_hits: samples.iter().filter(|(_, g)| *g > FRAC_PI_3).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{CompositeStep, ObservationMode};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn grid(z: DMatrix<f64>) -> GridStressMap {
        let axes = GridAxes::uniform(z.nrows(), z.ncols());
        GridStressMap::new(axes.beta, axes.gamma, z.clone(), -z).unwrap()
    }

    fn dataset(angles: Vec<(f64, f64)>) -> CompositeDataset {
        CompositeDataset {
            mode: ObservationMode::Force,
            channels: 2,
            steps: vec![CompositeStep {
                observation: vec![0.0, 0.0],
                weights: vec![1.0; angles.len()],
                angles,
                sensors: None,
            }],
            noise_variance: 0.0,
        }
    }

    #[test]
    fn perfect_reconstruction() {
        let t = grid(DMatrix::from_fn(6, 5, |i, j| {
            (i * j) as f64 + 0.5 * i as f64
        }));
        let r = reconstruction_metrics(&t, &t, None).unwrap();
        for m in [r.z, r.x] {
            assert_eq!(m.rmse, 0.0);
            assert_eq!(m.mae, 0.0);
            assert_eq!(m.acr_pct, Some(100.0));
            assert_eq!(m.r2, Some(1.0));
            assert_relative_eq!(m.pearson.unwrap(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn anti_correlated() {
        let v = DMatrix::from_fn(4, 4, |i, j| (i as f64).sin() + j as f64);
        let r = reconstruction_metrics(&grid(-v.clone()), &grid(v), None).unwrap();
        assert_relative_eq!(r.z.pearson.unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_truth_is_undefined() {
        let t = grid(DMatrix::from_element(3, 3, 2.0));
        let e = grid(DMatrix::from_element(3, 3, 2.5));
        let r = reconstruction_metrics(&e, &t, None).unwrap();
        assert_eq!(r.z.acr_pct, None);
        assert_eq!(r.z.r2, None);
        assert_relative_eq!(r.z.rmse, 0.5);
        assert!(r
            .key_values("m.")
            .iter()
            .any(|(k, v)| k == "m.z.r2" && v == "undefined"));
    }

    #[test]
    fn mask_and_axis_checks() {
        let t = grid(DMatrix::from_fn(3, 3, |i, j| (i + 2 * j) as f64));
        let e = grid(DMatrix::from_fn(4, 3, |i, j| (i + 2 * j) as f64));
        assert!(reconstruction_metrics(&e, &t, None).is_err());
        assert!(reconstruction_metrics(&t, &t, Some(&[true; 4])).is_err());
        let mut mask = [false; 9];
        mask[4] = true;
        assert_eq!(
            reconstruction_metrics(&t, &t, Some(&mask)).unwrap().z.nodes,
            1
        );
    }

    #[test]
    fn identical_samples_redundancy() {
        let d = sampling_diagnostics(
            &dataset(vec![(0.2, 0.3); 8]),
            DEFAULT_ANGLE_QUANTUM,
            DEFAULT_BIN_SIZE,
        )
        .unwrap();
        assert_relative_eq!(d.redundancy, 1.0 - 1.0 / 8.0);
        assert_eq!(d.coverage_bins, 1);
        assert_eq!(d.total_bins, 36 * 36);
    }

    #[test]
    fn distinct_bins() {
        let pts: Vec<(f64, f64)> = (0..6)
            .map(|k| (-1.4 + 0.4 * k as f64, 0.1 * k as f64 - 1.0))
            .collect();
        let d =
            sampling_diagnostics(&dataset(pts), DEFAULT_ANGLE_QUANTUM, DEFAULT_BIN_SIZE).unwrap();
        assert_eq!(d.redundancy, 0.0);
        assert_eq!(d.coverage_bins, 6);
        assert_relative_eq!(d.coverage_area, 6.0 * DEFAULT_BIN_SIZE * DEFAULT_BIN_SIZE);
    }

    #[test]
    fn sign_region_and_mask() {
        let ds = dataset(vec![(0.0, 1.2), (0.0, 0.0)]);
        let d = sampling_diagnostics(&ds, DEFAULT_ANGLE_QUANTUM, DEFAULT_BIN_SIZE).unwrap();
        assert_eq!(d.sign_region_hits, 1);
        let axes = GridAxes::default();
        let mask = sampled_region_mask(&axes, &ds, DEFAULT_MASK_RADIUS);
        let ng = axes.gamma.len();
        // beta = 0 is row 18, gamma = 0 is column 18
        assert!(mask[18 * ng + 18]);
        assert!(!mask[0]);
    }
}
