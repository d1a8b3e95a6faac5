//! Stress-per-depth maps `alpha_z(beta, gamma)` and `alpha_x(beta, gamma)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, RftError};
use crate::geometry::normalize_beta;
use crate::inverse::kernel::KernelConfig;
use crate::linalg::jittered_cholesky;
use crate::par::{self, Exec};

/// Anything that can be queried for `(alpha_z, alpha_x)` at `(beta, gamma)`.
pub trait StressField {
    fn eval(&self, beta: f64, gamma: f64) -> (f64, f64);
}

impl<F> StressField for F
where
    F: Fn(f64, f64) -> (f64, f64),
{
    fn eval(&self, beta: f64, gamma: f64) -> (f64, f64) {
        self(beta, gamma)
    }
}

/// Uniform axis of `n` nodes over `[-pi/2, pi/2]`.
pub fn uniform_axis(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -FRAC_PI_2 + PI * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Node axes of a reconstruction grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxes {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl GridAxes {
    pub fn uniform(n_beta: usize, n_gamma: usize) -> Self {
        Self {
            beta: uniform_axis(n_beta),
            gamma: uniform_axis(n_gamma),
        }
    }

    pub fn len(&self) -> usize {
        self.beta.len() * self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes in row-major order (beta as rows).
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        self.beta
            .iter()
            .flat_map(|&b| self.gamma.iter().map(move |&g| (b, g)))
            .collect()
    }
}

impl Default for GridAxes {
    /// 37 x 37 nodes, 5 degree spacing.
    fn default() -> Self {
        Self::uniform(37, 37)
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(RftError::Empty(format!("{name} axis")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(RftError::NonFinite(format!("{name} axis")));
    }
    if axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(RftError::InvalidSpec(format!(
            "{name} axis must be strictly increasing"
        )));
    }
    Ok(())
}

/// Bilinear-interpolated stress map on a `(beta, gamma)` grid.
///
/// Values are stored with beta as rows. Beta is wrapped modulo pi on lookup;
/// gamma outside the axis is clamped and counted.
#[derive(Debug)]
pub struct GridStressMap {
    beta_axis: Vec<f64>,
    gamma_axis: Vec<f64>,
    values_z: DMatrix<f64>,
    values_x: DMatrix<f64>,
    clamped: AtomicUsize,
}

impl Clone for GridStressMap {
    fn clone(&self) -> Self {
        Self {
            beta_axis: self.beta_axis.clone(),
            gamma_axis: self.gamma_axis.clone(),
            values_z: self.values_z.clone(),
            values_x: self.values_x.clone(),
            clamped: AtomicUsize::new(0),
        }
    }
}

impl PartialEq for GridStressMap {
    fn eq(&self, other: &Self) -> bool {
        self.beta_axis == other.beta_axis
            && self.gamma_axis == other.gamma_axis
            && self.values_z == other.values_z
            && self.values_x == other.values_x
    }
}

/// Cell index and fractional offset of `v` on `axis`, clamping outside.
fn locate(axis: &[f64], v: f64) -> (usize, f64, bool) {
    let n = axis.len();
    if n == 1 {
        return (0, 0.0, v != axis[0]);
    }
    if v <= axis[0] {
        return (0, 0.0, v < axis[0]);
    }
    if v >= axis[n - 1] {
        return (n - 2, 1.0, v > axis[n - 1]);
    }
    let i = axis.partition_point(|&a| a <= v) - 1;
    let i = i.min(n - 2);
    let f = (v - axis[i]) / (axis[i + 1] - axis[i]);
    (i, f, false)
}

impl GridStressMap {
    pub fn new(
        beta_axis: Vec<f64>,
        gamma_axis: Vec<f64>,
        values_z: DMatrix<f64>,
        values_x: DMatrix<f64>,
    ) -> Result<Self> {
        check_axis("beta", &beta_axis)?;
        check_axis("gamma", &gamma_axis)?;
        let shape = (beta_axis.len(), gamma_axis.len());
        for (name, v) in [("values_z", &values_z), ("values_x", &values_x)] {
            if v.shape() != shape {
                return Err(RftError::DimensionMismatch(format!(
                    "{name} is {:?}, axes need {:?}",
                    v.shape(),
                    shape
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(RftError::NonFinite(name.into()));
            }
        }
        Ok(Self {
            beta_axis,
            gamma_axis,
            values_z,
            values_x,
            clamped: AtomicUsize::new(0),
        })
    }

    /// Tabulates `field` on `axes`.
    pub fn from_field(axes: &GridAxes, field: &(impl StressField + Sync)) -> Result<Self> {
        let (nb, ng) = (axes.beta.len(), axes.gamma.len());
        let mut z = DMatrix::zeros(nb, ng);
        let mut x = DMatrix::zeros(nb, ng);
        for (i, &b) in axes.beta.iter().enumerate() {
            for (j, &g) in axes.gamma.iter().enumerate() {
                let (vz, vx) = field.eval(b, g);
                z[(i, j)] = vz;
                x[(i, j)] = vx;
            }
        }
        Self::new(axes.beta.clone(), axes.gamma.clone(), z, x)
    }

    pub fn constant(axes: &GridAxes, z: f64, x: f64) -> Result<Self> {
        let (nb, ng) = (axes.beta.len(), axes.gamma.len());
        Self::new(
            axes.beta.clone(),
            axes.gamma.clone(),
            DMatrix::from_element(nb, ng, z),
            DMatrix::from_element(nb, ng, x),
        )
    }

    pub fn beta_axis(&self) -> &[f64] {
        &self.beta_axis
    }

    pub fn gamma_axis(&self) -> &[f64] {
        &self.gamma_axis
    }

    pub fn axes(&self) -> GridAxes {
        GridAxes {
            beta: self.beta_axis.clone(),
            gamma: self.gamma_axis.clone(),
        }
    }

    pub fn values_z(&self) -> &DMatrix<f64> {
        &self.values_z
    }

    pub fn values_x(&self) -> &DMatrix<f64> {
        &self.values_x
    }

    pub fn values(&self, component: Component) -> &DMatrix<f64> {
        match component {
            Component::Z => &self.values_z,
            Component::X => &self.values_x,
        }
    }

    /// How many lookups had gamma clamped into the axis range.
    pub fn clamp_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Bilinear lookup; the flag reports whether gamma was clamped.
    pub fn eval_checked(&self, beta: f64, gamma: f64) -> (f64, f64, bool) {
        let b = normalize_beta(beta);
        let (i, fb, _) = locate(&self.beta_axis, b);
        let (j, fg, clamped) = locate(&self.gamma_axis, gamma);
        if clamped {
            self.clamped.fetch_add(1, Ordering::Relaxed);
        }
        let interp = |m: &DMatrix<f64>| {
            let (nb, ng) = m.shape();
            let i1 = (i + 1).min(nb - 1);
            let j1 = (j + 1).min(ng - 1);
            let v00 = m[(i, j)];
            let v01 = m[(i, j1)];
            let v10 = m[(i1, j)];
            let v11 = m[(i1, j1)];
            (1.0 - fb) * ((1.0 - fg) * v00 + fg * v01) + fb * ((1.0 - fg) * v10 + fg * v11)
        };
        (interp(&self.values_z), interp(&self.values_x), clamped)
    }

    /// Componentwise scaling of the stored values.
    pub fn scaled(&self, zeta_z: f64, zeta_x: f64) -> Self {
        Self {
            beta_axis: self.beta_axis.clone(),
            gamma_axis: self.gamma_axis.clone(),
            values_z: &self.values_z * zeta_z,
            values_x: &self.values_x * zeta_x,
            clamped: AtomicUsize::new(0),
        }
    }

    /// `a * self + b * other` on a shared grid.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.beta_axis != other.beta_axis || self.gamma_axis != other.gamma_axis {
            return Err(RftError::DimensionMismatch(
                "maps have different axes".into(),
            ));
        }
        Self::new(
            self.beta_axis.clone(),
            self.gamma_axis.clone(),
            &self.values_z * a + &other.values_z * b,
            &self.values_x * a + &other.values_x * b,
        )
    }

    /// Writes the map in the two-block CSV layout.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.16e}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(out, "# beta_axis: {}", join(&self.beta_axis))?;
        writeln!(out, "# gamma_axis: {}", join(&self.gamma_axis))?;
        for (label, m) in [("values_z", &self.values_z), ("values_x", &self.values_x)] {
            writeln!(out, "# {label}")?;
            for i in 0..m.nrows() {
                let row: Vec<f64> = m.row(i).iter().copied().collect();
                writeln!(out, "{}", join(&row))?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let parse_row = |line: &str| -> Result<Vec<f64>> {
            line.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| RftError::Parse(format!("{s:?}: {e}")))
                })
                .collect()
        };
        let mut beta = None;
        let mut gamma = None;
        let mut blocks: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        let mut current: Option<usize> = None;
        for line in input.lines() {
            let line = line.map_err(|e| RftError::Parse(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# beta_axis:") {
                beta = Some(parse_row(rest)?);
            } else if let Some(rest) = line.strip_prefix("# gamma_axis:") {
                gamma = Some(parse_row(rest)?);
            } else if line == "# values_z" {
                current = Some(0);
            } else if line == "# values_x" {
                current = Some(1);
            } else if line.starts_with('#') {
                continue;
            } else {
                let block = current
                    .ok_or_else(|| RftError::Parse("data row before a values block".into()))?;
                blocks[block].push(parse_row(line)?);
            }
        }
        let beta = beta.ok_or_else(|| RftError::Parse("missing beta_axis".into()))?;
        let gamma = gamma.ok_or_else(|| RftError::Parse("missing gamma_axis".into()))?;
        let to_matrix = |rows: &[Vec<f64>], name: &str| -> Result<DMatrix<f64>> {
            if rows.len() != beta.len() || rows.iter().any(|r| r.len() != gamma.len()) {
                return Err(RftError::DimensionMismatch(format!(
                    "{name} block does not match axes"
                )));
            }
            Ok(DMatrix::from_fn(beta.len(), gamma.len(), |i, j| rows[i][j]))
        };
        let z = to_matrix(&blocks[0], "values_z")?;
        let x = to_matrix(&blocks[1], "values_x")?;
        Self::new(beta, gamma, z, x)
    }
}

impl StressField for GridStressMap {
    fn eval(&self, beta: f64, gamma: f64) -> (f64, f64) {
        let (z, x, _) = self.eval_checked(beta, gamma);
        (z, x)
    }
}

/// Which stress component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Z,
    X,
}

impl Component {
    pub const BOTH: [Component; 2] = [Component::Z, Component::X];

    pub fn index(self) -> usize {
        match self {
            Component::Z => 0,
            Component::X => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Z => "z",
            Component::X => "x",
        }
    }
}

/// `alpha = zeta * base`, optionally plus a residual field.
#[derive(Debug, Clone)]
pub struct ScaledBaseMap<R = fn(f64, f64) -> (f64, f64)> {
    pub base: GridStressMap,
    pub zeta_z: f64,
    pub zeta_x: f64,
    pub residual: Option<R>,
}

impl ScaledBaseMap {
    pub fn new(base: GridStressMap, zeta_z: f64, zeta_x: f64) -> Self {
        Self {
            base,
            zeta_z,
            zeta_x,
            residual: None,
        }
    }
}

impl<R: StressField> StressField for ScaledBaseMap<R> {
    fn eval(&self, beta: f64, gamma: f64) -> (f64, f64) {
        let (bz, bx) = self.base.eval(beta, gamma);
        let (rz, rx) = self
            .residual
            .as_ref()
            .map_or((0.0, 0.0), |r| r.eval(beta, gamma));
        (self.zeta_z * bz + rz, self.zeta_x * bx + rx)
    }
}

/// Returns `base` with `values_z *= zeta_z` and `values_x *= zeta_x`.
pub fn scale_map(base: &GridStressMap, zeta_z: f64, zeta_x: f64) -> GridStressMap {
    base.scaled(zeta_z, zeta_x)
}

pub fn eval_map(map: &GridStressMap, beta: f64, gamma: f64) -> (f64, f64) {
    map.eval(beta, gamma)
}

/// Largest grid for which a dense prior draw is allowed.
pub const MAX_PRIOR_GRID: usize = 64;

fn prior_draw(
    kernel: &KernelConfig,
    nodes: &[(f64, f64)],
    rng: &mut ChaCha8Rng,
    exec: Exec,
) -> Result<DVector<f64>> {
    let n = nodes.len();
    let z: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    if kernel.signal_variance == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let feats: Vec<[f64; 4]> = nodes
        .iter()
        .map(|&(b, g)| crate::inverse::embed(b, g))
        .collect();
    let mut data = vec![0.0; n * n];
    par::fill_rows(exec, &mut data, n, |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = kernel.eval_features(&feats[i], &feats[j]);
        }
    });
    let k = DMatrix::from_row_slice(n, n, &data);
    let (chol, _) = jittered_cholesky(k)?;
    Ok(chol.l() * z)
}

/// One joint draw of `(alpha_z, alpha_x)` from the zero-mean GP prior,
/// deterministic per seed.
pub fn sample_prior_map(
    kernel_z: &KernelConfig,
    kernel_x: &KernelConfig,
    seed: u64,
    axes: &GridAxes,
) -> Result<GridStressMap> {
    if axes.beta.len() > MAX_PRIOR_GRID || axes.gamma.len() > MAX_PRIOR_GRID {
        return Err(RftError::InvalidSpec(format!(
            "prior draws are limited to {MAX_PRIOR_GRID}x{MAX_PRIOR_GRID} grids"
        )));
    }
    for k in [kernel_z, kernel_x] {
        if !(k.signal_variance >= 0.0) || k.lengthscales.iter().any(|l| !(*l > 0.0)) {
            return Err(RftError::InvalidSpec(format!("invalid prior kernel {k:?}")));
        }
    }
    check_axis("beta", &axes.beta)?;
    check_axis("gamma", &axes.gamma)?;
    let nodes = axes.nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exec = Exec::default();
    let dz = prior_draw(kernel_z, &nodes, &mut rng, exec)?;
    let dx = prior_draw(kernel_x, &nodes, &mut rng, exec)?;
    let (nb, ng) = (axes.beta.len(), axes.gamma.len());
    GridStressMap::new(
        axes.beta.clone(),
        axes.gamma.clone(),
        DMatrix::from_fn(nb, ng, |i, j| dz[i * ng + j]),
        DMatrix::from_fn(nb, ng, |i, j| dx[i * ng + j]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_map(seed: u64, nb: usize, ng: usize) -> GridStressMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridStressMap::new(
            uniform_axis(nb),
            uniform_axis(ng),
            DMatrix::from_fn(nb, ng, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(nb, ng, |_, _| rng.random_range(-1.0..1.0)),
        )
        .unwrap()
    }

    #[test]
    fn constant_map_is_constant() {
        let m = GridStressMap::constant(&GridAxes::uniform(5, 7), 3.5, -1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (z, x) = m.eval(rng.random_range(-5.0..5.0), rng.random_range(-1.5..1.5));
            assert_relative_eq!(z, 3.5, max_relative = 1e-14);
            assert_relative_eq!(x, -1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn beta_periodicity() {
        let m = random_map(3, 9, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let b = rng.random_range(-1.5..1.5);
            let g = rng.random_range(-1.5..1.5);
            let (z0, x0) = m.eval(b, g);
            let (z1, x1) = m.eval(b + PI, g);
            assert!((z0 - z1).abs() < 1e-9 && (x0 - x1).abs() < 1e-9);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn bilinear_nodes_and_centers() {
        let m = random_map(4, 6, 8);
        let (b, g) = (m.beta_axis().to_vec(), m.gamma_axis().to_vec());
        // skip the last beta row: pi/2 wraps onto -pi/2
        for i in 0..b.len() - 1 {
            for j in 0..g.len() {
                let (z, _) = m.eval(b[i], g[j]);
                assert_eq!(z, m.values_z()[(i, j)]);
            }
        }
        for i in 0..b.len() - 1 {
            for j in 0..g.len() - 1 {
                let bc = 0.5 * (b[i] + b[i + 1]);
                let gc = 0.5 * (g[j] + g[j + 1]);
                let v = m.values_x();
                let mean = 0.25 * (v[(i, j)] + v[(i + 1, j)] + v[(i, j + 1)] + v[(i + 1, j + 1)]);
                assert_relative_eq!(m.eval(bc, gc).1, mean, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn gamma_clamp_is_counted() {
        let m = random_map(5, 4, 4);
        let (_, _, c) = m.eval_checked(0.1, 2.0);
        assert!(c);
        assert_eq!(m.eval(0.1, 2.0), m.eval(0.1, FRAC_PI_2));
        assert_eq!(m.clamp_count(), 2);
    }

    #[test]
    fn empty_axes_rejected() {
        let e = GridStressMap::new(
            vec![],
            vec![0.0],
            DMatrix::zeros(0, 1),
            DMatrix::zeros(0, 1),
        );
        assert!(matches!(e, Err(RftError::Empty(_))));
    }

    #[test]
    fn scaling_identities() {
        let m = random_map(6, 5, 5);
        assert_eq!(scale_map(&m, 1.0, 1.0), m);
        let s = scale_map(&m, 1.5, 1.0);
        for (a, b) in s.values_z().iter().zip(m.values_z().iter()) {
            assert_eq!(*a, 1.5 * b);
        }
        assert_eq!(s.values_x(), m.values_x());
        let twice = scale_map(&scale_map(&m, 2.0, 3.0), 0.5, 4.0);
        let once = scale_map(&m, 1.0, 12.0);
        for (a, b) in twice.values_x().iter().zip(once.values_x().iter()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-15);
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let m = random_map(7, 6, 5);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = GridStressMap::read_csv(&buf[..]).unwrap();
        assert_eq!(back, m);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# beta_axis: "));
    }

    #[test]
    fn prior_draw_is_deterministic() {
        let k = KernelConfig::isotropic(2.0, 1.0);
        let axes = GridAxes::uniform(7, 7);
        let a = sample_prior_map(&k, &k, 11, &axes).unwrap();
        let b = sample_prior_map(&k, &k, 11, &axes).unwrap();
        assert_eq!(a, b);
        let c = sample_prior_map(&k, &k, 12, &axes).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_signal_variance_gives_zero_map() {
        let k = KernelConfig {
            signal_variance: 0.0,
            lengthscales: [1.0; 4],
        };
        let m = sample_prior_map(&k, &k, 1, &GridAxes::uniform(5, 5)).unwrap();
        assert!(m.values_z().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn prior_grid_limit() {
        let k = KernelConfig::isotropic(1.0, 1.0);
        assert!(sample_prior_map(&k, &k, 1, &GridAxes::uniform(65, 3)).is_err());
    }

    #[test]
    fn prior_variance_matches_signal_variance() {
        let k = KernelConfig::isotropic(2.5, 1.0);
        let axes = GridAxes::uniform(5, 5);
        let vals: Vec<f64> = (0..200)
            .map(|s| sample_prior_map(&k, &k, s, &axes).unwrap().values_z()[(2, 2)])
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!((var / 2.5 - 1.0).abs() < 0.15, "empirical variance {var}");
    }
}
