//! Marginal-likelihood maximization over log-hyperparameters.
//!
//! Projected L-BFGS with Armijo backtracking inside a box, restarted from a
//! seeded, shifted Halton lattice. Restart 0 always starts from the caller's
//! initial guess.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::likelihood::{Factorization, Objective, ParamLayout};
use super::model::{GpModel, Hyperparameters, NoiseModel};
use crate::error::{Result, RftError};
use crate::forward::CompositeDataset;
use crate::par::{self, Exec};

/// Box constraints in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperBounds {
    pub signal_variance: (f64, f64),
    pub lengthscale: (f64, f64),
    pub noise_variance: (f64, f64),
}

/// RMS of the observations and the matching stress scale.
///
/// The stress scale divides the observation RMS by the RMS of the per-channel
/// coefficient sums, so a unit stress map reproduces observations of the
/// right magnitude. Both fall back to 1 on degenerate data.
pub fn data_scales(ds: &CompositeDataset) -> (f64, f64) {
    let obs = ds.observations();
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt();
    let obs_rms = rms(&obs);
    let mut sums = Vec::with_capacity(ds.observation_count());
    for s in &ds.steps {
        for c in 0..ds.channels {
            let t: f64 = (0..s.weights.len())
                .map(|m| s.coefficient(m, 0, c).abs() + s.coefficient(m, 1, c).abs())
                .sum();
            sums.push(t);
        }
    }
    let coef_rms = rms(&sums);
    let obs_scale = if obs_rms > 0.0 && obs_rms.is_finite() {
        obs_rms
    } else {
        1.0
    };
    let stress_scale = if obs_rms > 0.0 && coef_rms > 0.0 {
        obs_rms / coef_rms
    } else {
        1.0
    };
    (obs_scale, stress_scale)
}

impl HyperBounds {
    /// `sigma_f^2 in [1e-4, 1e4] s^2`, `l in [0.05, 10]`,
    /// `sigma_n^2 in [1e-10, 1] o^2` with `s`, `o` from [`data_scales`].
    pub fn default_for(ds: &CompositeDataset) -> Self {
        let (o, s) = data_scales(ds);
        Self {
            signal_variance: (1e-4 * s * s, 1e4 * s * s),
            lengthscale: (0.05, 10.0),
            noise_variance: (1e-10 * o * o, o * o),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("signal_variance", self.signal_variance),
            ("lengthscale", self.lengthscale),
            ("noise_variance", self.noise_variance),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(RftError::InvalidSpec(format!(
                    "bounds for {name} must satisfy 0 < lo <= hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    fn log_box(&self, layout: &ParamLayout) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::with_capacity(layout.len());
        let mut hi = Vec::with_capacity(layout.len());
        let blocks = if layout.shared_kernel { 1 } else { 2 };
        for _ in 0..blocks {
            lo.push(self.signal_variance.0.ln());
            hi.push(self.signal_variance.1.ln());
            for _ in 0..super::kernel::FEATURES {
                lo.push(self.lengthscale.0.ln());
                hi.push(self.lengthscale.1.ln());
            }
        }
        for _ in 0..layout.noise_params {
            lo.push(self.noise_variance.0.ln());
            hi.push(self.noise_variance.1.ln());
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    /// Defaults to [`HyperBounds::default_for`] the dataset.
    #[serde(default)]
    pub bounds: Option<HyperBounds>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Tie `kernel_x` to `kernel_z`.
    #[serde(default)]
    pub shared_kernel: bool,
    /// One noise variance per observation channel.
    #[serde(default)]
    pub per_channel_noise: bool,
}

fn default_restarts() -> usize {
    3
}

fn default_max_iter() -> usize {
    150
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bounds: None,
            restarts: default_restarts(),
            seed: 0,
            max_iter: default_max_iter(),
            shared_kernel: false,
            per_channel_noise: false,
        }
    }
}

/// Outcome of one restart.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub start: Vec<f64>,
    /// Final log-parameters and likelihood, `None` if the start never factorized.
    pub result: Option<(Vec<f64>, f64)>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: GpModel,
    pub log_likelihood: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartOutcome>,
}

/// Maximizes the log marginal likelihood and returns the best restart.
///
/// Ties are broken by the lowest restart index, so the result does not
/// depend on execution order.
pub fn fit_hyperparameters(
    ds: &CompositeDataset,
    init: &Hyperparameters,
    options: &FitOptions,
) -> Result<FitReport> {
    fit_hyperparameters_with(ds, init, options, Exec::default())
}

pub fn fit_hyperparameters_with(
    ds: &CompositeDataset,
    init: &Hyperparameters,
    options: &FitOptions,
    exec: Exec,
) -> Result<FitReport> {
    if options.restarts == 0 {
        return Err(RftError::InvalidSpec("restarts must be >= 1".into()));
    }
    init.validate(ds.channels)?;
    let bounds = options
        .bounds
        .unwrap_or_else(|| HyperBounds::default_for(ds));
    bounds.validate()?;
    if ds.is_empty() {
        return Err(RftError::Empty("dataset".into()));
    }

    let mut init = init.clone();
    if options.per_channel_noise {
        if let NoiseModel::Isotropic(v) = init.noise {
            init.noise = NoiseModel::PerChannel(vec![v; ds.channels]);
        }
    }
    if options.shared_kernel {
        init.kernel_x = init.kernel_z;
    }
    let layout = ParamLayout::for_hyper(&init, options.shared_kernel);
    let (lo, hi) = bounds.log_box(&layout);
    let starts = restart_points(
        &layout.pack(&init),
        &lo,
        &hi,
        options.restarts,
        options.seed,
    );

    // Parallelism goes to restarts when there are several, otherwise inside.
    let (outer, inner) = if options.restarts > 1 {
        (exec, Exec::Sequential)
    } else {
        (Exec::Sequential, exec)
    };
    let objective = Objective::new(ds, layout, inner)?;
    let restarts: Vec<RestartOutcome> = par::map_slice(outer, &starts, |x0| {
        let (result, iterations) = match maximize(&objective, x0, &lo, &hi, options.max_iter) {
            Some((x, f, it)) => (Some((x, f)), it),
            None => (None, 0),
        };
        RestartOutcome {
            start: x0.clone(),
            result,
            iterations,
        }
    });

    let mut best: Option<(usize, f64)> = None;
    for (i, r) in restarts.iter().enumerate() {
        if let Some((_, f)) = &r.result {
            if best.is_none_or(|(_, bf)| *f > bf) {
                best = Some((i, *f));
            }
        }
    }
    let Some((best_restart, log_likelihood)) = best else {
        return Err(RftError::NotPositiveDefinite {
            max_jitter: f64::NAN,
        });
    };
    let x = &restarts[best_restart]
        .result
        .as_ref()
        .expect("best restart")
        .0;
    let hyper = layout.unpack(x);
    let model = GpModel::with_exec(ds.clone(), hyper, exec)?;
    Ok(FitReport {
        model,
        log_likelihood,
        best_restart,
        restarts,
    })
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut f = 1.0 / base as f64;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f /= base as f64;
    }
    r
}

/// Initial point, then Halton points shifted modulo 1 by a seeded offset.
fn restart_points(x0: &[f64], lo: &[f64], hi: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..x0.len()).map(|_| rng.random::<f64>()).collect();
    let mut out = vec![project(x0, lo, hi)];
    for k in 1..n {
        out.push(
            (0..x0.len())
                .map(|d| {
                    let u =
                        (radical_inverse(k as u64, PRIMES[d % PRIMES.len()]) + shift[d]).fract();
                    lo[d] + u * (hi[d] - lo[d])
                })
                .collect(),
        );
    }
    out
}

fn project(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (l, h))| v.clamp(*l, *h))
        .collect()
}

/// Gradient with components that would leave the box zeroed.
fn projected_gradient(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let at_lo = x[i] <= lo[i] && g[i] > 0.0;
            let at_hi = x[i] >= hi[i] && g[i] < 0.0;
            if at_lo || at_hi {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const MEMORY: usize = 8;
const MAX_LOG_STEP: f64 = 2.0;
const ARMIJO: f64 = 1e-4;
const MIN_LOG_STEP: f64 = 1e-8;

/// Projected L-BFGS minimizing `-LML`. Returns `(x, LML, iterations)`, or
/// `None` if the start cannot be evaluated.
fn maximize(
    obj: &Objective,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
) -> Option<(Vec<f64>, f64, usize)> {
    // trial points need only the value; the gradient is formed once accepted
    let value = |x: &[f64]| obj.factorize(x).ok().filter(|f| f.value.is_finite());
    let gradient = |f: &Factorization| -> Option<Vec<f64>> {
        let g = obj.gradient(f);
        g.iter()
            .all(|d| d.is_finite())
            .then(|| g.into_iter().map(|d| -d).collect())
    };
    let mut x = x0.to_vec();
    let start = value(&x)?;
    let mut f = -start.value;
    let mut g = gradient(&start)?;
    let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(MEMORY);
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        let pg = projected_gradient(&x, &g, lo, hi);
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm <= 1e-8 * f.abs().max(1.0) {
            break;
        }

        // two-loop recursion on the free variables
        let mut d: Vec<f64> = pg.clone();
        let mut a = vec![0.0; mem.len()];
        for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
            a[k] = rho * dot(s, &d);
            for i in 0..d.len() {
                d[i] -= a[k] * y[i];
            }
        }
        if let Some((s, y, _)) = mem.last() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for (k, (s, y, rho)) in mem.iter().enumerate() {
            let b = rho * dot(y, &d);
            for i in 0..d.len() {
                d[i] += (a[k] - b) * s[i];
            }
        }
        for i in 0..d.len() {
            d[i] = if pg[i] == 0.0 { 0.0 } else { -d[i] };
        }
        if dot(&d, &pg) >= 0.0 {
            mem.clear();
            d = pg.iter().map(|v| -v).collect();
        }
        let longest = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if longest > MAX_LOG_STEP {
            d.iter_mut().for_each(|v| *v *= MAX_LOG_STEP / longest);
        }

        let mut t = 1.0;
        let mut accepted = None;
        // below this the likelihood change is lost in rounding
        while t * longest.min(MAX_LOG_STEP) > MIN_LOG_STEP {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let trial = project(&trial, lo, hi);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if step.iter().all(|s| *s == 0.0) {
                break;
            }
            if let Some(fac) = value(&trial) {
                if -fac.value <= f + ARMIJO * dot(&g, &step) {
                    if let Some(gt) = gradient(&fac) {
                        accepted = Some((trial, -fac.value, gt, step));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn, s)) = accepted else {
            if mem.is_empty() {
                break;
            }
            mem.clear();
            continue;
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if mem.len() == MEMORY {
                mem.remove(0);
            }
            mem.push((s, y, 1.0 / sy));
        }
        let improvement = f - fnew;
        x = xn;
        f = fnew;
        g = gn;
        if improvement <= 1e-12 * f.abs().max(1.0) {
            break;
        }
    }
    Some((x, -f, iterations))
}
