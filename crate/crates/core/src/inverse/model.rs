//! Composite-observation GP: covariance assembly and posterior queries.
//!
//! Every observation channel is a linear functional of the two latent maps,
//!
//! ```text
//! y[(p, c)] = sum_m a_z[p, m, c] alpha_z(theta[p, m]) + a_x[p, m, c] alpha_x(theta[p, m]) + eps
//! ```
//!
//! where in force mode `a_i[p, m, c] = w[p, m] * [c == i]` and in torque mode
//! the selector is replaced by the segment sensor map. The covariance is
//! `C = W_z K_z W_z^T + W_x K_x W_x^T + sigma_n^2 I`; `W` is never formed, the
//! sums run directly over pairs of active segment samples.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::kernel::{embed, KernelConfig, PreparedKernel, FEATURES};
use crate::error::{Result, RftError};
use crate::forward::CompositeDataset;
use crate::linalg::{jittered_cholesky, log_det};
use crate::par::{self, Exec};
use crate::stress_field::{Component, GridAxes, GridStressMap};

/// Observation noise: one variance for every channel, or one per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    Isotropic(f64),
    PerChannel(Vec<f64>),
}

impl NoiseModel {
    pub fn variance(&self, channel: usize) -> f64 {
        match self {
            NoiseModel::Isotropic(v) => *v,
            NoiseModel::PerChannel(v) => v[channel],
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            NoiseModel::Isotropic(_) => 1,
            NoiseModel::PerChannel(v) => v.len(),
        }
    }
}

/// Kernel pair plus observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub kernel_z: KernelConfig,
    pub kernel_x: KernelConfig,
    pub noise: NoiseModel,
}

impl Hyperparameters {
    pub fn new(kernel_z: KernelConfig, kernel_x: KernelConfig, noise_variance: f64) -> Self {
        Self {
            kernel_z,
            kernel_x,
            noise: NoiseModel::Isotropic(noise_variance),
        }
    }

    pub fn kernel(&self, component: Component) -> &KernelConfig {
        match component {
            Component::Z => &self.kernel_z,
            Component::X => &self.kernel_x,
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        self.kernel_z.validate()?;
        self.kernel_x.validate()?;
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match &self.noise {
            NoiseModel::Isotropic(v) if ok(*v) => Ok(()),
            NoiseModel::PerChannel(v) if v.len() == channels && v.iter().all(|x| ok(*x)) => Ok(()),
            other => Err(RftError::InvalidSpec(format!(
                "invalid noise model {other:?} for {channels} channels"
            ))),
        }
    }
}

/// Active segment samples flattened out of a dataset.
#[derive(Debug, Clone)]
pub(crate) struct Samples {
    pub channels: usize,
    pub steps: usize,
    pub feats: Vec<[f64; FEATURES]>,
    pub step_of: Vec<usize>,
    /// `coef_z[s * channels + c]`
    pub coef_z: Vec<f64>,
    pub coef_x: Vec<f64>,
    /// Sample index range per step.
    pub ranges: Vec<std::ops::Range<usize>>,
}

impl Samples {
    pub fn from_dataset(ds: &CompositeDataset) -> Result<Self> {
        ds.validate()?;
        let n = ds.channels;
        let mut out = Samples {
            channels: n,
            steps: ds.len(),
            feats: Vec::new(),
            step_of: Vec::new(),
            coef_z: Vec::new(),
            coef_x: Vec::new(),
            ranges: Vec::with_capacity(ds.len()),
        };
        for (p, step) in ds.steps.iter().enumerate() {
            let start = out.feats.len();
            for (m, &(b, g)) in step.angles.iter().enumerate() {
                if step.weights[m] == 0.0 {
                    continue;
                }
                out.feats.push(embed(b, g));
                out.step_of.push(p);
                for c in 0..n {
                    out.coef_z.push(step.coefficient(m, 0, c));
                    out.coef_x.push(step.coefficient(m, 1, c));
                }
            }
            out.ranges.push(start..out.feats.len());
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.feats.len()
    }
}

/// `C` for the given samples (exactly symmetric).
pub(crate) fn covariance(samples: &Samples, hyper: &Hyperparameters, exec: Exec) -> DMatrix<f64> {
    let n = samples.channels;
    let dim = samples.steps * n;
    let mut data = vec![0.0; dim * dim];
    if dim == 0 {
        return DMatrix::zeros(0, 0);
    }
    let (kz_prep, kx_prep) = (
        PreparedKernel::new(&hyper.kernel_z),
        PreparedKernel::new(&hyper.kernel_x),
    );
    // each chunk holds the n rows of one step; fill blocks with q >= p
    par::fill_rows(exec, &mut data, n * dim, |p, rows| {
        for q in p..samples.steps {
            for s in samples.ranges[p].clone() {
                for t in samples.ranges[q].clone() {
                    let kz = kz_prep.eval(&samples.feats[s], &samples.feats[t]);
                    let kx = kx_prep.eval(&samples.feats[s], &samples.feats[t]);
                    for c in 0..n {
                        let az = samples.coef_z[s * n + c] * kz;
                        let ax = samples.coef_x[s * n + c] * kx;
                        let row = &mut rows[c * dim + q * n..c * dim + q * n + n];
                        for (cc, r) in row.iter_mut().enumerate() {
                            *r += az * samples.coef_z[t * n + cc] + ax * samples.coef_x[t * n + cc];
                        }
                    }
                }
            }
        }
    });
    let mut c = DMatrix::from_row_slice(dim, dim, &data);
    for i in 0..dim {
        for j in 0..i {
            c[(i, j)] = c[(j, i)];
        }
        c[(i, i)] += hyper.noise.variance(i % n);
    }
    c
}

/// Dense composite covariance `W_z K_z W_z^T + W_x K_x W_x^T + sigma_n^2 I`.
pub fn assemble_covariance(ds: &CompositeDataset, hyper: &Hyperparameters) -> Result<DMatrix<f64>> {
    if ds.is_empty() {
        return Err(RftError::Empty("dataset".into()));
    }
    hyper.validate(ds.channels)?;
    let samples = Samples::from_dataset(ds)?;
    Ok(covariance(&samples, hyper, Exec::default()))
}

/// Posterior mean and variance of one latent component at one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

/// Grid posterior: means as a stress map and variances in the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPosterior {
    pub mean: GridStressMap,
    pub variance: GridStressMap,
}

/// A factorized composite GP ready for posterior queries.
#[derive(Debug)]
pub struct GpModel {
    hyper: Hyperparameters,
    dataset: CompositeDataset,
    samples: Samples,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    /// `W^T C^{-1} y` per sample, for each component.
    proj_z: Vec<f64>,
    proj_x: Vec<f64>,
    jitter: f64,
    variance_floor_hits: AtomicUsize,
    exec: Exec,
}

impl Clone for GpModel {
    fn clone(&self) -> Self {
        Self {
            hyper: self.hyper.clone(),
            dataset: self.dataset.clone(),
            samples: self.samples.clone(),
            chol: self.chol.clone(),
            alpha: self.alpha.clone(),
            proj_z: self.proj_z.clone(),
            proj_x: self.proj_x.clone(),
            jitter: self.jitter,
            variance_floor_hits: AtomicUsize::new(0),
            exec: self.exec,
        }
    }
}

impl GpModel {
    /// Assembles and factorizes the composite covariance.
    pub fn new(dataset: CompositeDataset, hyper: Hyperparameters) -> Result<Self> {
        Self::with_exec(dataset, hyper, Exec::default())
    }

    pub fn with_exec(
        dataset: CompositeDataset,
        hyper: Hyperparameters,
        exec: Exec,
    ) -> Result<Self> {
        hyper.validate(dataset.channels)?;
        let samples = Samples::from_dataset(&dataset)?;
        let y = DVector::from_vec(dataset.observations());
        let (chol, alpha, jitter) = if dataset.is_empty() {
            (None, DVector::zeros(0), 0.0)
        } else {
            let c = covariance(&samples, &hyper, exec);
            let (chol, jitter) = jittered_cholesky(c)?;
            let alpha = chol.solve(&y);
            (Some(chol), alpha, jitter)
        };
        let n = samples.channels;
        let project = |coef: &[f64]| -> Vec<f64> {
            (0..samples.len())
                .map(|s| {
                    let p = samples.step_of[s];
                    (0..n).map(|c| coef[s * n + c] * alpha[p * n + c]).sum()
                })
                .collect()
        };
        let proj_z = project(&samples.coef_z);
        let proj_x = project(&samples.coef_x);
        Ok(Self {
            hyper,
            dataset,
            samples,
            chol,
            alpha,
            proj_z,
            proj_x,
            jitter,
            variance_floor_hits: AtomicUsize::new(0),
            exec,
        })
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn dataset(&self) -> &CompositeDataset {
        &self.dataset
    }

    /// Diagonal jitter added during factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn set_exec(&mut self, exec: Exec) {
        self.exec = exec;
    }

    /// Number of variance queries clamped at zero.
    pub fn variance_floor_hits(&self) -> usize {
        self.variance_floor_hits.load(Ordering::Relaxed)
    }

    /// `C^{-1} y`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// The factorized (jittered) covariance, `None` for an empty dataset.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        self.chol.as_ref().map(|c| {
            let l = c.l();
            &l * l.transpose()
        })
    }

    /// `max |C (C^{-1} y) - y| / |y|` against the factorized covariance.
    pub fn solve_residual(&self) -> f64 {
        let Some(c) = self.covariance() else {
            return 0.0;
        };
        let y = DVector::from_vec(self.dataset.observations());
        let r = &c * &self.alpha - &y;
        r.norm() / y.norm().max(f64::MIN_POSITIVE)
    }

    /// Log marginal likelihood of the observations.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let Some(chol) = &self.chol else { return 0.0 };
        let y = DVector::from_vec(self.dataset.observations());
        let n = y.len() as f64;
        -0.5 * y.dot(&self.alpha)
            - 0.5 * log_det(chol)
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Posterior mean and variance of `alpha_component` at `(beta, gamma)`.
    pub fn posterior_stress(&self, beta: f64, gamma: f64, component: Component) -> Posterior {
        let kernel = PreparedKernel::new(self.hyper.kernel(component));
        let f = embed(beta, gamma);
        let prior = kernel.eval(&f, &f);
        let Some(chol) = &self.chol else {
            return Posterior {
                mean: 0.0,
                variance: prior,
            };
        };
        let s = &self.samples;
        let n = s.channels;
        let (proj, coef) = match component {
            Component::Z => (&self.proj_z, &s.coef_z),
            Component::X => (&self.proj_x, &s.coef_x),
        };
        let mut mean = 0.0;
        let mut v = DVector::zeros(s.steps * n);
        for i in 0..s.len() {
            let k = kernel.eval(&f, &s.feats[i]);
            mean += k * proj[i];
            let p = s.step_of[i];
            for c in 0..n {
                v[p * n + c] += coef[i * n + c] * k;
            }
        }
        let u = chol
            .l()
            .solve_lower_triangular(&v)
            .expect("non-singular factor");
        let mut variance = prior - u.norm_squared();
        if variance < 0.0 {
            self.variance_floor_hits.fetch_add(1, Ordering::Relaxed);
            variance = 0.0;
        }
        Posterior { mean, variance }
    }

    /// Posterior means and variances of both components on a grid.
    pub fn posterior_stress_grid(&self, axes: &GridAxes) -> Result<GridPosterior> {
        let nodes = axes.nodes();
        let vals = par::map_slice(self.exec, &nodes, |&(b, g)| {
            (
                self.posterior_stress(b, g, Component::Z),
                self.posterior_stress(b, g, Component::X),
            )
        });
        let (nb, ng) = (axes.beta.len(), axes.gamma.len());
        let grid = |f: &dyn Fn(&(Posterior, Posterior)) -> f64| {
            DMatrix::from_fn(nb, ng, |i, j| f(&vals[i * ng + j]))
        };
        let mean = GridStressMap::new(
            axes.beta.clone(),
            axes.gamma.clone(),
            grid(&|v| v.0.mean),
            grid(&|v| v.1.mean),
        )?;
        let variance = GridStressMap::new(
            axes.beta.clone(),
            axes.gamma.clone(),
            grid(&|v| v.0.variance),
            grid(&|v| v.1.variance),
        )?;
        Ok(GridPosterior { mean, variance })
    }

    /// Predicted force `(F_z, F_x)` for a test contact configuration, with
    /// variances that treat segments as independent.
    pub fn posterior_force(&self, angles: &[(f64, f64)], weights: &[f64]) -> ([f64; 2], [f64; 2]) {
        let mut mean = [0.0; 2];
        let mut var = [0.0; 2];
        for (&(b, g), &w) in angles.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for comp in Component::BOTH {
                let p = self.posterior_stress(b, g, comp);
                mean[comp.index()] += w * p.mean;
                var[comp.index()] += w * w * p.variance;
            }
        }
        (mean, var)
    }
}

/// Convenience wrapper for [`GpModel::posterior_force`].
pub fn posterior_force(
    model: &GpModel,
    angles: &[(f64, f64)],
    weights: &[f64],
) -> ([f64; 2], [f64; 2]) {
    model.posterior_force(angles, weights)
}
