//! Log marginal likelihood of composite observations and its gradient in
//! log-hyperparameter space.

use nalgebra::{Cholesky, DVector, Dyn};

use super::kernel::{KernelConfig, PreparedKernel, FEATURES};
use super::model::{covariance, Hyperparameters, NoiseModel, Samples};
use crate::error::{Result, RftError};
use crate::forward::CompositeDataset;
use crate::linalg::{jittered_cholesky, log_det};
use crate::par::{self, Exec};

const KERNEL_PARAMS: usize = 1 + FEATURES;

/// How hyperparameters map onto the flat log-parameter vector.
///
/// Order: `kernel_z` (`log sigma_f^2`, four `log l_d`), then `kernel_x`
/// unless shared, then one `log sigma_n^2` per noise parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub shared_kernel: bool,
    pub noise_params: usize,
}

impl ParamLayout {
    pub fn for_hyper(hyper: &Hyperparameters, shared_kernel: bool) -> Self {
        Self {
            shared_kernel,
            noise_params: hyper.noise.parameter_count(),
        }
    }

    pub fn len(&self) -> usize {
        self.kernel_blocks() * KERNEL_PARAMS + self.noise_params
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn kernel_blocks(&self) -> usize {
        if self.shared_kernel {
            1
        } else {
            2
        }
    }

    pub fn noise_offset(&self) -> usize {
        self.kernel_blocks() * KERNEL_PARAMS
    }

    pub fn pack(&self, hyper: &Hyperparameters) -> Vec<f64> {
        let mut p = hyper.kernel_z.to_log().to_vec();
        if !self.shared_kernel {
            p.extend(hyper.kernel_x.to_log());
        }
        match &hyper.noise {
            NoiseModel::Isotropic(v) => p.push(v.ln()),
            NoiseModel::PerChannel(v) => p.extend(v.iter().map(|x| x.ln())),
        }
        p
    }

    pub fn unpack(&self, p: &[f64]) -> Hyperparameters {
        let kernel_z = KernelConfig::from_log(&p[..KERNEL_PARAMS]);
        let kernel_x = if self.shared_kernel {
            kernel_z
        } else {
            KernelConfig::from_log(&p[KERNEL_PARAMS..2 * KERNEL_PARAMS])
        };
        let noise = &p[self.noise_offset()..];
        let noise = if self.noise_params == 1 {
            NoiseModel::Isotropic(noise[0].exp())
        } else {
            NoiseModel::PerChannel(noise.iter().map(|x| x.exp()).collect())
        };
        Hyperparameters {
            kernel_z,
            kernel_x,
            noise,
        }
    }
}

/// Cholesky factor of `C` and `alpha = C^{-1} y` at one parameter point.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub hyper: Hyperparameters,
    pub chol: Cholesky<f64, Dyn>,
    pub alpha: DVector<f64>,
    pub value: f64,
}

/// Likelihood of a fixed dataset as a function of log-hyperparameters.
#[derive(Debug, Clone)]
pub struct Objective {
    samples: Samples,
    y: DVector<f64>,
    pub layout: ParamLayout,
    pub exec: Exec,
}

impl Objective {
    pub fn new(ds: &CompositeDataset, layout: ParamLayout, exec: Exec) -> Result<Self> {
        if ds.is_empty() {
            return Err(RftError::Empty("dataset".into()));
        }
        if layout.noise_params != 1 && layout.noise_params != ds.channels {
            return Err(RftError::InvalidSpec(format!(
                "{} noise parameters for {} channels",
                layout.noise_params, ds.channels
            )));
        }
        Ok(Self {
            samples: Samples::from_dataset(ds)?,
            y: DVector::from_vec(ds.observations()),
            layout,
            exec,
        })
    }

    /// Log marginal likelihood only.
    pub fn value(&self, log_params: &[f64]) -> Result<f64> {
        Ok(self.factorize(log_params)?.value)
    }

    /// Factorizes `C` at `log_params`; the result feeds [`Objective::gradient`].
    pub fn factorize(&self, log_params: &[f64]) -> Result<Factorization> {
        let hyper = self.layout.unpack(log_params);
        let c = covariance(&self.samples, &hyper, self.exec);
        let (chol, _) = jittered_cholesky(c)?;
        let alpha = chol.solve(&self.y);
        let value = self.lml(&alpha, log_det(&chol));
        Ok(Factorization {
            hyper,
            chol,
            alpha,
            value,
        })
    }

    fn lml(&self, alpha: &DVector<f64>, log_det: f64) -> f64 {
        let n = self.y.len() as f64;
        -0.5 * self.y.dot(alpha) - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Log marginal likelihood and its gradient w.r.t. `log_params`.
    pub fn value_and_gradient(&self, log_params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let f = self.factorize(log_params)?;
        Ok((f.value, self.gradient(&f)))
    }

    /// Gradient at an existing factorization.
    pub fn gradient(&self, f: &Factorization) -> Vec<f64> {
        let hyper = &f.hyper;
        // B = alpha alpha^T - C^{-1};  dL/dpsi = tr(B dC/dpsi) / 2
        let mut b = f.chol.inverse();
        b.neg_mut();
        b.ger(1.0, &f.alpha, &f.alpha, 1.0);

        let s = &self.samples;
        let n = s.channels;
        let (kz, kx) = (
            PreparedKernel::new(&hyper.kernel_z),
            PreparedKernel::new(&hyper.kernel_x),
        );
        let per_row = par::map_range(self.exec, s.len(), |i| {
            let mut acc = [0.0; 2 * KERNEL_PARAMS];
            let p = s.step_of[i];
            for j in i..s.len() {
                let q = s.step_of[j];
                let sym = if j == i { 1.0 } else { 2.0 };
                let quad = |coef: &[f64]| {
                    let mut m = 0.0;
                    for c in 0..n {
                        let ai = coef[i * n + c];
                        if ai == 0.0 {
                            continue;
                        }
                        for cc in 0..n {
                            let aj = coef[j * n + cc];
                            if aj != 0.0 {
                                m += ai * b[(p * n + c, q * n + cc)] * aj;
                            }
                        }
                    }
                    m
                };
                let (mz, mx) = (quad(&s.coef_z), quad(&s.coef_x));
                if mz != 0.0 {
                    let g = kz.log_gradient(&s.feats[i], &s.feats[j]);
                    for d in 0..KERNEL_PARAMS {
                        acc[d] += sym * mz * g[d];
                    }
                }
                if mx != 0.0 {
                    let g = kx.log_gradient(&s.feats[i], &s.feats[j]);
                    for d in 0..KERNEL_PARAMS {
                        acc[KERNEL_PARAMS + d] += sym * mx * g[d];
                    }
                }
            }
            acc
        });
        let mut kgrad = [0.0; 2 * KERNEL_PARAMS];
        for row in &per_row {
            for (a, r) in kgrad.iter_mut().zip(row) {
                *a += 0.5 * r;
            }
        }

        let mut grad = Vec::with_capacity(self.layout.len());
        if self.layout.shared_kernel {
            grad.extend((0..KERNEL_PARAMS).map(|d| kgrad[d] + kgrad[KERNEL_PARAMS + d]));
        } else {
            grad.extend_from_slice(&kgrad);
        }
        match &hyper.noise {
            NoiseModel::Isotropic(v) => grad.push(0.5 * v * b.trace()),
            NoiseModel::PerChannel(v) => {
                for (c, var) in v.iter().enumerate() {
                    let tr: f64 = (0..s.steps).map(|p| b[(p * n + c, p * n + c)]).sum();
                    grad.push(0.5 * var * tr);
                }
            }
        }
        grad
    }
}

/// `-F^T C^{-1} F / 2 - log|C| / 2 - (t N / 2) log 2 pi`, with `N` the
/// channels per step.
pub fn log_marginal_likelihood(ds: &CompositeDataset, hyper: &Hyperparameters) -> Result<f64> {
    hyper.validate(ds.channels)?;
    let layout = ParamLayout::for_hyper(hyper, false);
    Objective::new(ds, layout, Exec::default())?.value(&layout.pack(hyper))
}

/// Likelihood and gradient w.r.t. the log-parameters in [`ParamLayout`] order.
pub fn log_marginal_likelihood_gradient(
    ds: &CompositeDataset,
    hyper: &Hyperparameters,
    shared_kernel: bool,
) -> Result<(f64, Vec<f64>)> {
    hyper.validate(ds.channels)?;
    let layout = ParamLayout::for_hyper(hyper, shared_kernel);
    Objective::new(ds, layout, Exec::default())?.value_and_gradient(&layout.pack(hyper))
}
