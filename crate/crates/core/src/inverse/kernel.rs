//! Squared-exponential kernel over the periodic angle embedding.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RftError};

/// Number of embedded features.
pub const FEATURES: usize = 4;

/// `(sin 2beta, cos 2beta, sin gamma, cos gamma)`; pi-periodic in beta.
pub fn embed(beta: f64, gamma: f64) -> [f64; FEATURES] {
    let (s2b, c2b) = (2.0 * beta).sin_cos();
    let (sg, cg) = gamma.sin_cos();
    [s2b, c2b, sg, cg]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub signal_variance: f64,
    pub lengthscales: [f64; FEATURES],
}

impl KernelConfig {
    pub fn new(signal_variance: f64, lengthscales: [f64; FEATURES]) -> Result<Self> {
        let k = Self {
            signal_variance,
            lengthscales,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn isotropic(signal_variance: f64, lengthscale: f64) -> Self {
        Self {
            signal_variance,
            lengthscales: [lengthscale; FEATURES],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(RftError::InvalidSpec(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if self
            .lengthscales
            .iter()
            .any(|l| !(l.is_finite() && *l > 0.0))
        {
            return Err(RftError::InvalidSpec(format!(
                "lengthscales must be positive, got {:?}",
                self.lengthscales
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn eval_features(&self, a: &[f64; FEATURES], b: &[f64; FEATURES]) -> f64 {
        let mut q = 0.0;
        for d in 0..FEATURES {
            let t = (a[d] - b[d]) / self.lengthscales[d];
            q += t * t;
        }
        self.signal_variance * (-0.5 * q).exp()
    }

    /// `k((beta, gamma), (beta', gamma'))`.
    pub fn eval(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        self.eval_features(&embed(a.0, a.1), &embed(b.0, b.1))
    }

    /// Kernel value and its derivatives w.r.t. `log sigma_f^2` and each
    /// `log l_d`.
    #[inline]
    pub fn eval_with_log_gradient(
        &self,
        a: &[f64; FEATURES],
        b: &[f64; FEATURES],
    ) -> (f64, [f64; 1 + FEATURES]) {
        let mut sq = [0.0; FEATURES];
        let mut q = 0.0;
        for d in 0..FEATURES {
            let t = (a[d] - b[d]) / self.lengthscales[d];
            sq[d] = t * t;
            q += sq[d];
        }
        let k = self.signal_variance * (-0.5 * q).exp();
        let mut g = [0.0; 1 + FEATURES];
        g[0] = k;
        for d in 0..FEATURES {
            g[1 + d] = k * sq[d];
        }
        (k, g)
    }

    /// Parameters as `[log sigma_f^2, log l_1, .., log l_4]`.
    pub fn to_log(&self) -> [f64; 1 + FEATURES] {
        let mut p = [0.0; 1 + FEATURES];
        p[0] = self.signal_variance.ln();
        for d in 0..FEATURES {
            p[1 + d] = self.lengthscales[d].ln();
        }
        p
    }

    pub fn from_log(p: &[f64]) -> Self {
        let mut lengthscales = [0.0; FEATURES];
        for d in 0..FEATURES {
            lengthscales[d] = p[1 + d].exp();
        }
        Self {
            signal_variance: p[0].exp(),
            lengthscales,
        }
    }
}

/// [`KernelConfig`] with inverse squared lengthscales cached for hot loops.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PreparedKernel {
    signal_variance: f64,
    inv_l2: [f64; FEATURES],
}

impl PreparedKernel {
    pub fn new(k: &KernelConfig) -> Self {
        let inv_l2 = k.lengthscales.map(|l| 1.0 / (l * l));
        Self {
            signal_variance: k.signal_variance,
            inv_l2,
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64; FEATURES], b: &[f64; FEATURES]) -> f64 {
        let mut q = 0.0;
        for d in 0..FEATURES {
            let t = a[d] - b[d];
            q += t * t * self.inv_l2[d];
        }
        self.signal_variance * (-0.5 * q).exp()
    }

    /// Same layout as [`KernelConfig::eval_with_log_gradient`].
    #[inline]
    pub fn log_gradient(&self, a: &[f64; FEATURES], b: &[f64; FEATURES]) -> [f64; 1 + FEATURES] {
        let mut sq = [0.0; FEATURES];
        let mut q = 0.0;
        for d in 0..FEATURES {
            let t = a[d] - b[d];
            sq[d] = t * t * self.inv_l2[d];
            q += sq[d];
        }
        let k = self.signal_variance * (-0.5 * q).exp();
        let mut g = [0.0; 1 + FEATURES];
        g[0] = k;
        for d in 0..FEATURES {
            g[1 + d] = k * sq[d];
        }
        g
    }
}
