//! Scaled base profile plus a GP residual, fitted in two stages.
//!
//! Stage 1 fixes `(zeta_z, zeta_x)` by linear least squares against the base
//! predictions. Stage 2 fits a composite GP to `y - y_base(zeta)`.

use super::model::{GpModel, GridPosterior, Hyperparameters};
use super::optimize::{fit_hyperparameters, FitOptions};
use crate::error::{Result, RftError};
use crate::forward::CompositeDataset;
use crate::stress_field::{Component, GridAxes, GridStressMap, StressField};

/// Observations predicted by each base component alone.
fn base_predictions(ds: &CompositeDataset, base: &GridStressMap) -> (Vec<f64>, Vec<f64>) {
    let pz = ds.predict(&|b, g| (base.eval(b, g).0, 0.0));
    let px = ds.predict(&|b, g| (0.0, base.eval(b, g).1));
    (pz, px)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares `(zeta_z, zeta_x)` minimizing `|y - zeta_z P_z - zeta_x P_x|^2`.
pub fn fit_scaling(ds: &CompositeDataset, base: &GridStressMap) -> Result<(f64, f64)> {
    if ds.is_empty() {
        return Err(RftError::Empty("dataset".into()));
    }
    ds.validate()?;
    let y = ds.observations();
    let (pz, px) = base_predictions(ds, base);
    let (a, b, d) = (dot(&pz, &pz), dot(&pz, &px), dot(&px, &px));
    let det = a * d - b * b;
    if !(a > 0.0 && d > 0.0 && det > 1e-12 * a * d) {
        return Err(RftError::DegenerateFit(format!(
            "base predictions are rank deficient (|P_z|^2={a:e}, |P_x|^2={d:e})"
        )));
    }
    let (rz, rx) = (dot(&pz, &y), dot(&px, &y));
    Ok(((d * rz - b * rx) / det, (a * rx - b * rz) / det))
}

/// `zeta * base + r` with `r` the residual GP posterior mean.
#[derive(Debug, Clone)]
pub struct SemiParametricModel {
    pub base: GridStressMap,
    pub zeta_z: f64,
    pub zeta_x: f64,
    pub residual: GpModel,
    pub residual_log_likelihood: f64,
}

/// Fits the residual GP with the scaling fixed.
pub fn fit_residual(
    ds: &CompositeDataset,
    base: &GridStressMap,
    zeta: (f64, f64),
    init: &Hyperparameters,
    options: &FitOptions,
) -> Result<SemiParametricModel> {
    let y = ds.observations();
    let (pz, px) = base_predictions(ds, base);
    let r: Vec<f64> = (0..y.len())
        .map(|i| y[i] - zeta.0 * pz[i] - zeta.1 * px[i])
        .collect();
    let residual_ds = ds.with_observations(&r)?;
    let fit = fit_hyperparameters(&residual_ds, init, options)?;
    Ok(SemiParametricModel {
        base: base.clone(),
        zeta_z: zeta.0,
        zeta_x: zeta.1,
        residual: fit.model,
        residual_log_likelihood: fit.log_likelihood,
    })
}

impl SemiParametricModel {
    /// Scaled base value of one component.
    pub fn base_value(&self, beta: f64, gamma: f64, component: Component) -> f64 {
        let (bz, bx) = self.base.eval(beta, gamma);
        match component {
            Component::Z => self.zeta_z * bz,
            Component::X => self.zeta_x * bx,
        }
    }

    /// Full posterior on a grid: mean `zeta * base + r`, variance of `r`.
    pub fn posterior_grid(&self, axes: &GridAxes) -> Result<GridPosterior> {
        let residual = self.residual.posterior_stress_grid(axes)?;
        let scaled = GridStressMap::from_field(axes, &|b, g| {
            let (bz, bx) = self.base.eval(b, g);
            (self.zeta_z * bz, self.zeta_x * bx)
        })?;
        Ok(GridPosterior {
            mean: scaled.linear_combination(1.0, &residual.mean, 1.0)?,
            variance: residual.variance,
        })
    }
}

impl StressField for SemiParametricModel {
    fn eval(&self, beta: f64, gamma: f64) -> (f64, f64) {
        let rz = self
            .residual
            .posterior_stress(beta, gamma, Component::Z)
            .mean;
        let rx = self
            .residual
            .posterior_stress(beta, gamma, Component::X)
            .mean;
        (
            self.base_value(beta, gamma, Component::Z) + rz,
            self.base_value(beta, gamma, Component::X) + rx,
        )
    }
}
