//! Composite-observation Gaussian-process inversion of stress maps.

pub mod kernel;
pub mod likelihood;
pub mod model;
pub mod optimize;
pub mod semiparam;

pub use kernel::{embed, KernelConfig, FEATURES};
pub use likelihood::{
    log_marginal_likelihood, log_marginal_likelihood_gradient, Factorization, Objective,
    ParamLayout,
};
pub use model::{
    assemble_covariance, posterior_force, GpModel, GridPosterior, Hyperparameters, NoiseModel,
    Posterior,
};
pub use optimize::{
    data_scales, fit_hyperparameters, fit_hyperparameters_with, FitOptions, FitReport, HyperBounds,
    RestartOutcome,
};
pub use semiparam::{fit_residual, fit_scaling, SemiParametricModel};
