//! Forward resistive force theory for rigid toes in granular media, and
//! Gaussian-process reconstruction of the stress-per-depth maps
//! `alpha_z(beta, gamma)`, `alpha_x(beta, gamma)` from aggregated force or
//! joint-torque observations.
//!
//! Pipeline: [`geometry`] turns a toe and a gait into per-segment states,
//! [`forward`] sums stress contributions into forces (or torques via
//! [`fivebar`]), [`inverse`] inverts composite observations for the latent
//! maps, and [`evaluation`] scores reconstructions.
//!
//! The `parallel` feature (default) runs covariance assembly, likelihood
//! gradients, grid posteriors and restarts on rayon. Results are
//! bit-identical to [`par::Exec::Sequential`].

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod fivebar;
pub mod forward;
pub mod geometry;
pub mod inverse;
pub mod linalg;
pub mod par;
pub mod stress_field;

pub use error::{Result, RftError};
pub use evaluation::{
    reconstruction_metrics, sampled_region_mask, sampling_diagnostics, MetricsReport,
    SamplingDiagnostics,
};
pub use fivebar::{fivebar_jacobian, force_to_torque, torque_to_force, FiveBarParams};
pub use forward::{
    assemble_dataset, forward_force, inject_noise, preprocess_force_log, CompositeDataset,
    ForceSample, ObservationMode,
};
pub use geometry::{
    make_toe, make_trajectory, segment_states, SegmentState, SegmentStateSeries, ToeGeometry,
    Trajectory,
};
pub use inverse::{
    fit_hyperparameters, fit_residual, fit_scaling, GpModel, Hyperparameters, KernelConfig,
};
pub use par::Exec;
pub use stress_field::{eval_map, sample_prior_map, scale_map, Component, GridAxes, GridStressMap};
