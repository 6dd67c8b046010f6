//! Single 2D change point estimation.

mod algorithms;
mod search;
mod threshold;

pub use algorithms::{
    algorithm1, algorithm2, boundary_gamma, coarse_candidates, coarse_init, select_boundary, EstimationTrace,
};
pub use search::{argmin_height, argmin_width, interior, loss_profile, Axis};
pub use threshold::{
    bic_select_lambda, equispaced_open, regularized_means, soft_threshold, BicSelection, ThresholdConfig,
};
