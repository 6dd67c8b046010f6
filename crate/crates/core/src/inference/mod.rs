//! Plug-in jump and variance estimates and confidence intervals for the
//! change coordinates.

mod intervals;
mod jumps;
mod quantiles;

pub use intervals::{confidence_intervals, derive_seed, infer, ConfidenceIntervals, InferenceReport, Interval, MonteCarlo};
pub use jumps::{asymptotic_variances, jump_profile, refit_means, sample_covariance, AsymptoticVariances, JumpProfile};
pub use quantiles::{rw_argmax_draws, rw_argmax_quantile, rw_horizon, yao_cdf, yao_quantile};
