//! Estimation, inference and quarterly segmentation for two-dimensional
//! change points in high-dimensional mean fields observed on a grid.
//!
//! The model is a `tw x th` grid of `p`-dimensional observations whose mean
//! is constant on each of the four quadrants cut out by a change point
//! `(tau_w, tau_h)`. The crate provides
//!
//! * [`grid`]: the data model, quadrant algebra and the squared loss,
//! * [`estimator`]: soft-thresholded quadrant means with BIC tuning and the
//!   two-step plug-in estimators (with and without boundary selection),
//! * [`segtree`]: recursive quarterly segmentation into a hierarchy of
//!   change points and the piecewise-constant reconstruction,
//! * [`inference`]: plug-in jump and variance estimates and confidence
//!   intervals under the vanishing and non-vanishing jump regimes,
//! * [`sim`]: the Toeplitz-Gaussian simulation design and a replication
//!   harness for bias, RMSE and coverage.

pub mod binning;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod image_io;
pub mod inference;
pub mod io;
pub mod numeric;
pub mod segtree;
pub mod sim;

pub use error::{Error, Result};
pub use grid::{ChangePoint, DataGrid, GridDims, Quadrant, QuadrantEstimate};

/// Version tag written into every JSON document.
pub const SCHEMA: &str = "gridseg/v1";
