//! Soft-thresholded quadrant means and BIC tuning of the threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ChangePoint, DataGrid, QuadrantEstimate, QuadrantStats};
use crate::numeric::TIE_RTOL;

/// Candidate thresholds for BIC tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Ascending, finite, non-negative candidate values.
    pub lambda_grid: Vec<f64>,
    /// One threshold for all four quadrants.
    pub shared_lambda: bool,
    /// Response dimensions at or below this skip thresholding entirely and
    /// use plain sample means.
    pub dense_max_p: usize,
}

impl Default for ThresholdConfig {
    /// 25 equally spaced values in the open interval (0, 0.5), shared across
    /// quadrants, dense mode for `p <= 3`.
    fn default() -> Self {
        Self {
            lambda_grid: equispaced_open(0.5, 25),
            shared_lambda: true,
            dense_max_p: 3,
        }
    }
}

/// `n` equally spaced points strictly inside `(0, upper)`.
pub fn equispaced_open(upper: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| upper * k as f64 / (n + 1) as f64).collect()
}

impl ThresholdConfig {
    pub fn new(lambda_grid: Vec<f64>, shared_lambda: bool) -> Result<Self> {
        let cfg = Self {
            lambda_grid,
            shared_lambda,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Grid of `n` points in `(0, upper)` where `upper` is the largest
    /// absolute component of the global mean (0.5 if that is zero).
    pub fn auto_scaled(grid: &DataGrid, n: usize) -> Self {
        let upper = grid.global_mean().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let upper = if upper > 0.0 { upper } else { 0.5 };
        Self {
            lambda_grid: equispaced_open(upper, n),
            ..Self::default()
        }
    }

    pub fn with_dense_max_p(mut self, dense_max_p: usize) -> Self {
        self.dense_max_p = dense_max_p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::invalid("lambda grid is empty"));
        }
        if self.lambda_grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::invalid("lambda values must be finite and non-negative"));
        }
        if self.lambda_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("lambda grid must be ascending"));
        }
        Ok(())
    }

    pub(crate) fn is_dense(&self, p: usize) -> bool {
        p <= self.dense_max_p
    }
}

/// Component-wise `sign(x) * max(|x| - lambda, 0)`.
pub fn soft_threshold(x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("threshold must be non-negative, got {lambda}")));
    }
    Ok(x.iter().map(|&v| shrink(v, lambda)).collect())
}

#[inline]
fn shrink(v: f64, lambda: f64) -> f64 {
    let m = v.abs() - lambda;
    if m > 0.0 {
        m.copysign(v)
    } else {
        0.0
    }
}

/// Soft-thresholded quadrant means at `tau`; empty quadrants stay absent.
pub fn regularized_means(grid: &DataGrid, tau: ChangePoint, lambdas: [f64; 4]) -> Result<QuadrantEstimate> {
    let stats = QuadrantStats::compute(grid, tau)?;
    threshold_means(&stats.means, lambdas)
}

fn threshold_means(means: &[Option<Vec<f64>>; 4], lambdas: [f64; 4]) -> Result<QuadrantEstimate> {
    let mut theta: [Option<Vec<f64>>; 4] = Default::default();
    for j in 0..4 {
        if let Some(m) = &means[j] {
            theta[j] = Some(soft_threshold(m, lambdas[j])?);
        }
    }
    QuadrantEstimate::new(theta)
}

/// Result of BIC threshold selection at a fixed change point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicSelection {
    /// Selected threshold per quadrant (all equal when shared).
    pub lambdas: [f64; 4],
    pub est: QuadrantEstimate,
    /// Criterion value at the selected threshold(s).
    pub bic: f64,
}

impl BicSelection {
    pub fn lambda(&self) -> f64 {
        self.lambdas[0]
    }
}

/// Selects the threshold minimising
/// `sum_j sum_{Q_j} ||x - theta_j(lambda)||^2 + |S(lambda)| * log(tw * th)`
/// where `S` is the union support. Near-ties go to the larger threshold.
///
/// With `shared_lambda == false` each quadrant is tuned separately on its own
/// residual plus `|S_j| * log(tw * th)`. In dense mode the threshold is 0.
pub fn bic_select_lambda(grid: &DataGrid, tau: ChangePoint, config: &ThresholdConfig) -> Result<BicSelection> {
    config.validate()?;
    let stats = QuadrantStats::compute(grid, tau)?;
    let log_n = (grid.cells() as f64).ln();
    let p = grid.p();

    // residual of quadrant j at threshold lambda, via
    // sum ||x - t||^2 = within_ss + n * ||mean - t||^2
    let quadrant_rss = |j: usize, lambda: f64| -> f64 {
        match &stats.means[j] {
            Some(m) => {
                let shrunk: f64 = m.iter().map(|&v| (v - shrink(v, lambda)).powi(2)).sum();
                stats.within_ss[j] + stats.counts[j] as f64 * shrunk
            }
            None => 0.0,
        }
    };
    let union_support = |lambdas: [f64; 4]| -> usize {
        (0..p)
            .filter(|&k| (0..4).any(|j| stats.means[j].as_ref().is_some_and(|m| m[k].abs() > lambdas[j])))
            .count()
    };

    let candidates: Vec<f64> = if config.is_dense(p) {
        vec![0.0]
    } else {
        config.lambda_grid.clone()
    };

    let lambdas = if config.shared_lambda || config.is_dense(p) {
        let scores: Vec<f64> = candidates
            .iter()
            .map(|&l| (0..4).map(|j| quadrant_rss(j, l)).sum::<f64>() + union_support([l; 4]) as f64 * log_n)
            .collect();
        [candidates[argmin_last(&scores)]; 4]
    } else {
        std::array::from_fn(|j| {
            let scores: Vec<f64> = candidates
                .iter()
                .map(|&l| {
                    let support = stats.means[j]
                        .as_ref()
                        .map_or(0, |m| m.iter().filter(|v| v.abs() > l).count());
                    quadrant_rss(j, l) + support as f64 * log_n
                })
                .collect();
            candidates[argmin_last(&scores)]
        })
    };

    let est = threshold_means(&stats.means, lambdas)?;
    let bic = (0..4).map(|j| quadrant_rss(j, lambdas[j])).sum::<f64>() + union_support(lambdas) as f64 * log_n;
    Ok(BicSelection { lambdas, est, bic })
}

/// Position of the minimum, resolving near-ties toward the last position.
fn argmin_last(values: &[f64]) -> usize {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = TIE_RTOL * scale;
    values.iter().rposition(|&v| v <= min + tol).unwrap_or(0)
}
