use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimationTrace;
use crate::grid::{ChangePoint, DataGrid, GridDims};
use crate::inference::jumps::{asymptotic_variances, jump_profile, refit_means, sample_covariance, AsymptoticVariances, JumpProfile};
use crate::inference::quantiles::{rw_argmax_quantile, yao_quantile};

/// Symmetric interval `center +- margin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub margin: f64,
}

impl Interval {
    pub fn around(center: usize, margin: f64) -> Self {
        let c = center as f64;
        Interval {
            lo: c - margin,
            hi: c + margin,
            margin,
        }
    }

    /// Inclusive on both ends.
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub n_draws: usize,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo { n_draws: 4000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceIntervals {
    pub alpha: f64,
    pub vanishing_w: Interval,
    pub vanishing_h: Interval,
    pub nonvanishing_w: Interval,
    pub nonvanishing_h: Interval,
    /// `sqrt(th xi_w^2)`, the jump size driving the width random walk.
    pub xi_w_inf: f64,
    /// `sqrt(tw xi_h^2)`.
    pub xi_h_inf: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic child seed, used to give each axis and each replication an
/// independent Monte Carlo stream.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

fn nonvanishing_margin(xi_inf: f64, sigma2: f64, alpha: f64, mc: MonteCarlo, salt: u64) -> Result<f64> {
    if sigma2 == 0.0 {
        // degenerate walk: pure negative drift, argmax at 0
        return Ok(0.0);
    }
    Ok(rw_argmax_quantile(xi_inf, sigma2, alpha, mc.n_draws, derive_seed(mc.seed, salt))? as f64)
}

/// Intervals for both coordinates under both jump regimes.
pub fn confidence_intervals(
    tau: ChangePoint,
    dims: GridDims,
    profile: &JumpProfile,
    variances: &AsymptoticVariances,
    alpha: f64,
    mc: MonteCarlo,
) -> Result<ConfidenceIntervals> {
    if !(profile.xi_w2 > 0.0 && profile.xi_h2 > 0.0) {
        return Err(Error::InferenceRefused("directional jump is zero".into()));
    }
    let (s2w, s2h) = (variances.sigma2_w, variances.sigma2_h);
    if !(s2w >= 0.0 && s2h >= 0.0) {
        return Err(Error::InferenceRefused(format!("invalid variance estimates ({s2w}, {s2h})")));
    }
    let q = yao_quantile(alpha)?;
    let (tw, th) = (dims.tw as f64, dims.th as f64);
    let me_vw = q * s2w / (th * profile.xi_w2);
    let me_vh = q * s2h / (tw * profile.xi_h2);
    let xi_w_inf = (th * profile.xi_w2).sqrt();
    let xi_h_inf = (tw * profile.xi_h2).sqrt();
    let me_nw = nonvanishing_margin(xi_w_inf, s2w, alpha, mc, 1)?;
    let me_nh = nonvanishing_margin(xi_h_inf, s2h, alpha, mc, 2)?;
    Ok(ConfidenceIntervals {
        alpha,
        vanishing_w: Interval::around(tau.tau_w, me_vw),
        vanishing_h: Interval::around(tau.tau_h, me_vh),
        nonvanishing_w: Interval::around(tau.tau_w, me_nw),
        nonvanishing_h: Interval::around(tau.tau_h, me_nh),
        xi_w_inf,
        xi_h_inf,
    })
}

/// Everything produced by one inference run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub schema: String,
    pub tau: ChangePoint,
    pub xi: [f64; 4],
    pub xi_w2: f64,
    pub xi_h2: f64,
    pub psi: f64,
    pub sigma2_w: f64,
    pub sigma2_h: f64,
    pub intervals: ConfidenceIntervals,
    pub n_draws: usize,
    pub seed: u64,
}

/// Refits the means at the final estimate of `trace` on the supports of its
/// step 2 means, then builds both regimes' intervals.
pub fn infer(grid: &DataGrid, trace: &EstimationTrace, alpha: f64, mc: MonteCarlo) -> Result<InferenceReport> {
    let tau = trace.final_cp;
    if !tau.is_interior(grid.dims()) {
        return Err(Error::InferenceRefused(format!(
            "estimated change point ({}, {}) lies on the boundary",
            tau.tau_w, tau.tau_h
        )));
    }
    let supports = match &trace.step2_means {
        Some(m) => m.supports().clone(),
        None => return Err(Error::InferenceRefused("no step 2 means available".into())),
    };
    let refit = refit_means(grid, tau, &supports)?;
    let profile = jump_profile(&refit, tau, grid.dims())?;
    let cov = sample_covariance(grid, tau, &refit)?;
    let variances = asymptotic_variances(&profile, &cov)?;
    let intervals = confidence_intervals(tau, grid.dims(), &profile, &variances, alpha, mc)?;
    Ok(InferenceReport {
        schema: crate::SCHEMA.to_string(),
        tau,
        xi: profile.xi,
        xi_w2: profile.xi_w2,
        xi_h2: profile.xi_h2,
        psi: profile.psi,
        sigma2_w: variances.sigma2_w,
        sigma2_h: variances.sigma2_h,
        intervals,
        n_draws: mc.n_draws,
        seed: mc.seed,
    })
}
