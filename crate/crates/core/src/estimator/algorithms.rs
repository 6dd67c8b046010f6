//! Two-step iterative estimation of a single 2D change point, with and
//! without boundary selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::search::{argmin_height, argmin_width, interior, loss_profile, Axis};
use crate::estimator::threshold::{bic_select_lambda, ThresholdConfig};
use crate::grid::{squared_loss, ChangePoint, DataGrid, GridDims, QuadrantEstimate};
use crate::numeric::argmin_first;

/// Every intermediate quantity of one estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationTrace {
    pub init: ChangePoint,
    /// Thresholded means at `init`.
    pub step1_means: QuadrantEstimate,
    /// Unpenalised interior argmins of step 1.
    pub step1_cp: ChangePoint,
    /// Step 1 after boundary selection; boundary-selecting runs only.
    pub step1_boundary_cp: Option<ChangePoint>,
    /// Thresholded means recomputed in step 2 (absent when both axes chose
    /// the boundary in step 1).
    pub step2_means: Option<QuadrantEstimate>,
    /// Change point at which `step2_means` were computed.
    pub step2_means_at: Option<ChangePoint>,
    pub final_cp: ChangePoint,
    /// Per-quadrant thresholds chosen in step 1 and step 2.
    pub lambda_used: [Option<[f64; 4]>; 2],
    /// `(gamma_w, gamma_h)`; boundary-selecting runs only.
    pub gamma_used: Option<[f64; 2]>,
}

fn check_dims(dims: GridDims) -> Result<()> {
    if dims.tw < 2 || dims.th < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 cells per axis to place a change, got {}x{}",
            dims.tw, dims.th
        )));
    }
    Ok(())
}

/// Candidate coordinates `floor(0.25 T), floor(0.5 T), floor(0.75 T)`.
pub fn coarse_candidates(period: usize) -> [usize; 3] {
    [period / 4, period / 2, (3 * period) / 4]
}

/// Best of the 3x3 coarse candidates by loss under BIC-tuned thresholded
/// means fitted at each candidate. Ties go to the first candidate in
/// row-major order (width outer, height inner).
pub fn coarse_init(grid: &DataGrid, config: &ThresholdConfig) -> Result<ChangePoint> {
    let dims = grid.dims();
    if dims.tw < 4 || dims.th < 4 {
        return Err(Error::InvalidGrid(format!(
            "coarse initialisation needs at least 4x4 cells, got {}x{}",
            dims.tw, dims.th
        )));
    }
    let mut candidates = Vec::with_capacity(9);
    for tau_w in coarse_candidates(dims.tw) {
        for tau_h in coarse_candidates(dims.th) {
            candidates.push(ChangePoint { tau_w, tau_h });
        }
    }
    let losses = candidates
        .iter()
        .map(|&tau| {
            let sel = bic_select_lambda(grid, tau, config)?;
            squared_loss(grid, tau, &sel.est)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = argmin_first(&losses).ok_or(Error::EmptySearch)?;
    Ok(candidates[best])
}

/// Two-step plug-in estimator.
///
/// Step 1 fits thresholded means at `init` and updates each coordinate with
/// the other coordinate of `init` held fixed. Step 2 refits the means at the
/// step 1 point and repeats the update, now holding the step 1 coordinates.
pub fn algorithm1(grid: &DataGrid, init: ChangePoint, config: &ThresholdConfig) -> Result<EstimationTrace> {
    let dims = grid.dims();
    check_dims(dims)?;
    init.check(dims)?;

    let sel1 = bic_select_lambda(grid, init, config)?;
    let step1_cp = ChangePoint {
        tau_w: argmin_width(grid, init.tau_h, &sel1.est, interior(dims.tw))?,
        tau_h: argmin_height(grid, init.tau_w, &sel1.est, interior(dims.th))?,
    };

    let sel2 = bic_select_lambda(grid, step1_cp, config)?;
    let final_cp = ChangePoint {
        tau_w: argmin_width(grid, step1_cp.tau_h, &sel2.est, interior(dims.tw))?,
        tau_h: argmin_height(grid, step1_cp.tau_w, &sel2.est, interior(dims.th))?,
    };

    Ok(EstimationTrace {
        init,
        step1_means: sel1.est,
        step1_cp,
        step1_boundary_cp: None,
        step2_means: Some(sel2.est),
        step2_means_at: Some(step1_cp),
        final_cp,
        lambda_used: [Some(sel1.lambdas), Some(sel2.lambdas)],
        gamma_used: None,
    })
}

/// Boundary penalty `(2 p_eff + 1) * c_bic * log(tw th) / (tw th)`.
///
/// This is the BIC degrees-of-freedom gap between an interior split and the
/// boundary on one axis: two extra mean vectors of size `p_eff` plus one
/// change coordinate.
pub fn boundary_gamma(dims: GridDims, p_eff: usize, c_bic: f64) -> Result<f64> {
    if p_eff == 0 {
        return Err(Error::invalid("p_eff must be at least 1"));
    }
    if !(c_bic >= 0.0) || !c_bic.is_finite() {
        return Err(Error::invalid(format!("c_bic must be finite and non-negative, got {c_bic}")));
    }
    let n = dims.cells() as f64;
    Ok((2 * p_eff + 1) as f64 * c_bic * n.ln() / n)
}

/// Thresholded boundary selection on one axis: the boundary wins when the
/// loss gained by splitting at `interior_argmin` is below `gamma`.
///
/// `profile` is the loss over `1..=T` along the axis.
pub fn select_boundary(profile: &[f64], interior_argmin: usize, gamma: f64) -> usize {
    let period = profile.len();
    let gap = profile[period - 1] - profile[interior_argmin - 1];
    if gap < gamma {
        period
    } else {
        interior_argmin
    }
}

/// Two-step estimator with `0`-penalised boundary selection in step 1.
///
/// An axis that selects its boundary keeps it; the other axis is searched in
/// step 2 with means refitted at the unpenalised step 1 point, holding the
/// selected (possibly boundary) coordinate of the other axis.
pub fn algorithm2(
    grid: &DataGrid,
    init: ChangePoint,
    config: &ThresholdConfig,
    c_bic: f64,
) -> Result<EstimationTrace> {
    let dims = grid.dims();
    check_dims(dims)?;
    init.check(dims)?;

    let sel1 = bic_select_lambda(grid, init, config)?;
    let width_profile = loss_profile(grid, Axis::Width, init.tau_h, &sel1.est)?;
    let height_profile = loss_profile(grid, Axis::Height, init.tau_w, &sel1.est)?;
    let step1_cp = ChangePoint {
        tau_w: 1 + argmin_first(&width_profile[..dims.tw - 1]).ok_or(Error::EmptySearch)?,
        tau_h: 1 + argmin_first(&height_profile[..dims.th - 1]).ok_or(Error::EmptySearch)?,
    };

    let p_eff = sel1.est.union_support_size().max(1);
    let gamma = boundary_gamma(dims, p_eff, c_bic)?;
    let selected = ChangePoint {
        tau_w: select_boundary(&width_profile, step1_cp.tau_w, gamma),
        tau_h: select_boundary(&height_profile, step1_cp.tau_h, gamma),
    };

    let (step2_means, step2_lambda, final_cp) = if selected.is_double_boundary(dims) {
        (None, None, selected)
    } else {
        let sel2 = bic_select_lambda(grid, step1_cp, config)?;
        let tau_w = if selected.width_boundary(dims) {
            dims.tw
        } else {
            argmin_width(grid, selected.tau_h, &sel2.est, interior(dims.tw))?
        };
        let tau_h = if selected.height_boundary(dims) {
            dims.th
        } else {
            argmin_height(grid, selected.tau_w, &sel2.est, interior(dims.th))?
        };
        (Some(sel2.est), Some(sel2.lambdas), ChangePoint { tau_w, tau_h })
    };

    Ok(EstimationTrace {
        init,
        step1_means: sel1.est,
        step1_cp,
        step1_boundary_cp: Some(selected),
        step2_means_at: step2_means.as_ref().map(|_| step1_cp),
        step2_means,
        final_cp,
        lambda_used: [Some(sel1.lambdas), step2_lambda],
        gamma_used: Some([gamma, gamma]),
    })
}
