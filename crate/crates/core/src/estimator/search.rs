//! Component-wise plug-in search for one change coordinate with the other
//! coordinate and the quadrant means held fixed.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::grid::{DataGrid, Quadrant, QuadrantEstimate};
use crate::numeric::{argmin_first, sq_dist, KahanSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Width,
    Height,
}

impl Axis {
    pub fn period(self, grid: &DataGrid) -> usize {
        match self {
            Axis::Width => grid.tw(),
            Axis::Height => grid.th(),
        }
    }
}

/// Loss `L(tau, other, est)` for every `tau` in `1..=T` along `axis`, where
/// `other` fixes the remaining coordinate. Entry `i` is the loss at `tau = i + 1`.
///
/// Runs in a single pass over the grid: per-line costs for the lower side
/// (`<= tau`) and upper side (`> tau`) are accumulated, then combined with
/// prefix and suffix sums.
pub fn loss_profile(grid: &DataGrid, axis: Axis, other: usize, est: &QuadrantEstimate) -> Result<Vec<f64>> {
    let period = axis.period(grid);
    let other_period = match axis {
        Axis::Width => grid.th(),
        Axis::Height => grid.tw(),
    };
    if other == 0 || other > other_period {
        return Err(Error::invalid(format!(
            "fixed coordinate {other} is outside 1..={other_period}"
        )));
    }
    if let Some(p) = est.p() {
        if p != grid.p() {
            return Err(Error::DimensionMismatch { expected: grid.p(), got: p });
        }
    }

    // Quadrant used by a cell on the lower/upper side of the scanned axis,
    // split by its position relative to `other`.
    let (lower, upper) = match axis {
        // w <= tau_w: Q3 below tau_h, Q2 above; w > tau_w: Q4 below, Q1 above
        Axis::Width => ([Quadrant::Q3, Quadrant::Q2], [Quadrant::Q4, Quadrant::Q1]),
        // h <= tau_h: Q3 left of tau_w, Q4 right; h > tau_h: Q2 left, Q1 right
        Axis::Height => ([Quadrant::Q3, Quadrant::Q4], [Quadrant::Q2, Quadrant::Q1]),
    };
    let other_split_exists = other < other_period;
    let needs_upper = period > 1;
    let fetch = |q: Quadrant, needed: bool| -> Result<&[f64]> {
        if needed {
            est.require(q)
        } else {
            Ok(est.mean(q).unwrap_or(&[]))
        }
    };
    let lo = [fetch(lower[0], true)?, fetch(lower[1], other_split_exists)?];
    let hi = [
        fetch(upper[0], needs_upper)?,
        fetch(upper[1], needs_upper && other_split_exists)?,
    ];

    let mut lower_cost = vec![KahanSum::new(); period];
    let mut upper_cost = vec![KahanSum::new(); period];
    for ((w, h), x) in grid.iter_cells() {
        let (line, pos) = match axis {
            Axis::Width => (w, h),
            Axis::Height => (h, w),
        };
        let side = usize::from(pos > other);
        lower_cost[line - 1].add(sq_dist(x, lo[side]));
        if needs_upper {
            upper_cost[line - 1].add(sq_dist(x, hi[side]));
        }
    }

    let n = grid.cells() as f64;
    let mut suffix = vec![0.0; period + 1];
    let mut acc = KahanSum::new();
    for t in (0..period).rev() {
        acc.add(upper_cost[t].value());
        suffix[t] = acc.value();
    }
    let mut prefix = KahanSum::new();
    let mut profile = Vec::with_capacity(period);
    for t in 0..period {
        prefix.add(lower_cost[t].value());
        profile.push((prefix.value() + suffix[t + 1]) / n);
    }
    Ok(profile)
}

/// Default interior search range `1..=T-1`.
pub fn interior(period: usize) -> RangeInclusive<usize> {
    1..=period.saturating_sub(1)
}

fn argmin_axis(
    grid: &DataGrid,
    axis: Axis,
    other: usize,
    est: &QuadrantEstimate,
    search: RangeInclusive<usize>,
) -> Result<usize> {
    let period = axis.period(grid);
    let (lo, hi) = (*search.start(), *search.end());
    if search.is_empty() || lo == 0 {
        return Err(Error::EmptySearch);
    }
    if hi > period {
        return Err(Error::invalid(format!("search range {lo}..={hi} exceeds period {period}")));
    }
    let profile = loss_profile(grid, axis, other, est)?;
    let idx = argmin_first(&profile[lo - 1..hi]).ok_or(Error::EmptySearch)?;
    Ok(lo + idx)
}

/// `argmin_{tau_w in search} L(tau_w, tau_h, est)`, smallest index on ties.
pub fn argmin_width(
    grid: &DataGrid,
    tau_h: usize,
    est: &QuadrantEstimate,
    search: RangeInclusive<usize>,
) -> Result<usize> {
    argmin_axis(grid, Axis::Width, tau_h, est, search)
}

/// `argmin_{tau_h in search} L(tau_w, tau_h, est)`, smallest index on ties.
pub fn argmin_height(
    grid: &DataGrid,
    tau_w: usize,
    est: &QuadrantEstimate,
    search: RangeInclusive<usize>,
) -> Result<usize> {
    argmin_axis(grid, Axis::Height, tau_w, est, search)
}
