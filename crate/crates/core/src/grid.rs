//! Grid data model and quadrant algebra.
//!
//! Cells are addressed 1-based as `(w, h)` with `w` in `1..=tw` along the
//! width axis and `h` in `1..=th` along the height axis. A change point
//! `(tau_w, tau_h)` splits the grid into four quadrants:
//!
//! ```text
//!        h
//!        ^   Q2: w <= tau_w, h > tau_h  |  Q1: w > tau_w, h > tau_h
//!  tau_h +----------------------------- + -----------------------------
//!        |   Q3: w <= tau_w, h <= tau_h |  Q4: w > tau_w, h <= tau_h
//!        +------------------------------+-------------------------------> w
//!                                     tau_w
//! ```
//!
//! `tau_w == tw` means there is no width split (Q1 and Q4 are empty), and
//! likewise `tau_h == th` means there is no height split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{sq_dist, KahanSum};

/// Sampling periods of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub tw: usize,
    pub th: usize,
}

impl GridDims {
    pub fn new(tw: usize, th: usize) -> Self {
        Self { tw, th }
    }

    pub fn cells(&self) -> usize {
        self.tw * self.th
    }
}

/// Dense `tw x th` grid of `p`-dimensional observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataGrid {
    tw: usize,
    th: usize,
    p: usize,
    // column-major over w: cell (w, h) starts at ((w-1) * th + (h-1)) * p
    values: Vec<f64>,
}

impl DataGrid {
    pub fn new(tw: usize, th: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if tw == 0 || th == 0 || p == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive, got {tw}x{th}x{p}"
            )));
        }
        if values.len() != tw * th * p {
            return Err(Error::DimensionMismatch {
                expected: tw * th * p,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let cell = pos / p;
            return Err(Error::InvalidGrid(format!(
                "non-finite value at cell ({}, {}) component {}",
                cell / th + 1,
                cell % th + 1,
                pos % p + 1
            )));
        }
        Ok(Self { tw, th, p, values })
    }

    pub fn zeros(tw: usize, th: usize, p: usize) -> Result<Self> {
        Self::new(tw, th, p, vec![0.0; tw * th * p])
    }

    /// Builds a grid by evaluating `f(w, h)` for every cell (1-based).
    pub fn from_fn<F>(tw: usize, th: usize, p: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Vec<f64>,
    {
        let mut values = Vec::with_capacity(tw * th * p);
        for w in 1..=tw {
            for h in 1..=th {
                let v = f(w, h);
                if v.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        got: v.len(),
                    });
                }
                values.extend_from_slice(&v);
            }
        }
        Self::new(tw, th, p, values)
    }

    pub fn tw(&self) -> usize {
        self.tw
    }

    pub fn th(&self) -> usize {
        self.th
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dims(&self) -> GridDims {
        GridDims::new(self.tw, self.th)
    }

    pub fn cells(&self) -> usize {
        self.tw * self.th
    }

    /// Raw storage, `p` values per cell, cells ordered by `w` then `h`.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn cell(&self, w: usize, h: usize) -> Result<&[f64]> {
        if w == 0 || h == 0 || w > self.tw || h > self.th {
            return Err(Error::CellOutOfBounds {
                w,
                h,
                tw: self.tw,
                th: self.th,
            });
        }
        Ok(self.at(w, h))
    }

    #[inline]
    pub(crate) fn at(&self, w: usize, h: usize) -> &[f64] {
        let start = ((w - 1) * self.th + (h - 1)) * self.p;
        &self.values[start..start + self.p]
    }

    #[inline]
    pub(crate) fn at_mut(&mut self, w: usize, h: usize) -> &mut [f64] {
        let start = ((w - 1) * self.th + (h - 1)) * self.p;
        &mut self.values[start..start + self.p]
    }

    /// Copies the sub-rectangle `[w_lo, w_hi] x [h_lo, h_hi]` (1-based,
    /// inclusive) into a new grid with local coordinates.
    pub fn subgrid(&self, w_lo: usize, w_hi: usize, h_lo: usize, h_hi: usize) -> Result<Self> {
        if w_lo == 0 || h_lo == 0 || w_lo > w_hi || h_lo > h_hi || w_hi > self.tw || h_hi > self.th {
            return Err(Error::InvalidArgument(format!(
                "sub-rectangle [{w_lo},{w_hi}]x[{h_lo},{h_hi}] is not inside the {}x{} grid",
                self.tw, self.th
            )));
        }
        let tw = w_hi - w_lo + 1;
        let th = h_hi - h_lo + 1;
        let mut values = Vec::with_capacity(tw * th * self.p);
        for w in w_lo..=w_hi {
            for h in h_lo..=h_hi {
                values.extend_from_slice(self.at(w, h));
            }
        }
        Self::new(tw, th, self.p, values)
    }

    /// Iterates `((w, h), cell)` in storage order.
    pub fn iter_cells(&self) -> impl Iterator<Item = ((usize, usize), &[f64])> + '_ {
        let th = self.th;
        self.values
            .chunks_exact(self.p)
            .enumerate()
            .map(move |(i, c)| ((i / th + 1, i % th + 1), c))
    }

    /// Component-wise global mean.
    pub fn global_mean(&self) -> Vec<f64> {
        let mut acc = vec![KahanSum::new(); self.p];
        for c in self.values.chunks_exact(self.p) {
            for (a, x) in acc.iter_mut().zip(c) {
                a.add(*x);
            }
        }
        let n = self.cells() as f64;
        acc.iter().map(|a| a.value() / n).collect()
    }
}

/// A candidate or estimated 2D change point. `tau_w == tw` encodes "no width
/// split" and `tau_h == th` encodes "no height split".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChangePoint {
    pub tau_w: usize,
    pub tau_h: usize,
}

impl ChangePoint {
    /// Checked constructor against the grid the point refers to.
    pub fn new(tau_w: usize, tau_h: usize, dims: GridDims) -> Result<Self> {
        let cp = Self { tau_w, tau_h };
        cp.check(dims)?;
        Ok(cp)
    }

    /// The double boundary `(tw, th)`: no split on either axis.
    pub fn boundary(dims: GridDims) -> Self {
        Self {
            tau_w: dims.tw,
            tau_h: dims.th,
        }
    }

    pub fn check(&self, dims: GridDims) -> Result<()> {
        if self.tau_w == 0 || self.tau_h == 0 || self.tau_w > dims.tw || self.tau_h > dims.th {
            return Err(Error::ChangePointOutOfBounds {
                tau_w: self.tau_w,
                tau_h: self.tau_h,
                tw: dims.tw,
                th: dims.th,
            });
        }
        Ok(())
    }

    pub fn width_boundary(&self, dims: GridDims) -> bool {
        self.tau_w == dims.tw
    }

    pub fn height_boundary(&self, dims: GridDims) -> bool {
        self.tau_h == dims.th
    }

    pub fn is_double_boundary(&self, dims: GridDims) -> bool {
        self.width_boundary(dims) && self.height_boundary(dims)
    }

    pub fn is_interior(&self, dims: GridDims) -> bool {
        !self.width_boundary(dims) && !self.height_boundary(dims)
    }
}

/// Quadrant labels, in the usual ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrant {
    /// top-right: `w > tau_w, h > tau_h`
    Q1,
    /// top-left: `w <= tau_w, h > tau_h`
    Q2,
    /// bottom-left: `w <= tau_w, h <= tau_h`
    Q3,
    /// bottom-right: `w > tau_w, h <= tau_h`
    Q4,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Q1, Quadrant::Q2, Quadrant::Q3, Quadrant::Q4];

    #[inline]
    pub fn of(w: usize, h: usize, tau: ChangePoint) -> Self {
        match (w > tau.tau_w, h > tau.tau_h) {
            (true, true) => Quadrant::Q1,
            (false, true) => Quadrant::Q2,
            (false, false) => Quadrant::Q3,
            (true, false) => Quadrant::Q4,
        }
    }

    /// Zero-based position (Q1 -> 0).
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// One-based quadrant number (Q1 -> 1).
    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn from_number(n: usize) -> Option<Self> {
        Self::ALL.get(n.checked_sub(1)?).copied()
    }
}

/// Quadrant cell counts for a change point, without materialising the cells.
pub fn quadrant_counts(dims: GridDims, tau: ChangePoint) -> [usize; 4] {
    let left = tau.tau_w.min(dims.tw);
    let below = tau.tau_h.min(dims.th);
    let right = dims.tw - left;
    let above = dims.th - below;
    [right * above, left * above, left * below, right * below]
}

/// Explicit index sets of the four quadrants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadrantPartition {
    pub index_sets: [Vec<(usize, usize)>; 4],
}

impl QuadrantPartition {
    pub fn counts(&self) -> [usize; 4] {
        [
            self.index_sets[0].len(),
            self.index_sets[1].len(),
            self.index_sets[2].len(),
            self.index_sets[3].len(),
        ]
    }
}

pub fn quadrant_partition(dims: GridDims, tau: ChangePoint) -> Result<QuadrantPartition> {
    tau.check(dims)?;
    let mut index_sets: [Vec<(usize, usize)>; 4] = Default::default();
    for w in 1..=dims.tw {
        for h in 1..=dims.th {
            index_sets[Quadrant::of(w, h, tau).index()].push((w, h));
        }
    }
    Ok(QuadrantPartition { index_sets })
}

/// Per-quadrant sufficient statistics: cell count, component sums and the
/// within-quadrant residual sum of squares about the quadrant mean.
#[derive(Debug, Clone)]
pub struct QuadrantStats {
    pub counts: [usize; 4],
    pub means: [Option<Vec<f64>>; 4],
    pub within_ss: [f64; 4],
}

impl QuadrantStats {
    pub fn compute(grid: &DataGrid, tau: ChangePoint) -> Result<Self> {
        tau.check(grid.dims())?;
        let p = grid.p();
        let mut sums = [(); 4].map(|_| vec![KahanSum::new(); p]);
        let mut counts = [0usize; 4];
        for ((w, h), x) in grid.iter_cells() {
            let q = Quadrant::of(w, h, tau).index();
            counts[q] += 1;
            for (a, v) in sums[q].iter_mut().zip(x) {
                a.add(*v);
            }
        }
        let means: [Option<Vec<f64>>; 4] = std::array::from_fn(|j| {
            (counts[j] > 0).then(|| sums[j].iter().map(|s| s.value() / counts[j] as f64).collect())
        });
        let mut ss = [KahanSum::new(); 4];
        for ((w, h), x) in grid.iter_cells() {
            let q = Quadrant::of(w, h, tau).index();
            if let Some(m) = &means[q] {
                ss[q].add(sq_dist(x, m));
            }
        }
        Ok(Self {
            counts,
            means,
            within_ss: ss.map(|s| s.value()),
        })
    }
}

/// Sample mean of each quadrant; `None` marks an empty quadrant.
pub fn quadrant_means(grid: &DataGrid, tau: ChangePoint) -> Result<[Option<Vec<f64>>; 4]> {
    Ok(QuadrantStats::compute(grid, tau)?.means)
}

/// Four quadrant mean vectors together with their supports (0-based
/// component indices of the nonzero entries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantEstimate {
    theta: [Option<Vec<f64>>; 4],
    supports: [Vec<usize>; 4],
}

impl QuadrantEstimate {
    pub fn new(theta: [Option<Vec<f64>>; 4]) -> Result<Self> {
        let p = theta.iter().flatten().map(Vec::len).next();
        if let Some(p) = p {
            for t in theta.iter().flatten() {
                if t.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        got: t.len(),
                    });
                }
            }
        }
        let supports = std::array::from_fn(|j| {
            theta[j]
                .as_ref()
                .map(|t| t.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, _)| k).collect())
                .unwrap_or_default()
        });
        Ok(Self { theta, supports })
    }

    /// All four quadrants present.
    pub fn dense(theta: [Vec<f64>; 4]) -> Result<Self> {
        Self::new(theta.map(Some))
    }

    pub fn theta(&self) -> &[Option<Vec<f64>>; 4] {
        &self.theta
    }

    pub fn mean(&self, q: Quadrant) -> Option<&[f64]> {
        self.theta[q.index()].as_deref()
    }

    pub fn supports(&self) -> &[Vec<usize>; 4] {
        &self.supports
    }

    /// Dimension of the mean vectors, if any quadrant is present.
    pub fn p(&self) -> Option<usize> {
        self.theta.iter().flatten().map(Vec::len).next()
    }

    /// `max_j |S_j|`.
    pub fn sparsity(&self) -> usize {
        self.supports.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `|S_1 ∪ S_2 ∪ S_3 ∪ S_4|`.
    pub fn union_support_size(&self) -> usize {
        let p = self.p().unwrap_or(0);
        let mut seen = vec![false; p];
        for s in &self.supports {
            for &k in s {
                seen[k] = true;
            }
        }
        seen.into_iter().filter(|b| *b).count()
    }

    pub(crate) fn require(&self, q: Quadrant) -> Result<&[f64]> {
        self.mean(q).ok_or(Error::MissingQuadrantMean(q.number()))
    }
}

/// `(1 / (tw*th)) * sum_j sum_{Q_j(tau)} ||x - theta_j||^2`. Means of empty
/// quadrants are never consulted.
pub fn squared_loss(grid: &DataGrid, tau: ChangePoint, est: &QuadrantEstimate) -> Result<f64> {
    Ok(residual_sum_of_squares(grid, tau, est)? / grid.cells() as f64)
}

/// Unnormalised residual sum of squares behind [`squared_loss`].
pub fn residual_sum_of_squares(
    grid: &DataGrid,
    tau: ChangePoint,
    est: &QuadrantEstimate,
) -> Result<f64> {
    tau.check(grid.dims())?;
    if let Some(p) = est.p() {
        if p != grid.p() {
            return Err(Error::DimensionMismatch {
                expected: grid.p(),
                got: p,
            });
        }
    }
    let counts = quadrant_counts(grid.dims(), tau);
    let mut thetas: [&[f64]; 4] = [&[]; 4];
    for q in Quadrant::ALL {
        if counts[q.index()] > 0 {
            thetas[q.index()] = est.require(q)?;
        }
    }
    let mut acc = KahanSum::new();
    for ((w, h), x) in grid.iter_cells() {
        acc.add(sq_dist(x, thetas[Quadrant::of(w, h, tau).index()]));
    }
    Ok(acc.value())
}

/// Subtracts the component-wise global mean from every cell.
pub fn center_grid(grid: &DataGrid) -> DataGrid {
    let mean = grid.global_mean();
    let mut out = grid.clone();
    for c in out.values.chunks_exact_mut(grid.p) {
        for (v, m) in c.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    out
}
