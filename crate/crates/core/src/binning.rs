//! Nearest-neighbour binning of scattered observations onto a uniform grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DataGrid, GridDims};
use crate::numeric::KahanSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub cx: f64,
    pub cy: f64,
    pub obs: Vec<f64>,
}

/// Axis-aligned bounding box of the scatter, used to map cells back to the
/// input coordinate system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn of(points: &[ScatterPoint]) -> Option<Self> {
        let first = points.first()?;
        let mut b = BoundingBox {
            x_min: first.cx,
            x_max: first.cx,
            y_min: first.cy,
            y_max: first.cy,
        };
        for pt in points {
            b.x_min = b.x_min.min(pt.cx);
            b.x_max = b.x_max.max(pt.cx);
            b.y_min = b.y_min.min(pt.cy);
            b.y_max = b.y_max.max(pt.cy);
        }
        Some(b)
    }

    /// Input-space x coordinate of a (possibly fractional) width index on a
    /// `tw`-cell grid; integer `w` gives the cell centre.
    pub fn cell_x(&self, w: f64, tw: usize) -> f64 {
        self.x_min + (w - 0.5) / tw as f64 * (self.x_max - self.x_min)
    }

    pub fn cell_y(&self, h: f64, th: usize) -> f64 {
        self.y_min + (h - 0.5) / th as f64 * (self.y_max - self.y_min)
    }
}

/// Bins scattered points onto a `tw x th` grid spanning their bounding box.
///
/// Coordinates are first rescaled so the bounding box becomes the unit
/// square. Cell `(w, h)` takes the mean observation of the `k` points closest
/// to its centre `((w - 0.5)/tw, (h - 0.5)/th)`; equal distances are resolved
/// by input order.
pub fn bin_scatter_to_grid(points: &[ScatterPoint], dims: GridDims, k: usize) -> Result<DataGrid> {
    if points.is_empty() {
        return Err(Error::invalid("no scatter points"));
    }
    if k == 0 {
        return Err(Error::invalid("k_neighbors must be positive"));
    }
    if points.len() < k {
        return Err(Error::invalid(format!(
            "{} points is fewer than k_neighbors = {k}",
            points.len()
        )));
    }
    if dims.tw == 0 || dims.th == 0 {
        return Err(Error::invalid("grid dimensions must be positive"));
    }
    let p = points[0].obs.len();
    if p == 0 {
        return Err(Error::invalid("observations must have at least one component"));
    }
    if let Some(bad) = points.iter().find(|pt| pt.obs.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: bad.obs.len(),
        });
    }
    let bbox = BoundingBox::of(points).expect("nonempty");
    let sx = bbox.x_max - bbox.x_min;
    let sy = bbox.y_max - bbox.y_min;
    if !(sx > 0.0 && sy > 0.0) {
        return Err(Error::invalid("bounding box of the scatter is degenerate"));
    }
    let unit: Vec<(f64, f64)> = points
        .iter()
        .map(|pt| ((pt.cx - bbox.x_min) / sx, (pt.cy - bbox.y_min) / sy))
        .collect();

    let mut order: Vec<(f64, usize)> = Vec::with_capacity(points.len());
    DataGrid::from_fn(dims.tw, dims.th, p, |w, h| {
        let cx = (w as f64 - 0.5) / dims.tw as f64;
        let cy = (h as f64 - 0.5) / dims.th as f64;
        order.clear();
        order.extend(
            unit.iter()
                .enumerate()
                .map(|(i, (x, y))| ((x - cx).powi(2) + (y - cy).powi(2), i)),
        );
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, cmp);
        }
        let mut acc = vec![KahanSum::new(); p];
        for &(_, i) in &order[..k] {
            for (a, v) in acc.iter_mut().zip(&points[i].obs) {
                a.add(*v);
            }
        }
        acc.iter().map(|a| a.value() / k as f64).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(cx: f64, cy: f64, obs: Vec<f64>) -> ScatterPoint {
        ScatterPoint { cx, cy, obs }
    }

    #[test]
    fn lattice_passthrough_with_k1() {
        let mut pts = Vec::new();
        for w in 1..=6 {
            for h in 1..=4 {
                pts.push(pt(w as f64 * 2.0, h as f64 - 10.0, vec![(w * 10 + h) as f64]));
            }
        }
        let g = bin_scatter_to_grid(&pts, GridDims::new(6, 4), 1).unwrap();
        for w in 1..=6 {
            for h in 1..=4 {
                assert_eq!(g.cell(w, h).unwrap(), &[(w * 10 + h) as f64]);
            }
        }
    }

    #[test]
    fn identical_observations() {
        let pts: Vec<_> = (0..30).map(|i| pt((i * 7 % 11) as f64, (i * 5 % 13) as f64, vec![2.5, -1.0])).collect();
        let g = bin_scatter_to_grid(&pts, GridDims::new(4, 3), 5).unwrap();
        for (_, c) in g.iter_cells() {
            assert!((c[0] - 2.5).abs() < 1e-15 && (c[1] + 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        assert!(bin_scatter_to_grid(&[], GridDims::new(2, 2), 1).is_err());
        let pts = vec![pt(0.0, 0.0, vec![1.0]), pt(1.0, 1.0, vec![1.0])];
        assert!(bin_scatter_to_grid(&pts, GridDims::new(2, 2), 3).is_err());
        let flat = vec![pt(0.0, 1.0, vec![1.0]), pt(1.0, 1.0, vec![1.0])];
        assert!(bin_scatter_to_grid(&flat, GridDims::new(2, 2), 1).is_err());
    }

    #[test]
    fn ties_resolve_by_input_order() {
        // centre of the single cell is equidistant from all four corners
        let pts = vec![
            pt(0.0, 0.0, vec![1.0]),
            pt(1.0, 0.0, vec![2.0]),
            pt(0.0, 1.0, vec![4.0]),
            pt(1.0, 1.0, vec![8.0]),
        ];
        let g = bin_scatter_to_grid(&pts, GridDims::new(1, 1), 2).unwrap();
        assert_eq!(g.cell(1, 1).unwrap(), &[1.5]);
    }
}
