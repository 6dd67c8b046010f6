#![allow(dead_code)]

use gridseg::{ChangePoint, DataGrid, QuadrantEstimate};
use rand::Rng;

/// Quadrant number (1..=4) by direct comparison with the change point.
pub fn quadrant_number(w: usize, h: usize, tau: ChangePoint) -> usize {
    match (w > tau.tau_w, h > tau.tau_h) {
        (true, true) => 1,
        (false, true) => 2,
        (false, false) => 3,
        (true, false) => 4,
    }
}

pub fn piecewise(tw: usize, th: usize, tau: ChangePoint, theta: &[Vec<f64>; 4]) -> DataGrid {
    let p = theta[0].len();
    DataGrid::from_fn(tw, th, p, |w, h| theta[quadrant_number(w, h, tau) - 1].clone()).unwrap()
}

pub fn random_theta<R: Rng>(rng: &mut R, p: usize, scale: f64) -> [Vec<f64>; 4] {
    std::array::from_fn(|_| (0..p).map(|_| rng.random_range(-scale..scale)).collect())
}

pub fn noisy<R: Rng>(rng: &mut R, grid: &DataGrid, sd: f64) -> DataGrid {
    let values = grid
        .as_slice()
        .iter()
        .map(|x| x + sd * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    DataGrid::new(grid.tw(), grid.th(), grid.p(), values).unwrap()
}

/// Loss by a plain double loop over cells, normalised by the cell count.
pub fn naive_loss(grid: &DataGrid, tau: ChangePoint, est: &QuadrantEstimate) -> f64 {
    let mut total = 0.0;
    for w in 1..=grid.tw() {
        for h in 1..=grid.th() {
            let q = quadrant_number(w, h, tau);
            let theta = est.theta()[q - 1].as_ref().expect("mean present");
            let x = grid.cell(w, h).unwrap();
            total += x.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    total / (grid.tw() * grid.th()) as f64
}

/// First index of the minimum of `f` over `range`.
pub fn scan_argmin(range: std::ops::RangeInclusive<usize>, mut f: impl FnMut(usize) -> f64) -> usize {
    let mut best = (f64::INFINITY, 0);
    for t in range {
        let v = f(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best.1
}
