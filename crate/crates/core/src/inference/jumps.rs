use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ChangePoint, DataGrid, GridDims, Quadrant, QuadrantEstimate, QuadrantStats};
use crate::numeric::sq_norm;

/// Sample quadrant means at `tau` restricted to the given supports (0-based
/// component indices); components outside a support are zero.
pub fn refit_means(grid: &DataGrid, tau: ChangePoint, supports: &[Vec<usize>; 4]) -> Result<QuadrantEstimate> {
    let stats = QuadrantStats::compute(grid, tau)?;
    let p = grid.p();
    let mut theta: [Option<Vec<f64>>; 4] = Default::default();
    for q in Quadrant::ALL {
        let j = q.index();
        if let Some(&k) = supports[j].iter().find(|&&k| k >= p) {
            return Err(Error::invalid(format!("support index {k} is outside 0..{p}")));
        }
        match &stats.means[j] {
            Some(m) => {
                let mut t = vec![0.0; p];
                for &k in &supports[j] {
                    t[k] = m[k];
                }
                theta[j] = Some(t);
            }
            None if !supports[j].is_empty() => {
                return Err(Error::invalid(format!(
                    "quadrant Q{} is empty but has a nonempty support",
                    q.number()
                )))
            }
            None => {}
        }
    }
    QuadrantEstimate::new(theta)
}

/// Jump vectors across the four quadrant borders and their proportion
/// weighted directional sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpProfile {
    /// `eta_1 = theta_2 - theta_1`, `eta_2 = theta_3 - theta_2`,
    /// `eta_3 = theta_3 - theta_4`, `eta_4 = theta_1 - theta_4`.
    pub eta: [Vec<f64>; 4],
    /// `xi_j = ||eta_j||_2`.
    pub xi: [f64; 4],
    /// `(tw - tau_w) / tw`
    pub omega_w: f64,
    /// `(th - tau_h) / th`
    pub omega_h: f64,
    /// `omega_h xi_1^2 + (1 - omega_h) xi_3^2`
    pub xi_w2: f64,
    /// `omega_w xi_4^2 + (1 - omega_w) xi_2^2`
    pub xi_h2: f64,
    /// `max_j ||eta_j||_inf`
    pub psi: f64,
}

pub fn jump_profile(est: &QuadrantEstimate, tau: ChangePoint, dims: GridDims) -> Result<JumpProfile> {
    tau.check(dims)?;
    if !tau.is_interior(dims) {
        return Err(Error::InferenceRefused(format!(
            "change point ({}, {}) lies on the boundary of the {}x{} grid",
            tau.tau_w, tau.tau_h, dims.tw, dims.th
        )));
    }
    let t1 = est.require(Quadrant::Q1)?;
    let t2 = est.require(Quadrant::Q2)?;
    let t3 = est.require(Quadrant::Q3)?;
    let t4 = est.require(Quadrant::Q4)?;
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let eta = [diff(t2, t1), diff(t3, t2), diff(t3, t4), diff(t1, t4)];
    let xi = std::array::from_fn(|j| sq_norm(&eta[j]).sqrt());
    let omega_w = (dims.tw - tau.tau_w) as f64 / dims.tw as f64;
    let omega_h = (dims.th - tau.tau_h) as f64 / dims.th as f64;
    let xi_w2 = omega_h * xi[0] * xi[0] + (1.0 - omega_h) * xi[2] * xi[2];
    let xi_h2 = omega_w * xi[3] * xi[3] + (1.0 - omega_w) * xi[1] * xi[1];
    let psi = eta.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(JumpProfile {
        eta,
        xi,
        omega_w,
        omega_h,
        xi_w2,
        xi_h2,
        psi,
    })
}

/// `(1 / (tw th)) sum_j sum_{Q_j} (x - theta_j)(x - theta_j)^T`.
pub fn sample_covariance(grid: &DataGrid, tau: ChangePoint, est: &QuadrantEstimate) -> Result<DMatrix<f64>> {
    tau.check(grid.dims())?;
    let p = grid.p();
    if est.p().is_some_and(|q| q != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: est.p().unwrap_or(0),
        });
    }
    let counts = crate::grid::quadrant_counts(grid.dims(), tau);
    let mut thetas: [&[f64]; 4] = [&[]; 4];
    for q in Quadrant::ALL {
        if counts[q.index()] > 0 {
            thetas[q.index()] = est.require(q)?;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(p, p);
    let mut r = DVector::<f64>::zeros(p);
    for ((w, h), x) in grid.iter_cells() {
        let t = thetas[Quadrant::of(w, h, tau).index()];
        for k in 0..p {
            r[k] = x[k] - t[k];
        }
        cov.syger(1.0, &r, &r, 1.0);
    }
    cov.fill_upper_triangle_with_lower_triangle();
    cov /= grid.cells() as f64;
    Ok(cov)
}

/// Plug-in asymptotic variances of the two change coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticVariances {
    pub sigma2_w: f64,
    pub sigma2_h: f64,
    #[serde(skip)]
    pub cov_hat: DMatrix<f64>,
}

fn quad_form(cov: &DMatrix<f64>, v: &[f64]) -> f64 {
    let v = DVector::from_column_slice(v);
    v.dot(&(cov * &v))
}

/// `sigma2_w = [omega_h eta_1' S eta_1 + (1 - omega_h) eta_3' S eta_3] / xi_w2`
/// and symmetrically `sigma2_h` from `eta_4`, `eta_2` and `omega_w`.
pub fn asymptotic_variances(profile: &JumpProfile, cov: &DMatrix<f64>) -> Result<AsymptoticVariances> {
    let p = profile.eta[0].len();
    if cov.nrows() != p || cov.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: cov.nrows(),
        });
    }
    if !(profile.xi_w2 > 0.0) || !(profile.xi_h2 > 0.0) {
        return Err(Error::InferenceRefused(format!(
            "directional jump is zero (xi_w^2 = {}, xi_h^2 = {})",
            profile.xi_w2, profile.xi_h2
        )));
    }
    let q: [f64; 4] = std::array::from_fn(|j| quad_form(cov, &profile.eta[j]));
    let sigma2_w = (profile.omega_h * q[0] + (1.0 - profile.omega_h) * q[2]) / profile.xi_w2;
    let sigma2_h = (profile.omega_w * q[3] + (1.0 - profile.omega_w) * q[1]) / profile.xi_h2;
    Ok(AsymptoticVariances {
        sigma2_w,
        sigma2_h,
        cov_hat: cov.clone(),
    })
}
