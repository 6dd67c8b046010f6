//! Simulation design with Toeplitz-correlated noise and a replication harness
//! reporting bias, RMSE, coverage and average margin of error.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{algorithm1, coarse_init, ThresholdConfig};
use crate::grid::{ChangePoint, DataGrid, GridDims, Quadrant, QuadrantEstimate};
use crate::inference::{derive_seed, infer, ConfidenceIntervals, MonteCarlo};
use crate::numeric::KahanSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    /// Laplace with scale `1/sqrt(2)`.
    Laplace,
    /// `Exp(1) - 1`.
    CenteredExponential,
}

impl NoiseFamily {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            NoiseFamily::Gaussian => StandardNormal.sample(rng),
            NoiseFamily::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln() / std::f64::consts::SQRT_2
            }
            NoiseFamily::CenteredExponential => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Laplace => "laplace",
            NoiseFamily::CenteredExponential => "centered_exponential",
        }
    }
}

impl std::str::FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseFamily::Gaussian),
            "laplace" => Ok(NoiseFamily::Laplace),
            "centered_exponential" | "centered-exponential" | "exponential" => Ok(NoiseFamily::CenteredExponential),
            _ => Err(Error::Parse(format!("unknown noise family '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaPattern {
    /// `theta_1 = theta_3` with `s` leading entries spaced evenly from 0.75
    /// down to 0.25, `theta_2 = theta_4 = 0`.
    Reference,
    Custom([Vec<f64>; 4]),
}

/// `s` evenly spaced values from 0.75 down to 0.25 (a single entry is 0.75).
pub fn leading_entries(s: usize) -> Vec<f64> {
    match s {
        0 => Vec::new(),
        1 => vec![0.75],
        _ => (0..s).map(|k| 0.75 - 0.5 * k as f64 / (s - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub tw: usize,
    pub th: usize,
    pub p: usize,
    pub s: usize,
    pub tau0_frac: [f64; 2],
    pub theta_pattern: ThetaPattern,
    pub rho: f64,
    pub noise: NoiseFamily,
    /// Multiplies the noise; 0 gives the noiseless field.
    pub noise_scale: f64,
    pub n_reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub mc_draws: usize,
}

impl SimDesign {
    /// Defaults of the reference design: 30x30 grid, `p = 10`, `s = 5`,
    /// change at 20% of each axis, `rho = 0.5`, Gaussian noise, 500 reps.
    pub fn reference() -> Self {
        SimDesign {
            tw: 30,
            th: 30,
            p: 10,
            s: 5,
            tau0_frac: [0.2, 0.2],
            theta_pattern: ThetaPattern::Reference,
            rho: 0.5,
            noise: NoiseFamily::Gaussian,
            noise_scale: 1.0,
            n_reps: 500,
            alpha: 0.05,
            seed: 0,
            mc_draws: 4000,
        }
    }

    pub fn dims(&self) -> GridDims {
        GridDims::new(self.tw, self.th)
    }

    pub fn tau0(&self) -> ChangePoint {
        ChangePoint {
            tau_w: (self.tau0_frac[0] * self.tw as f64).floor() as usize,
            tau_h: (self.tau0_frac[1] * self.th as f64).floor() as usize,
        }
    }

    pub fn theta0(&self) -> [Vec<f64>; 4] {
        match &self.theta_pattern {
            ThetaPattern::Reference => {
                let mut v = vec![0.0; self.p];
                v[..self.s].copy_from_slice(&leading_entries(self.s));
                [v.clone(), vec![0.0; self.p], v, vec![0.0; self.p]]
            }
            ThetaPattern::Custom(t) => t.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tw < 4 || self.th < 4 || self.p == 0 {
            return Err(Error::invalid(format!(
                "grid must be at least 4x4 with p >= 1, got {}x{}x{}",
                self.tw, self.th, self.p
            )));
        }
        if self.s > self.p {
            return Err(Error::invalid(format!("s = {} exceeds p = {}", self.s, self.p)));
        }
        if self.tau0_frac.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::invalid("tau fractions must lie in (0, 1]"));
        }
        let tau = self.tau0();
        if tau.tau_w == 0 || tau.tau_h == 0 {
            return Err(Error::invalid("tau fraction too small for the grid"));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::invalid(format!("|rho| must be below 1, got {}", self.rho)));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid("noise scale must be finite and non-negative"));
        }
        if self.n_reps == 0 {
            return Err(Error::invalid("reps must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.mc_draws == 0 {
            return Err(Error::invalid("mc draws must be positive"));
        }
        let theta = self.theta0();
        if theta.iter().any(|t| t.len() != self.p) {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: theta.iter().map(Vec::len).find(|&l| l != self.p).unwrap_or(0),
            });
        }
        Ok(())
    }
}

/// `Sigma[i][j] = rho^|i - j|`.
pub fn toeplitz_covariance(p: usize, rho: f64) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::invalid("p must be positive"));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::invalid(format!("|rho| must be below 1, got {rho}")));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32)))
}

/// Lower Cholesky factor of the Toeplitz covariance.
pub fn toeplitz_factor(p: usize, rho: f64) -> Result<DMatrix<f64>> {
    let sigma = toeplitz_covariance(p, rho)?;
    Cholesky::new(sigma)
        .map(|c| c.l())
        .ok_or_else(|| Error::invalid("covariance is not positive definite"))
}

fn rep_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn generate_with_factor(design: &SimDesign, factor: &DMatrix<f64>, rep: usize) -> Result<(DataGrid, ChangePoint, QuadrantEstimate)> {
    let tau0 = design.tau0();
    let theta = design.theta0();
    let p = design.p;
    let mut rng = rep_rng(design.seed, rep);
    let mut z = DVector::<f64>::zeros(p);
    let grid = DataGrid::from_fn(design.tw, design.th, p, |w, h| {
        for k in 0..p {
            z[k] = design.noise.sample(&mut rng);
        }
        let eps = factor * &z;
        let t = &theta[Quadrant::of(w, h, tau0).index()];
        (0..p).map(|k| t[k] + design.noise_scale * eps[k]).collect()
    })?;
    Ok((grid, tau0, QuadrantEstimate::dense(theta)?))
}

/// One replication of the design: the grid plus the true change point and
/// means. Deterministic in `(design.seed, rep)`.
pub fn generate_grid(design: &SimDesign, rep: usize) -> Result<(DataGrid, ChangePoint, QuadrantEstimate)> {
    design.validate()?;
    let factor = toeplitz_factor(design.p, design.rho)?;
    generate_with_factor(design, &factor, rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub tau_true: ChangePoint,
    pub tau_hat: ChangePoint,
    pub intervals: Option<ConfidenceIntervals>,
    pub refused: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub bias_w: f64,
    pub bias_h: f64,
    pub rmse_w: f64,
    pub rmse_h: f64,
    pub coverage_v_w: f64,
    pub coverage_v_h: f64,
    pub coverage_nv_w: f64,
    pub coverage_nv_h: f64,
    pub avg_me_v_w: f64,
    pub avg_me_v_h: f64,
    pub avg_me_nv_w: f64,
    pub avg_me_nv_h: f64,
    pub n_reps: usize,
    /// Replications whose inference was refused; excluded from coverage
    /// and margin averages.
    pub n_refused: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub metrics: ReplicationMetrics,
    pub records: Vec<RepRecord>,
}

fn run_one(design: &SimDesign, factor: &DMatrix<f64>, config: &ThresholdConfig, rep: usize) -> Result<RepRecord> {
    let (grid, tau_true, _) = generate_with_factor(design, factor, rep)?;
    let init = coarse_init(&grid, config)?;
    let trace = algorithm1(&grid, init, config)?;
    let mc = MonteCarlo {
        n_draws: design.mc_draws,
        seed: derive_seed(design.seed, rep as u64),
    };
    let (intervals, refused) = match infer(&grid, &trace, design.alpha, mc) {
        Ok(r) => (Some(r.intervals), None),
        Err(Error::InferenceRefused(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    Ok(RepRecord {
        rep,
        tau_true,
        tau_hat: trace.final_cp,
        intervals,
        refused,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut s = KahanSum::new();
    let mut n = 0;
    for v in values {
        s.add(v);
        n += 1;
    }
    (if n == 0 { f64::NAN } else { s.value() / n as f64 }, n)
}

/// Aggregates per-replication records. Records are reduced in `rep` order.
pub fn summarize(records: &[RepRecord]) -> ReplicationMetrics {
    let mut recs: Vec<&RepRecord> = records.iter().collect();
    recs.sort_by_key(|r| r.rep);
    let err_w = || recs.iter().map(|r| r.tau_hat.tau_w as f64 - r.tau_true.tau_w as f64);
    let err_h = || recs.iter().map(|r| r.tau_hat.tau_h as f64 - r.tau_true.tau_h as f64);
    let (bias_w, _) = mean(err_w());
    let (bias_h, _) = mean(err_h());
    let rmse_w = mean(err_w().map(|e| e * e)).0.sqrt();
    let rmse_h = mean(err_h().map(|e| e * e)).0.sqrt();
    let ok: Vec<(&RepRecord, &ConfidenceIntervals)> =
        recs.iter().filter_map(|r| r.intervals.as_ref().map(|ci| (*r, ci))).collect();
    let cover = |f: &dyn Fn(&RepRecord, &ConfidenceIntervals) -> bool| {
        mean(ok.iter().map(|(r, ci)| if f(r, ci) { 1.0 } else { 0.0 })).0
    };
    let avg = |f: &dyn Fn(&ConfidenceIntervals) -> f64| mean(ok.iter().map(|(_, ci)| f(ci))).0;
    ReplicationMetrics {
        bias_w,
        bias_h,
        rmse_w,
        rmse_h,
        coverage_v_w: cover(&|r, ci| ci.vanishing_w.contains(r.tau_true.tau_w as f64)),
        coverage_v_h: cover(&|r, ci| ci.vanishing_h.contains(r.tau_true.tau_h as f64)),
        coverage_nv_w: cover(&|r, ci| ci.nonvanishing_w.contains(r.tau_true.tau_w as f64)),
        coverage_nv_h: cover(&|r, ci| ci.nonvanishing_h.contains(r.tau_true.tau_h as f64)),
        avg_me_v_w: avg(&|ci| ci.vanishing_w.margin),
        avg_me_v_h: avg(&|ci| ci.vanishing_h.margin),
        avg_me_nv_w: avg(&|ci| ci.nonvanishing_w.margin),
        avg_me_nv_h: avg(&|ci| ci.nonvanishing_h.margin),
        n_reps: recs.len(),
        n_refused: recs.len() - ok.len(),
    }
}

/// Runs all replications in parallel (each on its own RNG stream) and
/// aggregates them. The result does not depend on the thread count.
pub fn run_replications(design: &SimDesign) -> Result<SimulationResult> {
    run_replications_with(design, &ThresholdConfig::default())
}

pub fn run_replications_with(design: &SimDesign, config: &ThresholdConfig) -> Result<SimulationResult> {
    design.validate()?;
    config.validate()?;
    let factor = toeplitz_factor(design.p, design.rho)?;
    let records = (0..design.n_reps)
        .into_par_iter()
        .map(|rep| run_one(design, &factor, config, rep))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationResult {
        metrics: summarize(&records),
        records,
    })
}

pub const METRICS_HEADER: [&str; 25] = [
    "tw", "th", "p", "s", "tau_w_frac", "tau_h_frac", "rho", "noise", "reps", "alpha", "seed",
    "bias_w", "rmse_w", "coverage_v_w", "avg_me_v_w", "coverage_nv_w", "avg_me_nv_w",
    "bias_h", "rmse_h", "coverage_v_h", "avg_me_v_h", "coverage_nv_h", "avg_me_nv_h",
    "refused", "mc_draws",
];

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

/// Writes the metrics CSV (header plus one row).
pub fn write_metrics_csv<W: Write>(out: W, design: &SimDesign, m: &ReplicationMetrics) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(METRICS_HEADER)?;
    wtr.write_record([
        design.tw.to_string(),
        design.th.to_string(),
        design.p.to_string(),
        design.s.to_string(),
        design.tau0_frac[0].to_string(),
        design.tau0_frac[1].to_string(),
        design.rho.to_string(),
        design.noise.name().to_string(),
        design.n_reps.to_string(),
        design.alpha.to_string(),
        design.seed.to_string(),
        fmt(m.bias_w),
        fmt(m.rmse_w),
        fmt(m.coverage_v_w),
        fmt(m.avg_me_v_w),
        fmt(m.coverage_nv_w),
        fmt(m.avg_me_nv_w),
        fmt(m.bias_h),
        fmt(m.rmse_h),
        fmt(m.coverage_v_h),
        fmt(m.avg_me_v_h),
        fmt(m.coverage_nv_h),
        fmt(m.avg_me_nv_h),
        m.n_refused.to_string(),
        design.mc_draws.to_string(),
    ])?;
    wtr.flush()?;
    Ok(())
}

/// One JSON object per replication, in `rep` order.
pub fn write_records_jsonl<W: Write>(mut out: W, records: &[RepRecord]) -> Result<()> {
    let mut recs: Vec<&RepRecord> = records.iter().collect();
    recs.sort_by_key(|r| r.rep);
    for r in recs {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
