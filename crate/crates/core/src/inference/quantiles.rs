use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

fn std_normal_lower(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// CDF `G(x) = P(Z <= x)` of `Z = argmax_t { W(t) - |t| / 2 }` with `W` a
/// two-sided standard Brownian motion.
pub fn yao_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 1.0 - yao_cdf(-x);
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    let r = x.sqrt();
    let g = 1.0 + (x / (2.0 * std::f64::consts::PI)).sqrt() * (-x / 8.0).exp()
        - 0.5 * (x + 5.0) * std_normal_lower(-r / 2.0)
        + 1.5 * x.exp() * std_normal_lower(-1.5 * r);
    g.clamp(0.5, 1.0)
}

/// `q` with `P(|Z| <= q) = 1 - alpha`, found by bisection on the closed form CDF.
pub fn yao_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let target = 1.0 - alpha / 2.0;
    let mut hi = 1.0;
    while yao_cdf(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::invalid(format!("alpha {alpha} is too small to resolve")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if yao_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest integer horizon `H` with `H xi^2 >= 10 sqrt(4 H xi^2 sigma^2)`,
/// padded by 50 steps.
pub fn rw_horizon(xi_inf: f64, sigma2_inf: f64) -> usize {
    let xi2 = xi_inf * xi_inf;
    let mut h = ((400.0 * sigma2_inf / xi2).ceil().max(1.0)) as usize;
    while h > 1 && (h - 1) as f64 * xi2 >= 10.0 * (4.0 * (h - 1) as f64 * xi2 * sigma2_inf).sqrt() {
        h -= 1;
    }
    while (h as f64) * xi2 < 10.0 * (4.0 * h as f64 * xi2 * sigma2_inf).sqrt() {
        h += 1;
    }
    h + 50
}

fn check_rw(xi_inf: f64, sigma2_inf: f64) -> Result<()> {
    if !(xi_inf > 0.0 && xi_inf.is_finite()) || !(sigma2_inf > 0.0 && sigma2_inf.is_finite()) {
        return Err(Error::invalid(format!(
            "random walk parameters must be positive and finite, got xi = {xi_inf}, sigma^2 = {sigma2_inf}"
        )));
    }
    Ok(())
}

/// Argmax locations of independent draws of the two-sided random walk with
/// increments `N(-xi^2, 4 xi^2 sigma^2)` on both branches. Ties go toward 0,
/// then to the negative side. Draw `i` uses its own RNG stream.
pub fn rw_argmax_draws(xi_inf: f64, sigma2_inf: f64, n_draws: usize, seed: u64) -> Result<Vec<i64>> {
    check_rw(xi_inf, sigma2_inf)?;
    if n_draws == 0 {
        return Err(Error::invalid("n_draws must be positive"));
    }
    let xi2 = xi_inf * xi_inf;
    let step = Normal::new(-xi2, 2.0 * xi_inf * sigma2_inf.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let horizon = rw_horizon(xi_inf, sigma2_inf);
    let branch = |rng: &mut ChaCha8Rng| -> (f64, usize) {
        let (mut s, mut best, mut pos) = (0.0, 0.0, 0);
        for t in 1..=horizon {
            s += step.sample(rng);
            if s > best {
                best = s;
                pos = t;
            }
        }
        (best, pos)
    };
    let mut out = Vec::with_capacity(n_draws);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n_draws {
        rng.set_stream(i as u64);
        rng.set_word_pos(0);
        let (right, rpos) = branch(&mut rng);
        let (left, lpos) = branch(&mut rng);
        let z = if right > left || (right == left && rpos < lpos) {
            rpos as i64
        } else {
            -(lpos as i64)
        };
        out.push(z);
    }
    Ok(out)
}

/// Empirical `(1 - alpha/2)` quantile of the random-walk argmax, floored at 0.
pub fn rw_argmax_quantile(xi_inf: f64, sigma2_inf: f64, alpha: f64, n_draws: usize, seed: u64) -> Result<u64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut draws = rw_argmax_draws(xi_inf, sigma2_inf, n_draws, seed)?;
    draws.sort_unstable();
    let k = ((1.0 - alpha / 2.0) * n_draws as f64).ceil() as usize;
    let q = draws[k.clamp(1, n_draws) - 1];
    Ok(q.max(0) as u64)
}
