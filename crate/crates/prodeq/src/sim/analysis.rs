//! Stationary-shape diagnostics on time-averaged occupancies.
//!
//! The equilibrium condition `n = L(c, n) e^{-beta (c - mu)}` makes
//! `ln(n / L(c, n))` exactly linear in `c`, with slope `-beta` and intercept
//! `beta * mu`. Regressing that quantity over the grid therefore estimates
//! the temperature implied by an equilibrated run, and its R^2 measures how
//! well the chain has converged to the stationary shape. With the unbounded
//! limiter this reduces to a plain `ln n` vs `c` regression (Boltzmann
//! shape).

use crate::model::Limiter;

use super::chain::TimeAverages;
use super::state::ProductivityGrid;
use super::SimError;

/// Ordinary least squares over `(x, y)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub points: usize,
}

pub fn linear_regression(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    let slope_stderr = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        points: n,
    })
}

/// Result of the stationary-shape regression: `slope` estimates `-beta`,
/// `intercept` estimates `beta * mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GLinearity {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub levels_used: usize,
}

/// Regresses `ln(n_mean / L(c, n_mean))` on `c` over the levels with
/// positive mean occupancy and positive limiter value.
pub fn g_linearity_check(
    averages: &TimeAverages,
    limiter: &Limiter,
    grid: &ProductivityGrid,
) -> Result<GLinearity, SimError> {
    g_linearity_from_means(&averages.means(), limiter, grid)
}

/// Same check on a bare slice of per-level means (index 0 = level 1).
pub fn g_linearity_from_means(
    means: &[f64],
    limiter: &Limiter,
    grid: &ProductivityGrid,
) -> Result<GLinearity, SimError> {
    let mut points = Vec::with_capacity(grid.levels());
    for level in 1..=grid.levels().min(means.len()) {
        let mean = means[level - 1];
        if !(mean > 0.0) {
            continue;
        }
        let c = grid.productivity(level);
        let lim = limiter.value(c, mean)?;
        if !(lim > 0.0) {
            continue;
        }
        points.push((c, (mean / lim).ln()));
    }
    let fit =
        linear_regression(&points)
            .filter(|f| f.points >= 3)
            .ok_or(SimError::InsufficientData {
                needed: 3,
                got: points.len(),
            })?;
    Ok(GLinearity {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        slope_stderr: fit.slope_stderr,
        levels_used: fit.points,
    })
}

/// Inverse temperature of the Boltzmann occupancy `n_i ~ e^{-beta c_i}`
/// whose mean level index matches the conserved totals `(N, Y_idx)` on this
/// grid. Used to predict the sign and magnitude of the regression slope for
/// unbounded-limiter runs.
pub fn boltzmann_beta_from_totals(
    grid: &ProductivityGrid,
    workers: u64,
    output_index: u64,
) -> Result<f64, SimError> {
    let m = grid.levels();
    if workers == 0 {
        return Err(SimError::InvalidConfig("no workers".into()));
    }
    let target = output_index as f64 / workers as f64;
    if !(target > 1.0 && target < m as f64) {
        return Err(SimError::InvalidConfig(format!(
            "mean level index {target} pins all workers to an endpoint; no finite \
             temperature matches"
        )));
    }
    // Mean level index under weights e^{theta * i}, evaluated with the
    // largest exponent shifted out.
    let mean_index = |theta: f64| -> f64 {
        let shift = theta * if theta > 0.0 { m as f64 } else { 1.0 };
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..=m {
            let w = (theta * i as f64 - shift).exp();
            num += i as f64 * w;
            den += w;
        }
        num / den
    };
    let (mut lo, mut hi) = (-80.0f64, 80.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_index(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    Ok(-theta / grid.spacing())
}
