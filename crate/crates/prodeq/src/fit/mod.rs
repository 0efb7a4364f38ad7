//! Four-parameter chi-square estimation of `(beta, mu, A, gamma)` from a
//! binned mean-occupancy curve.
//!
//! Residuals are taken in log space: the curve spans several decades in
//! mean occupancy, and linear residuals would let the peak region dominate
//! the objective. Weights default to 1 per bin; callers with count
//! statistics can supply per-bin weights. The optimizer works on
//! `(beta, mu, ln A, gamma)` so the reported amplitude is always positive,
//! and runs a derivative-free simplex descent from a grid of starts because
//! the objective has a long `beta`-`mu` ridge (only their product is
//! sharply constrained) that traps single-start descents.

mod simplex;

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, ModelParams};
use simplex::{nelder_mead, SimplexOptions};

/// Added to the objective for each bin where the model cannot be evaluated,
/// keeping the surface finite and traversable for the optimizer.
pub const BAD_BIN_PENALTY: f64 = 1e12;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("ill-posed fit: {0}")]
    IllPosed(String),
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One log-binned point: bin-center productivity, mean workers per firm,
/// and a weight (typically the firm count behind the mean).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    pub c_center: f64,
    pub n_mean: f64,
    pub weight: f64,
}

/// A mean-occupancy curve: bins sorted by strictly increasing `c_center`,
/// all means and weights positive.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCurve {
    bins: Vec<CurveBin>,
}

impl BinnedCurve {
    /// Validates and sorts the bins by `c_center`.
    pub fn new(mut bins: Vec<CurveBin>) -> Result<Self, FitError> {
        if bins.is_empty() {
            return Err(FitError::InvalidCurve("curve has no bins".into()));
        }
        for b in &bins {
            // is_normal also rules out subnormals, whose logs carry almost
            // no precision and would poison the objective.
            if !(b.c_center.is_normal() && b.c_center > 0.0) {
                return Err(FitError::InvalidCurve(format!(
                    "bin center must be positive and finite, got {}",
                    b.c_center
                )));
            }
            if !(b.n_mean.is_normal() && b.n_mean > 0.0) {
                return Err(FitError::InvalidCurve(format!(
                    "mean occupancy must be positive and finite, got {} at c = {}",
                    b.n_mean, b.c_center
                )));
            }
            if !(b.weight.is_normal() && b.weight > 0.0) {
                return Err(FitError::InvalidCurve(format!(
                    "weight must be positive and finite, got {} at c = {}",
                    b.weight, b.c_center
                )));
            }
        }
        bins.sort_by(|a, b| a.c_center.partial_cmp(&b.c_center).unwrap());
        if bins.windows(2).any(|w| w[0].c_center == w[1].c_center) {
            return Err(FitError::InvalidCurve("duplicate bin centers".into()));
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[CurveBin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Decades spanned by the bin centers.
    pub fn span_decades(&self) -> f64 {
        (self.bins[self.bins.len() - 1].c_center / self.bins[0].c_center).log10()
    }

    /// Reads `c_center,n_mean,weight` CSV.
    pub fn from_csv(reader: impl Read) -> Result<Self, FitError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["c_center", "n_mean", "weight"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(FitError::InvalidCurve(format!(
                "expected header {expected:?}, got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut bins = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let record = record?;
            let row = idx + 2;
            let field = |k: usize| -> Result<f64, FitError> {
                record
                    .get(k)
                    .ok_or_else(|| FitError::Parse {
                        row,
                        message: format!("missing column {}", expected[k]),
                    })?
                    .trim()
                    .parse()
                    .map_err(|e| FitError::Parse {
                        row,
                        message: format!("bad {}: {e}", expected[k]),
                    })
            };
            bins.push(CurveBin {
                c_center: field(0)?,
                n_mean: field(1)?,
                weight: field(2)?,
            });
        }
        Self::new(bins)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<(), FitError> {
        writeln!(out, "c_center,n_mean,weight")?;
        for b in &self.bins {
            writeln!(out, "{},{},{}", b.c_center, b.n_mean, b.weight)?;
        }
        Ok(())
    }
}

/// Weighted sum of squared log residuals between the curve and the model.
/// Bins where the model cannot be evaluated contribute [`BAD_BIN_PENALTY`]
/// instead of raising, so optimizers can traverse bad parameter regions.
pub fn chi_square(params: &ModelParams, data: &BinnedCurve) -> f64 {
    let mut total = 0.0;
    for bin in data.bins() {
        match params.log_mean_occupancy(bin.c_center) {
            Ok(ln_model) if ln_model.is_finite() => {
                let r = bin.n_mean.ln() - ln_model;
                if r.is_finite() {
                    total += bin.weight * r * r;
                } else {
                    total += BAD_BIN_PENALTY;
                }
            }
            _ => total += BAD_BIN_PENALTY,
        }
    }
    total
}

/// Log-spaced bin layout for synthetic curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticBins {
    pub c_min: f64,
    pub c_max: f64,
    pub bins: usize,
}

/// Evaluates the model at log-spaced bin centers and applies multiplicative
/// log-normal noise `exp(sigma * z)` with `z` standard normal drawn from a
/// seeded ChaCha8 stream; `sigma = 0` reproduces the model exactly.
pub fn synthetic_curve(
    params: &ModelParams,
    layout: &SyntheticBins,
    noise_sigma: f64,
    seed: u64,
) -> Result<BinnedCurve, FitError> {
    if !(layout.c_min > 0.0 && layout.c_max > layout.c_min) || layout.bins == 0 {
        return Err(FitError::InvalidCurve(format!(
            "bad bin layout: c_min = {}, c_max = {}, bins = {}",
            layout.c_min, layout.c_max, layout.bins
        )));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(FitError::InvalidCurve(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let ratio = layout.c_max / layout.c_min;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bins = Vec::with_capacity(layout.bins);
    for i in 0..layout.bins {
        let c = layout.c_min * ratio.powf((i as f64 + 0.5) / layout.bins as f64);
        let base = params.mean_occupancy(c)?;
        let z: f64 = StandardNormal.sample(&mut rng);
        bins.push(CurveBin {
            c_center: c,
            n_mean: base * (noise_sigma * z).exp(),
            weight: 1.0,
        });
    }
    BinnedCurve::new(bins)
}

/// Multi-start grid and convergence knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Inverse-temperature starts; all negative by default, log-spaced.
    pub beta_starts: Vec<f64>,
    /// Capacity-exponent starts.
    pub gamma_starts: Vec<f64>,
    /// Relative simplex-diameter tolerance.
    pub tol: f64,
    /// Objective-evaluation budget per start.
    pub max_evals_per_start: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            beta_starts: vec![-1e-3, -10f64.powf(-3.5), -1e-4, -10f64.powf(-4.5), -1e-5],
            gamma_starts: vec![0.5, 1.0, 1.5, 2.0],
            tol: 1e-9,
            max_evals_per_start: 10_000,
        }
    }
}

/// Outcome of the multi-start fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub chi2: f64,
    pub n_evals: u64,
    pub converged: bool,
    /// Index into the start grid that produced the winning minimum.
    pub start_index: usize,
}

/// Spread of the simplex values required for convergence, on top of the
/// diameter criterion.
const VALUE_SPREAD_TOL: f64 = 1e-10;

/// Fits the four-parameter law to `data` by simplex descent from every
/// start on the grid, returning the lowest-chi-square result (ties go to
/// the lowest start index). Requires at least 8 bins spanning at least two
/// decades; anything less cannot pin four parameters.
pub fn fit(data: &BinnedCurve, options: &FitOptions) -> Result<FitResult, FitError> {
    if data.len() < 8 {
        return Err(FitError::IllPosed(format!(
            "need at least 8 bins, got {}",
            data.len()
        )));
    }
    if data.span_decades() < 2.0 {
        return Err(FitError::IllPosed(format!(
            "bin centers span {:.2} decades, need at least 2",
            data.span_decades()
        )));
    }
    if options.beta_starts.is_empty() || options.gamma_starts.is_empty() {
        return Err(FitError::IllPosed("empty start grid".into()));
    }
    if options.beta_starts.contains(&0.0) {
        return Err(FitError::IllPosed("beta start of 0 cannot seed mu".into()));
    }

    let objective = |x: &[f64]| objective(x, data);
    let sim_opts = SimplexOptions {
        tol: options.tol,
        value_spread_tol: VALUE_SPREAD_TOL,
        max_evals: options.max_evals_per_start,
    };

    let mut best: Option<(usize, simplex::SimplexOutcome)> = None;
    let mut total_evals = 0u64;
    let mut start_index = 0usize;
    for &beta0 in &options.beta_starts {
        for &gamma0 in &options.gamma_starts {
            let x0 = initial_guess(data, beta0, gamma0);
            let steps = initial_steps(data, &x0);
            let outcome = nelder_mead(objective, &x0, &steps, &sim_opts);
            total_evals += outcome.evals as u64;
            let better = match &best {
                None => true,
                Some((_, b)) => outcome.value < b.value,
            };
            if better {
                best = Some((start_index, outcome));
            }
            start_index += 1;
        }
    }
    let (winner_index, mut outcome) = best.expect("at least one start");

    // Polish: restart the simplex around the winner with small relative
    // steps; repeats once more if the first polish was still improving.
    for _ in 0..2 {
        let steps: Vec<f64> = outcome.x.iter().map(|v| 1e-3 * (1.0 + v.abs())).collect();
        let polished = nelder_mead(objective, &outcome.x, &steps, &sim_opts);
        total_evals += polished.evals as u64;
        let improved = polished.value < outcome.value;
        if polished.value <= outcome.value {
            outcome = polished;
        }
        if !improved {
            break;
        }
    }

    let params = ModelParams::new(
        outcome.x[0],
        outcome.x[1],
        outcome.x[2].exp(),
        outcome.x[3].max(0.0),
    )
    .map_err(FitError::Model)?;
    Ok(FitResult {
        params,
        chi2: chi_square(&params, data),
        n_evals: total_evals,
        converged: outcome.converged,
        start_index: winner_index,
    })
}

/// Objective over the transformed vector `(beta, mu, ln A, gamma)`.
fn objective(x: &[f64], data: &BinnedCurve) -> f64 {
    let (beta, mu, ln_a, gamma) = (x[0], x[1], x[2], x[3]);
    if !beta.is_finite() || !mu.is_finite() || !ln_a.is_finite() || !gamma.is_finite() {
        return f64::INFINITY;
    }
    // Sloped penalty walls steer the simplex back into the valid region.
    if gamma < 0.0 {
        return BAD_BIN_PENALTY * (1.0 + gamma.abs());
    }
    if ln_a.abs() > 700.0 {
        return BAD_BIN_PENALTY * (1.0 + ln_a.abs() - 700.0);
    }
    let params = ModelParams {
        beta,
        mu,
        amplitude: ln_a.exp(),
        gamma,
    };
    chi_square(&params, data)
}

/// Start point: `beta` and `gamma` from the grid, `ln A` from matching the
/// high-`c` tail (where the curve hugs the capacity envelope), `mu` from
/// inverting the Boltzmann form at the lowest bin.
fn initial_guess(data: &BinnedCurve, beta0: f64, gamma0: f64) -> Vec<f64> {
    let bins = data.bins();
    let n = bins.len();
    let tail = &bins[n - (n / 4).max(2)..];
    let ln_a0 = tail
        .iter()
        .map(|b| b.n_mean.ln() + gamma0 * b.c_center.ln())
        .sum::<f64>()
        / tail.len() as f64;
    let first = &bins[0];
    let mu0 = first.c_center + first.n_mean.ln() / beta0;
    vec![beta0, mu0, ln_a0, gamma0]
}

fn initial_steps(data: &BinnedCurve, x0: &[f64]) -> Vec<f64> {
    let c_last = data.bins()[data.len() - 1].c_center;
    vec![
        0.5 * x0[0].abs(),
        (0.1 * x0[1].abs()).max(0.01 * c_last),
        0.5,
        0.15,
    ]
}
