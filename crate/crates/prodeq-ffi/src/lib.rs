//! C ABI for the prodeq toolkit.
//!
//! Handles are opaque pointers created and destroyed by this library;
//! every fallible call returns a [`prodeq_status`] and writes its result
//! through an out-pointer only on `PRODEQ_OK`. A human-readable detail for
//! the most recent failure on the current thread is available from
//! [`prodeq_last_error_message`]. The generated header lands in
//! `include/prodeq.h` at build time.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};

use prodeq::fit::{
    chi_square, fit, synthetic_curve, BinnedCurve, CurveBin, FitError, FitOptions, SyntheticBins,
};
use prodeq::model::{
    boltzmann_occupancy, solve_occupancy_fixed_point, CapacityLaw, Limiter, ModelError, ModelParams,
};
use prodeq::sim::{init_state, run, InitSpec, ProductivityGrid, SimConfig, SimError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum prodeq_status {
    PRODEQ_OK = 0,
    /// A required pointer argument was null.
    PRODEQ_ERR_NULL_ARGUMENT = 1,
    /// Arguments violate a documented precondition.
    PRODEQ_ERR_INVALID_ARGUMENT = 2,
    /// Productivity outside the positive domain.
    PRODEQ_ERR_DOMAIN = 3,
    /// A computation left the finite range.
    PRODEQ_ERR_NUMERIC = 4,
    /// A root or peak solver could not bracket a solution.
    PRODEQ_ERR_SOLVER = 5,
    /// The data cannot constrain the requested fit.
    PRODEQ_ERR_ILL_POSED = 6,
    /// No state satisfies the requested conserved totals and capacities.
    PRODEQ_ERR_INFEASIBLE = 7,
    /// An internal invariant failed; report this as a bug.
    PRODEQ_ERR_INTERNAL = 8,
}

use prodeq_status::*;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: prodeq_status, message: impl std::fmt::Display) -> prodeq_status {
    let text = CString::new(message.to_string()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
    status
}

fn model_error(e: ModelError) -> prodeq_status {
    let status = match &e {
        ModelError::NonPositiveProductivity(_) => PRODEQ_ERR_DOMAIN,
        ModelError::InvalidParams(_) | ModelError::BadTolerance(_) => PRODEQ_ERR_INVALID_ARGUMENT,
        ModelError::NonFinite { .. } => PRODEQ_ERR_NUMERIC,
        ModelError::NoSignChange { .. }
        | ModelError::NoInteriorPeak { .. }
        | ModelError::NoRootInBracket { .. } => PRODEQ_ERR_SOLVER,
    };
    fail(status, e)
}

fn fit_error(e: FitError) -> prodeq_status {
    let status = match &e {
        FitError::IllPosed(_) => PRODEQ_ERR_ILL_POSED,
        FitError::InvalidCurve(_) | FitError::Parse { .. } => PRODEQ_ERR_INVALID_ARGUMENT,
        FitError::Model(_) => PRODEQ_ERR_NUMERIC,
        FitError::Csv(_) | FitError::Io(_) => PRODEQ_ERR_INVALID_ARGUMENT,
    };
    fail(status, e)
}

fn sim_error(e: SimError) -> prodeq_status {
    let status = match &e {
        SimError::Infeasible(_) => PRODEQ_ERR_INFEASIBLE,
        SimError::InvalidConfig(_) | SimError::TooFewWorkers(_) => PRODEQ_ERR_INVALID_ARGUMENT,
        SimError::Invariant(_) => PRODEQ_ERR_INTERNAL,
        SimError::InsufficientData { .. } => PRODEQ_ERR_ILL_POSED,
        SimError::Model(_) => PRODEQ_ERR_NUMERIC,
        SimError::Io(_) => PRODEQ_ERR_INTERNAL,
    };
    fail(status, e)
}

/// Detail text for the most recent failure on this thread. The pointer is
/// valid until the next failing prodeq call on the same thread; never
/// freed by the caller.
#[no_mangle]
pub extern "C" fn prodeq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn prodeq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque handle to the four-parameter occupancy law.
pub struct prodeq_model {
    inner: ModelParams,
}

/// Opaque handle to a binned mean-occupancy curve.
pub struct prodeq_curve {
    inner: BinnedCurve,
}

/// Creates a model handle. `amplitude` must be positive and `gamma`
/// non-negative; `beta` may have either sign.
///
/// # Safety
/// `out` must be a valid pointer. The handle must be released with
/// [`prodeq_model_free`].
#[no_mangle]
pub unsafe extern "C" fn prodeq_model_new(
    beta: f64,
    mu: f64,
    amplitude: f64,
    gamma: f64,
    out: *mut *mut prodeq_model,
) -> prodeq_status {
    if out.is_null() {
        return fail(PRODEQ_ERR_NULL_ARGUMENT, "out pointer is null");
    }
    match ModelParams::new(beta, mu, amplitude, gamma) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(prodeq_model { inner }));
            PRODEQ_OK
        }
        Err(e) => model_error(e),
    }
}

/// Releases a model handle; a null pointer is a no-op.
///
/// # Safety
/// `model` must have come from [`prodeq_model_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn prodeq_model_free(model: *mut prodeq_model) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn model_scalar(
    model: *const prodeq_model,
    out: *mut f64,
    eval: impl FnOnce(&ModelParams) -> Result<f64, ModelError>,
) -> prodeq_status {
    if model.is_null() || out.is_null() {
        return fail(PRODEQ_ERR_NULL_ARGUMENT, "null model or out pointer");
    }
    match eval(&(*model).inner) {
        Ok(v) => {
            *out = v;
            PRODEQ_OK
        }
        Err(e) => model_error(e),
    }
}

/// Capacity `g(c) = A c^(-gamma)`.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn prodeq_model_capacity(
    model: *const prodeq_model,
    c: f64,
    out: *mut f64,
) -> prodeq_status {
    model_scalar(model, out, |p| p.capacity(c))
}

/// Equilibrium mean occupancy `g / (g e^{beta (c - mu)} + 1)`.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn prodeq_model_mean_occupancy(
    model: *const prodeq_model,
    c: f64,
    out: *mut f64,
) -> prodeq_status {
    model_scalar(model, out, |p| p.mean_occupancy(c))
}

/// Log partition function `g ln(1 + e^{-beta (c - mu)} / g)`.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn prodeq_model_log_partition(
    model: *const prodeq_model,
    c: f64,
    out: *mut f64,
) -> prodeq_status {
    model_scalar(model, out, |p| p.log_partition(c))
}

/// Productivity at which the mean occupancy peaks, bracketed by
/// `[c_lo, c_hi]`. Fails with `PRODEQ_ERR_SOLVER` for monotone regimes
/// (`beta >= 0` or `gamma == 0`) or when the bracket excludes the peak.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn prodeq_model_peak_productivity(
    model: *const prodeq_model,
    c_lo: f64,
    c_hi: f64,
    out: *mut f64,
) -> prodeq_status {
    model_scalar(model, out, |p| p.peak_productivity((c_lo, c_hi)))
}

/// Self-consistent occupancy under the model's linear-ramp limiter,
/// solved independently of the closed form to `tol` relative accuracy.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn prodeq_model_solve_occupancy(
    model: *const prodeq_model,
    c: f64,
    tol: f64,
    out: *mut f64,
) -> prodeq_status {
    model_scalar(model, out, |p| {
        solve_occupancy_fixed_point(c, &p.limiter(), p.beta, p.mu, tol)
    })
}

/// Boltzmann occupancy `e^{-beta (c - mu)}` (the unlimited-capacity law).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn prodeq_boltzmann_occupancy(
    c: f64,
    beta: f64,
    mu: f64,
    out: *mut f64,
) -> prodeq_status {
    if out.is_null() {
        return fail(PRODEQ_ERR_NULL_ARGUMENT, "out pointer is null");
    }
    match boltzmann_occupancy(c, beta, mu) {
        Ok(v) => {
            *out = v;
            PRODEQ_OK
        }
        Err(e) => model_error(e),
    }
}

/// Builds a curve from parallel arrays of length `len`. `weights` may be
/// null, in which case every bin has weight 1. Centers must be positive
/// and distinct (they are sorted internally), means and weights positive.
///
/// # Safety
/// The arrays must hold at least `len` readable doubles; `out` must be a
/// valid pointer. The handle must be released with [`prodeq_curve_free`].
#[no_mangle]
pub unsafe extern "C" fn prodeq_curve_new(
    c_centers: *const f64,
    n_means: *const f64,
    weights: *const f64,
    len: usize,
    out: *mut *mut prodeq_curve,
) -> prodeq_status {
    if c_centers.is_null() || n_means.is_null() || out.is_null() {
        return fail(PRODEQ_ERR_NULL_ARGUMENT, "null array or out pointer");
    }
    let centers = std::slice::from_raw_parts(c_centers, len);
    let means = std::slice::from_raw_parts(n_means, len);
    let bins: Vec<CurveBin> = (0..len)
        .map(|i| CurveBin {
            c_center: centers[i],
            n_mean: means[i],
            weight: if weights.is_null() {
                1.0
            } else {
                *weights.add(i)
            },
        })
        .collect();
    match BinnedCurve::new(bins) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(prodeq_curve { inner }));
            PRODEQ_OK
        }
        Err(e) => fit_error(e),
    }
}

/// Releases a curve handle; a null pointer is a no-op.
///
/// # Safety
/// `curve` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn prodeq_curve_free(curve: *mut prodeq_curve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Number of bins in the curve; 0 for a null handle.
///
/// # Safety
/// `curve` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn prodeq_curve_len(curve: *const prodeq_curve) -> usize {
    if curve.is_null() {
        0
    } else {
        (*curve).inner.len()
    }
}

/// Reads one bin of the curve by index (bins are ordered by ascending
/// center). Out-pointers may be null to skip a field.
///
/// # Safety
/// `curve` must be a valid handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn prodeq_curve_bin(
    curve: *const prodeq_curve,
    index: usize,
    c_center: *mut f64,
    n_mean: *mut f64,
    weight: *mut f64,
) -> prodeq_status {
    if curve.is_null() {
        return fail(PRODEQ_ERR_NULL_ARGUMENT, "null curve handle");
    }
    let bins = (*curve).inner.bins();
    let Some(bin) = bins.get(index) else {
        return fail(
            PRODEQ_ERR_INVALID_ARGUMENT,
            format!("bin index {index} out of range ({} bins)", bins.len()),
        );
    };
    if !c_center.is_null() {
        *c_center = bin.c_center;
    }
    if !n_mean.is_null() {
        *n_mean = bin.n_mean;
    }
    if !weight.is_null() {
        *weight = bin.weight;
    }
    PRODEQ_OK
}

/// Samples the model at log-spaced bin centers over `[c_min, c_max]` with
/// multiplicative log-normal noise `exp(noise_sigma * z)`; deterministic
/// in `seed`.
///
/// # Safety
/// `model` and `out` must be valid pointers; release the handle with
/// [`prodeq_curve_free`].
#[no_mangle]
pub unsafe extern "C" fn prodeq_synthetic_curve(
    model: *const prodeq_model,
    c_min: f64,
    c_max: f64,
    bins: usize,
    noise_sigma: f64,
    seed: u64,
    out: *mut *mut prodeq_curve,
) -> prodeq_status {
    if model.is_null() || out.is_null() {
        return fail(PRODEQ_ERR_NULL_ARGUMENT, "null model or out pointer");
    }
    let layout = SyntheticBins { c_min, c_max, bins };
    match synthetic_curve(&(*model).inner, &layout, noise_sigma, seed) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(prodeq_curve { inner }));
            PRODEQ_OK
        }
        Err(e) => fit_error(e),
    }
}

/// Weighted sum of squared log residuals between curve and model.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn prodeq_chi_square(
    model: *const prodeq_model,
    curve: *const prodeq_curve,
    out: *mut f64,
) -> prodeq_status {
    if model.is_null() || curve.is_null() || out.is_null() {
        return fail(PRODEQ_ERR_NULL_ARGUMENT, "null model, curve or out pointer");
    }
    *out = chi_square(&(*model).inner, &(*curve).inner);
    PRODEQ_OK
}

/// Outcome of [`prodeq_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct prodeq_fit_result {
    pub beta: f64,
    pub mu: f64,
    pub amplitude: f64,
    pub gamma: f64,
    pub chi2: f64,
    pub n_evals: u64,
    /// Index of the winning start on the default multi-start grid.
    pub start_index: u64,
    /// 1 when the simplex met both convergence criteria.
    pub converged: i32,
}

/// Multi-start chi-square fit of the four-parameter law with default
/// options. Needs at least 8 bins spanning two decades.
///
/// # Safety
/// `curve` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn prodeq_fit(
    curve: *const prodeq_curve,
    out: *mut prodeq_fit_result,
) -> prodeq_status {
    if curve.is_null() || out.is_null() {
        return fail(PRODEQ_ERR_NULL_ARGUMENT, "null curve or out pointer");
    }
    match fit(&(*curve).inner, &FitOptions::default()) {
        Ok(result) => {
            *out = prodeq_fit_result {
                beta: result.params.beta,
                mu: result.params.mu,
                amplitude: result.params.amplitude,
                gamma: result.params.gamma,
                chi2: result.chi2,
                n_evals: result.n_evals,
                start_index: result.start_index as u64,
                converged: result.converged as i32,
            };
            PRODEQ_OK
        }
        Err(e) => fit_error(e),
    }
}

/// One-shot chain run: `levels` grid points spaced `dc`, `workers` workers
/// at conserved output `output_index`, `steps` proposals with the given
/// burn-in, stride and seed. With `use_capacity` nonzero the linear-ramp
/// limiter `g(c) = amplitude * c^(-gamma)` applies; otherwise moves are
/// unrestricted. Writes per-level time-averaged occupancies into
/// `n_mean_out` and variances into `n_var_out` (either may be null to
/// skip), both of length `levels`.
///
/// # Safety
/// Non-null output arrays must hold at least `levels` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn prodeq_simulate_occupancy(
    levels: usize,
    dc: f64,
    workers: u64,
    output_index: u64,
    steps: u64,
    burn_in: u64,
    sample_every: u64,
    seed: u64,
    use_capacity: i32,
    amplitude: f64,
    gamma: f64,
    n_mean_out: *mut f64,
    n_var_out: *mut f64,
) -> prodeq_status {
    let limiter = if use_capacity != 0 {
        match CapacityLaw::new(amplitude, gamma) {
            Ok(law) => Limiter::LinearRamp(law),
            Err(e) => return model_error(e),
        }
    } else {
        Limiter::Unbounded
    };
    let grid = match ProductivityGrid::new(levels, dc) {
        Ok(g) => g,
        Err(e) => return sim_error(e),
    };
    let state = match init_state(
        &grid,
        &InitSpec::Targets {
            workers,
            output_index,
        },
        &limiter,
    ) {
        Ok(s) => s,
        Err(e) => return sim_error(e),
    };
    let config = SimConfig {
        seed,
        steps,
        burn_in,
        sample_every,
        limiter,
        grid,
    };
    let result = match run(&config, state) {
        Ok(r) => r,
        Err(e) => return sim_error(e),
    };
    for level in 1..=levels {
        if !n_mean_out.is_null() {
            *n_mean_out.add(level - 1) = result.averages.mean(level);
        }
        if !n_var_out.is_null() {
            *n_var_out.add(level - 1) = result.averages.variance(level);
        }
    }
    PRODEQ_OK
}
