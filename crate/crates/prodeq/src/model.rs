//! Closed-form occupancy laws for capacity-limited clusters.
//!
//! A cluster at productivity `c` holds at most `g(c) = A c^(-gamma)` workers,
//! and in equilibrium its mean occupancy follows
//!
//! ```text
//!     n(c) = g(c) / (g(c) exp(beta (c - mu)) + 1)
//! ```
//!
//! which reduces to the Boltzmann form `exp(-beta (c - mu))` as `g -> inf`
//! and to the Fermi-Dirac form at `g = 1`. `beta` is allowed to be negative;
//! that is the empirically relevant regime, where occupancy rises
//! exponentially at low `c` and decays as the `c^(-gamma)` capacity envelope
//! at high `c`. Everything here is a pure function of its arguments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard floor applied to `exp(-beta (c - mu))` style factors so the
/// fixed-point bracket stays finite. `exp` overflows past ~709.78.
const EXP_SATURATION: f64 = f64::MAX / 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("productivity must be positive, got {0}")]
    NonPositiveProductivity(f64),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite {what} (value {value}) at c = {c}")]
    NonFinite {
        what: &'static str,
        value: f64,
        c: f64,
    },
    #[error("fixed-point bracket [{lo}, {hi}] has no sign change; limiter is not usable")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("no interior peak: requires beta < 0 and gamma > 0 (beta = {beta}, gamma = {gamma})")]
    NoInteriorPeak { beta: f64, gamma: f64 },
    #[error("no stationary point in bracket [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Capacity envelope `g(c) = A c^(-gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityLaw {
    /// Amplitude `A`, in workers * (10^3 yen/person)^gamma. Must be positive.
    pub amplitude: f64,
    /// Decay exponent `gamma` >= 0.
    pub gamma: f64,
}

impl CapacityLaw {
    pub fn new(amplitude: f64, gamma: f64) -> Result<Self, ModelError> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "capacity amplitude must be positive and finite, got {amplitude}"
            )));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "capacity exponent must be >= 0 and finite, got {gamma}"
            )));
        }
        Ok(Self { amplitude, gamma })
    }

    /// `g(c) = A c^(-gamma)`, strictly decreasing in `c` when `gamma > 0`.
    pub fn value(&self, c: f64) -> Result<f64, ModelError> {
        check_productivity(c)?;
        let v = self.amplitude * c.powf(-self.gamma);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::NonFinite {
                what: "capacity",
                value: v,
                c,
            })
        }
    }

    /// `ln g(c)`; the workhorse form, safe for extreme exponents.
    pub fn ln_value(&self, c: f64) -> Result<f64, ModelError> {
        check_productivity(c)?;
        let v = self.amplitude.ln() - self.gamma * c.ln();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::NonFinite {
                what: "ln capacity",
                value: v,
                c,
            })
        }
    }
}

/// Acceptance attenuation for a destination cluster: 1 when empty, 0 at and
/// beyond capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Limiter {
    /// `L(c, n) = max(0, (g(c) - n) / g(c))`: linear ramp down to the cap.
    LinearRamp(CapacityLaw),
    /// `L == 1`: no hiring restriction (the `g -> inf` model).
    Unbounded,
}

impl Limiter {
    /// Fraction in `[0, 1]` by which a move into a cluster at productivity
    /// `c` holding `n` workers is attenuated.
    pub fn value(&self, c: f64, n: f64) -> Result<f64, ModelError> {
        match self {
            Limiter::Unbounded => {
                check_productivity(c)?;
                Ok(1.0)
            }
            Limiter::LinearRamp(law) => {
                let g = law.value(c)?;
                Ok(((g - n) / g).max(0.0))
            }
        }
    }

    /// Capacity at `c`, `None` for the unbounded variant.
    pub fn capacity(&self, c: f64) -> Result<Option<f64>, ModelError> {
        match self {
            Limiter::Unbounded => {
                check_productivity(c)?;
                Ok(None)
            }
            Limiter::LinearRamp(law) => law.value(c).map(Some),
        }
    }
}

/// The four scalars of the equilibrium law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Inverse temperature, per 10^3 yen/person. Negative in the fitted
    /// regime; zero is permitted.
    pub beta: f64,
    /// Chemical-potential-like offset, 10^3 yen/person.
    pub mu: f64,
    /// Capacity amplitude `A` (> 0).
    pub amplitude: f64,
    /// Capacity exponent `gamma` (>= 0).
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(beta: f64, mu: f64, amplitude: f64, gamma: f64) -> Result<Self, ModelError> {
        if !beta.is_finite() || !mu.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "beta and mu must be finite, got beta = {beta}, mu = {mu}"
            )));
        }
        CapacityLaw::new(amplitude, gamma)?;
        Ok(Self {
            beta,
            mu,
            amplitude,
            gamma,
        })
    }

    pub fn capacity_law(&self) -> CapacityLaw {
        CapacityLaw {
            amplitude: self.amplitude,
            gamma: self.gamma,
        }
    }

    pub fn limiter(&self) -> Limiter {
        Limiter::LinearRamp(self.capacity_law())
    }

    /// `g(c)` for these parameters.
    pub fn capacity(&self, c: f64) -> Result<f64, ModelError> {
        self.capacity_law().value(c)
    }

    /// Equilibrium mean occupancy `g / (g e^{beta (c - mu)} + 1)`.
    ///
    /// Evaluated in log space, so `beta (c - mu)` of magnitude well beyond
    /// the `exp` overflow threshold is fine. The result lies in `(0, g(c))`.
    pub fn mean_occupancy(&self, c: f64) -> Result<f64, ModelError> {
        Ok(self.log_mean_occupancy(c)?.exp())
    }

    /// `ln` of [`Self::mean_occupancy`]; exact even where the occupancy
    /// itself would underflow.
    pub fn log_mean_occupancy(&self, c: f64) -> Result<f64, ModelError> {
        let ln_g = self.capacity_law().ln_value(c)?;
        let x = self.beta * (c - self.mu);
        if !x.is_finite() {
            return Err(ModelError::NonFinite {
                what: "occupancy exponent",
                value: x,
                c,
            });
        }
        // n = 1 / (e^x + 1/g)  =>  ln n = -lse(x, -ln g)
        Ok(-log_sum_exp(x, -ln_g))
    }

    /// `ln Z = g ln(1 + e^{-beta (c - mu)} / g)`.
    ///
    /// Differentiating with respect to `mu` and dividing by `beta` recovers
    /// the mean occupancy, which the tests check by central differences.
    pub fn log_partition(&self, c: f64) -> Result<f64, ModelError> {
        let ln_g = self.capacity_law().ln_value(c)?;
        let x = self.beta * (c - self.mu);
        if !x.is_finite() {
            return Err(ModelError::NonFinite {
                what: "occupancy exponent",
                value: x,
                c,
            });
        }
        Ok(ln_g.exp() * softplus(-x - ln_g))
    }

    /// Productivity at which the mean occupancy peaks.
    ///
    /// Solves the stationarity condition `g(c) e^{beta (c - mu)} =
    /// -gamma / (beta c)` by bisection inside `bracket`, to a relative
    /// tolerance of 1e-8 on `c`. Only the `beta < 0`, `gamma > 0` regime has
    /// an interior peak; anything else is refused so callers handle monotone
    /// curves explicitly.
    pub fn peak_productivity(&self, bracket: (f64, f64)) -> Result<f64, ModelError> {
        if !(self.beta < 0.0) || !(self.gamma > 0.0) {
            return Err(ModelError::NoInteriorPeak {
                beta: self.beta,
                gamma: self.gamma,
            });
        }
        let (lo, hi) = bracket;
        if !(lo > 0.0) || !(hi > lo) {
            return Err(ModelError::NoRootInBracket { lo, hi });
        }
        // log form of the stationarity condition:
        // psi(c) = ln g(c) + beta (c - mu) - ln(gamma / (-beta c))
        let psi = |c: f64| {
            self.amplitude.ln() - self.gamma * c.ln() + self.beta * (c - self.mu) - self.gamma.ln()
                + (-self.beta).ln()
                + c.ln()
        };
        let (mut lo, mut hi) = (lo, hi);
        let (flo, fhi) = (psi(lo), psi(hi));
        if flo == 0.0 {
            return Ok(lo);
        }
        if fhi == 0.0 {
            return Ok(hi);
        }
        if flo.signum() == fhi.signum() {
            return Err(ModelError::NoRootInBracket { lo, hi });
        }
        let descending = flo > 0.0;
        while hi - lo > 1e-8 * hi {
            let mid = lo + (hi - lo) / 2.0;
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = psi(mid);
            if (fm > 0.0) == descending {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo + (hi - lo) / 2.0)
    }
}

/// Boltzmann occupancy `e^{-beta (c - mu)}`, the unbounded-capacity limit.
pub fn boltzmann_occupancy(c: f64, beta: f64, mu: f64) -> Result<f64, ModelError> {
    check_productivity(c)?;
    let t = -beta * (c - mu);
    let v = t.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::NonFinite {
            what: "boltzmann occupancy",
            value: t,
            c,
        })
    }
}

/// Solves the self-consistency equation `n = L(c, n) e^{-beta (c - mu)}`
/// for the occupancy at productivity `c` under an arbitrary monotone
/// non-increasing limiter.
///
/// Uses bracketed bisection on `f(n) = n - L(c, n) w` over
/// `[0, max(g(c), w)]` with `w = e^{-beta (c - mu)}`, shrinking the bracket
/// to relative width `tol`; the residual `|f|` at the returned point stays
/// below `tol * w`. For the linear-ramp limiter the result agrees with the
/// closed form [`ModelParams::mean_occupancy`]; the deliberately
/// independent route is what the verification sweeps lean on.
pub fn solve_occupancy_fixed_point(
    c: f64,
    limiter: &Limiter,
    beta: f64,
    mu: f64,
    tol: f64,
) -> Result<f64, ModelError> {
    check_productivity(c)?;
    if !(tol > 0.0) {
        return Err(ModelError::BadTolerance(tol));
    }
    let t = -beta * (c - mu);
    // Saturate rather than overflow: past this the linear-ramp solution is
    // within one ulp of g(c) anyway.
    let w = t.exp().min(EXP_SATURATION);
    let hi0 = match limiter.capacity(c)? {
        Some(g) => g.max(w),
        None => w,
    };
    let f = |n: f64| -> Result<f64, ModelError> { Ok(n - limiter.value(c, n)? * w) };
    let mut lo = 0.0_f64;
    let mut hi = hi0;
    let flo = f(lo)?;
    let fhi = f(hi)?;
    if !(flo <= 0.0 && fhi >= 0.0) {
        return Err(ModelError::NoSignChange { lo, hi });
    }
    // f is below zero left of the root and above right of it, so interval
    // convergence makes the returned occupancy accurate to tol relative;
    // |f| alone would also accept points far above the capacity, where the
    // limiter clamps f(n) to a bare n that `tol * w` can dwarf.
    while hi - lo > tol * hi {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + (hi - lo) / 2.0)
}

fn check_productivity(c: f64) -> Result<(), ModelError> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveProductivity(c))
    }
}

/// `ln(e^a + e^b)` without overflow.
fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Parameter set used throughout: the all-sector fit row.
    pub(crate) fn all_sectors() -> ModelParams {
        ModelParams::new(-1.25e-4, -2.32e4, 5.84e7, 1.18).unwrap()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn capacity_power_cancels() {
        let law = CapacityLaw::new(10.0, 1.0).unwrap();
        assert!((law.value(10.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_gamma_zero_is_constant() {
        let law = CapacityLaw::new(7.0, 0.0).unwrap();
        assert!((law.value(5.0).unwrap() - 7.0).abs() < 1e-12);
        assert!((law.value(5e6).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_reference_value() {
        // 288.42696653087230 computed at 50-digit precision for
        // A = 5.84e7, gamma = 1.18, c = 3.14e4.
        let law = CapacityLaw::new(5.84e7, 1.18).unwrap();
        assert!(rel_err(law.value(3.14e4).unwrap(), 288.4269665308723) < 1e-13);
    }

    #[test]
    fn capacity_decreasing_in_c() {
        let law = CapacityLaw::new(5.84e7, 1.18).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..60 {
            let c = 1e1 * 10f64.powf(k as f64 / 10.0);
            let g = law.value(c).unwrap();
            assert!(g > 0.0 && g < prev);
            prev = g;
        }
    }

    #[test]
    fn capacity_rejects_nonpositive_c() {
        let law = CapacityLaw::new(1.0, 1.0).unwrap();
        assert!(matches!(
            law.value(0.0),
            Err(ModelError::NonPositiveProductivity(_))
        ));
        assert!(matches!(
            law.value(-3.0),
            Err(ModelError::NonPositiveProductivity(_))
        ));
    }

    #[test]
    fn limiter_ramp_endpoints_and_midpoint() {
        // g(c) = 10 at c = 1.
        let lim = Limiter::LinearRamp(CapacityLaw::new(10.0, 0.7).unwrap());
        assert_eq!(lim.value(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(lim.value(1.0, 10.0).unwrap(), 0.0);
        assert_eq!(lim.value(1.0, 15.0).unwrap(), 0.0);
        assert!((lim.value(1.0, 5.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn limiter_unbounded_is_one() {
        let lim = Limiter::Unbounded;
        assert_eq!(lim.value(3.0, 0.0).unwrap(), 1.0);
        assert_eq!(lim.value(3.0, 1e9).unwrap(), 1.0);
    }

    #[test]
    fn mean_occupancy_half_at_mu_with_unit_capacity() {
        // Arrange g(mu) = 1: A = mu^gamma.
        let mu = 40.0;
        for beta in [-0.5, 0.0, 0.3] {
            let p = ModelParams::new(beta, mu, mu.powf(1.3), 1.3).unwrap();
            assert!((p.mean_occupancy(mu).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_occupancy_reference_value() {
        // 219.61813022286642 computed at 50-digit precision for the
        // all-sector parameters at c = 3.14e4.
        let p = all_sectors();
        assert!(rel_err(p.mean_occupancy(3.14e4).unwrap(), 219.61813022286642) < 1e-13);
    }

    #[test]
    fn mean_occupancy_matches_boltzmann_for_huge_capacity() {
        let p = ModelParams::new(-1e-4, 0.0, 1e9, 0.0).unwrap();
        for k in 0..=60 {
            let c = 1e-2 * 10f64.powf(k as f64 / 10.0);
            let full = p.mean_occupancy(c).unwrap();
            let boltz = boltzmann_occupancy(c, p.beta, p.mu).unwrap();
            assert!(rel_err(full, boltz) < 1e-6, "c = {c}: {full} vs {boltz}");
        }
    }

    #[test]
    fn mean_occupancy_bounded_by_capacity() {
        let p = all_sectors();
        for k in 0..=60 {
            let c = 1e1 * 10f64.powf(k as f64 / 10.0);
            let n = p.mean_occupancy(c).unwrap();
            let g = p.capacity(c).unwrap();
            assert!(n > 0.0, "c = {c}: n = {n}");
            // Strict n < g until the relative gap ~ g e^{beta (c - mu)}
            // dips below f64 resolution; past that the two saturate equal.
            let log_rel_gap = p.beta * (c - p.mu) + g.ln();
            if log_rel_gap > -30.0 {
                assert!(n < g, "c = {c}: n = {n}, g = {g}");
            } else {
                assert!((n / g - 1.0).abs() < 1e-12, "c = {c}: n = {n}, g = {g}");
            }
        }
    }

    #[test]
    fn mean_occupancy_tail_approaches_capacity() {
        // beta < 0, gamma > 0: n/g -> 1 from below as c grows.
        let p = all_sectors();
        let ratio = |c: f64| p.mean_occupancy(c).unwrap() / p.capacity(c).unwrap();
        assert!(ratio(1e5) > 0.97);
        assert!(ratio(1e6) > 1.0 - 1e-10);
        assert!(ratio(1e7) > 1.0 - 1e-14);
    }

    #[test]
    fn mean_occupancy_low_c_approaches_boltzmann() {
        let p = all_sectors();
        // The relative gap is 1 / (g e^{beta (c - mu)}), which shrinks as
        // c drops; check it at three points along the way down.
        for (c, tol) in [(1e3, 2e-3), (1e2, 1e-4), (1e1, 1e-5)] {
            let full = p.mean_occupancy(c).unwrap();
            let boltz = boltzmann_occupancy(c, p.beta, p.mu).unwrap();
            assert!(rel_err(full, boltz) < tol, "c = {c}");
        }
    }

    #[test]
    fn boltzmann_trivial_points() {
        assert!((boltzmann_occupancy(7.0, 0.3, 7.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((boltzmann_occupancy(123.0, 0.0, 5.0).unwrap() - 1.0).abs() < 1e-15);
        let mu = 10.0;
        let e = boltzmann_occupancy(2.0 * mu, -1.0 / mu, mu).unwrap();
        assert!((e - std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn boltzmann_monotone_direction_tracks_beta_sign() {
        let up = boltzmann_occupancy(20.0, -0.1, 0.0).unwrap()
            > boltzmann_occupancy(10.0, -0.1, 0.0).unwrap();
        assert!(up);
        let down = boltzmann_occupancy(20.0, 0.1, 0.0).unwrap()
            < boltzmann_occupancy(10.0, 0.1, 0.0).unwrap();
        assert!(down);
    }

    #[test]
    fn boltzmann_overflow_is_an_error() {
        assert!(matches!(
            boltzmann_occupancy(1e7, -1.0, 0.0),
            Err(ModelError::NonFinite { .. })
        ));
    }

    #[test]
    fn fixed_point_unbounded_reduces_to_boltzmann() {
        for (c, beta, mu) in [
            (5.0, -0.3, 1.0),
            (2e4, -1.25e-4, -2.32e4),
            (50.0, 0.2, 10.0),
        ] {
            let n = solve_occupancy_fixed_point(c, &Limiter::Unbounded, beta, mu, 1e-12).unwrap();
            let b = boltzmann_occupancy(c, beta, mu).unwrap();
            assert!(rel_err(n, b) < 1e-10, "c = {c}");
        }
    }

    #[test]
    fn fixed_point_matches_closed_form_at_reference_point() {
        let p = all_sectors();
        let n = solve_occupancy_fixed_point(3.14e4, &p.limiter(), p.beta, p.mu, 1e-12).unwrap();
        assert!(rel_err(n, p.mean_occupancy(3.14e4).unwrap()) < 1e-10);
    }

    #[test]
    fn fixed_point_half_at_mu_with_unit_capacity() {
        let mu = 40.0;
        let p = ModelParams::new(-0.2, mu, mu.powf(1.3), 1.3).unwrap();
        let n = solve_occupancy_fixed_point(mu, &p.limiter(), p.beta, p.mu, 1e-12).unwrap();
        assert!((n - 0.5).abs() < 1e-10);
    }

    #[test]
    fn fixed_point_sweep_matches_closed_form() {
        // beta in {-1e-4, +1e-4}, gamma in {0.5, 1.18, 2}, c over 6 decades.
        for beta in [-1e-4, 1e-4] {
            for gamma in [0.5, 1.18, 2.0] {
                let p = ModelParams::new(beta, -2.32e4, 5.84e7, gamma).unwrap();
                for k in 0..=30 {
                    let c = 1e1 * 10f64.powf(k as f64 / 5.0);
                    let fp =
                        solve_occupancy_fixed_point(c, &p.limiter(), p.beta, p.mu, 1e-12).unwrap();
                    let cf = p.mean_occupancy(c).unwrap();
                    // Deep in the beta > 0 tail both routes underflow to 0.
                    if cf < 1e-290 {
                        assert!(fp < 1e-290, "c = {c}: {fp} vs {cf}");
                        continue;
                    }
                    assert!(
                        rel_err(fp, cf) < 1e-8,
                        "beta = {beta}, gamma = {gamma}, c = {c}: {fp} vs {cf}"
                    );
                }
            }
        }
    }

    #[test]
    fn fixed_point_survives_saturating_exponent() {
        // -beta (c - mu) far beyond exp overflow; solution pins to g(c).
        let p = ModelParams::new(-1e-3, 0.0, 5.84e7, 1.18).unwrap();
        let c = 1e7;
        let n = solve_occupancy_fixed_point(c, &p.limiter(), p.beta, p.mu, 1e-12).unwrap();
        let g = p.capacity(c).unwrap();
        assert!(rel_err(n, g) < 1e-10);
    }

    #[test]
    fn log_partition_fermi_dirac_at_unit_capacity() {
        let mu = 40.0;
        let beta = -0.2;
        let p = ModelParams::new(beta, mu, mu.powf(1.3), 1.3).unwrap();
        // g(mu) = 1: ln Z = ln(1 + e^{-beta (c - mu)}) at c = mu -> ln 2.
        assert!((p.log_partition(mu).unwrap() - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_partition_reference_value() {
        // 413.34749315632192 computed at 50-digit precision.
        let p = all_sectors();
        assert!(rel_err(p.log_partition(3.14e4).unwrap(), 413.34749315632192) < 1e-12);
    }

    #[test]
    fn log_partition_small_when_exponent_large_positive() {
        // beta (c - mu) >> 1: Z ~ 1 + e^{-beta (c - mu)}, ln Z ~ e^{-x}.
        let p = ModelParams::new(0.5, 0.0, 20.0, 0.0).unwrap();
        let c = 40.0;
        let x = p.beta * (c - p.mu);
        let ln_z = p.log_partition(c).unwrap();
        assert!(rel_err(ln_z, (-x).exp()) < 1e-6);
    }

    #[test]
    fn log_partition_derivative_recovers_occupancy() {
        // (1/beta) d lnZ / d mu == mean occupancy, central differences.
        let p = all_sectors();
        for c in [1e3, 3.14e4, 2e5, 1e6] {
            let h = 1e-6 * p.mu.abs();
            let plus = ModelParams { mu: p.mu + h, ..p };
            let minus = ModelParams { mu: p.mu - h, ..p };
            let deriv =
                (plus.log_partition(c).unwrap() - minus.log_partition(c).unwrap()) / (2.0 * h);
            let n = p.mean_occupancy(c).unwrap();
            assert!(rel_err(deriv / p.beta, n) < 1e-6, "c = {c}");
        }
    }

    #[test]
    fn peak_matches_reference_positions() {
        // Reference parameter rows with their expected peak positions:
        // all sectors, manufacturing, non-manufacturing.
        let rows = [
            (-1.25e-4, -2.32e4, 5.84e7, 1.18, 3.14e4),
            (-1.78e-4, -1.63e4, 8.51e7, 1.17, 2.70e4),
            (-0.86e-4, -3.47e4, 1.52e7, 1.08, 3.74e4),
        ];
        for (beta, mu, amplitude, gamma, expected) in rows {
            let p = ModelParams::new(beta, mu, amplitude, gamma).unwrap();
            let cp = p.peak_productivity((1e3, 1e6)).unwrap();
            assert!(
                rel_err(cp, expected) < 0.05,
                "expected ~{expected}, got {cp}"
            );
        }
    }

    #[test]
    fn peak_reference_values() {
        // Roots of the stationarity condition at 50-digit precision.
        let rows = [
            (-1.25e-4, -2.32e4, 5.84e7, 1.18, 31715.9342421499),
            (-1.78e-4, -1.63e4, 8.51e7, 1.17, 27144.3251602843),
            (-0.86e-4, -3.47e4, 1.52e7, 1.08, 38032.3975756837),
        ];
        for (beta, mu, amplitude, gamma, expected) in rows {
            let p = ModelParams::new(beta, mu, amplitude, gamma).unwrap();
            let cp = p.peak_productivity((1e3, 1e6)).unwrap();
            assert!(rel_err(cp, expected) < 1e-7, "got {cp}, want {expected}");
        }
    }

    #[test]
    fn peak_is_a_local_maximum() {
        let p = all_sectors();
        let cp = p.peak_productivity((1e3, 1e6)).unwrap();
        let n = |c: f64| p.mean_occupancy(c).unwrap();
        assert!(n(cp) >= n(cp * (1.0 + 1e-3)));
        assert!(n(cp) >= n(cp * (1.0 - 1e-3)));
    }

    #[test]
    fn peak_refuses_monotone_regimes() {
        let flat = ModelParams::new(-1e-4, 0.0, 10.0, 0.0).unwrap();
        assert!(matches!(
            flat.peak_productivity((1.0, 1e6)),
            Err(ModelError::NoInteriorPeak { .. })
        ));
        let positive = ModelParams::new(1e-4, 0.0, 10.0, 1.0).unwrap();
        assert!(matches!(
            positive.peak_productivity((1.0, 1e6)),
            Err(ModelError::NoInteriorPeak { .. })
        ));
    }

    #[test]
    fn peak_requires_sign_change_in_bracket() {
        let p = all_sectors();
        assert!(matches!(
            p.peak_productivity((1e5, 1e6)),
            Err(ModelError::NoRootInBracket { .. })
        ));
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(-1.0, 0.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(-1.0, 0.0, -5.0, 1.0).is_err());
        assert!(ModelParams::new(-1.0, 0.0, 1.0, -0.1).is_err());
        assert!(ModelParams::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.0, 0.0, 1.0, 0.0).is_ok());
    }
}
