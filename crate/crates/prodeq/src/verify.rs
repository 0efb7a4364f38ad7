//! Self-verification suites: closed-form equivalences, chain balance on a
//! reference run, and fit round-trips. Each check is independent and
//! reports pass/fail with a one-line detail, so a failing deployment
//! pinpoints the broken layer.

use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::fit::{fit, synthetic_curve, FitOptions, SyntheticBins};
use crate::model::{
    boltzmann_occupancy, solve_occupancy_fixed_point, CapacityLaw, Limiter, ModelParams,
};
use crate::sim::{
    boltzmann_beta_from_totals, flux_balance_report, g_linearity_check, init_state, run, InitSpec,
    ProductivityGrid, SimConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    ClosedForm,
    Balance,
    Roundtrip,
    All,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "closed-form" => Ok(Suite::ClosedForm),
            "balance" => Ok(Suite::Balance),
            "roundtrip" => Ok(Suite::Roundtrip),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite '{other}' (expected closed-form | balance | roundtrip | all)"
            )),
        }
    }
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::ClosedForm => "closed-form",
            Suite::Balance => "balance",
            Suite::Roundtrip => "roundtrip",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

pub fn run_suite(suite: Suite) -> VerifyReport {
    let mut checks = Vec::new();
    match suite {
        Suite::ClosedForm => closed_form_checks(&mut checks),
        Suite::Balance => balance_checks(&mut checks),
        Suite::Roundtrip => roundtrip_checks(&mut checks),
        Suite::All => {
            closed_form_checks(&mut checks);
            balance_checks(&mut checks);
            roundtrip_checks(&mut checks);
        }
    }
    VerifyReport {
        suite: suite.name().into(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

fn push(checks: &mut Vec<Check>, name: &str, passed: bool, detail: String) {
    checks.push(Check {
        name: name.into(),
        passed,
        detail,
    });
}

fn all_sectors() -> ModelParams {
    ModelParams::new(-1.25e-4, -2.32e4, 5.84e7, 1.18).unwrap()
}

fn closed_form_checks(checks: &mut Vec<Check>) {
    // Fixed-point solver vs closed form across parameters and 6 decades.
    let mut worst: f64 = 0.0;
    let mut points = 0usize;
    for beta in [-1e-3, -1.25e-4, 1e-4] {
        for gamma in [0.5, 1.18, 2.0] {
            let p = ModelParams::new(beta, -2.32e4, 5.84e7, gamma).unwrap();
            for k in 0..=60 {
                let c = 1e1 * 10f64.powf(k as f64 / 10.0);
                let fp = solve_occupancy_fixed_point(c, &p.limiter(), p.beta, p.mu, 1e-12)
                    .expect("solver");
                let cf = p.mean_occupancy(c).expect("closed form");
                worst = worst.max((fp - cf).abs() / cf.abs());
                points += 1;
            }
        }
    }
    push(
        checks,
        "closed-form equivalence",
        worst < 1e-8,
        format!("worst relative deviation {worst:.3e} over {points} points"),
    );

    // Boltzmann limit: huge flat capacity reproduces the exponential law.
    let p = ModelParams::new(-1e-4, 0.0, 1e9, 0.0).unwrap();
    let mut worst = 0.0f64;
    for k in 0..=68 {
        let c = 1e-2 * 10f64.powf(k as f64 / 10.0);
        let full = p.mean_occupancy(c).unwrap();
        let boltz = boltzmann_occupancy(c, p.beta, p.mu).unwrap();
        worst = worst.max((full - boltz).abs() / boltz);
    }
    push(
        checks,
        "boltzmann limit",
        worst < 1e-6,
        format!("worst relative deviation {worst:.3e}"),
    );

    // Partition-function consistency at random parameter points.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..120 {
        let beta = -10f64.powf(rng.random_range(-5.0..-3.0));
        let mu_mag = 10f64.powf(rng.random_range(3.0..4.7));
        let mu = if rng.random::<bool>() {
            mu_mag
        } else {
            -mu_mag
        };
        let amplitude = 10f64.powf(rng.random_range(5.0..9.0));
        let gamma = rng.random_range(0.3..2.0);
        let c = 10f64.powf(rng.random_range(2.0..6.0));
        let p = ModelParams::new(beta, mu, amplitude, gamma).unwrap();
        let h = 1e-6 * mu.abs();
        let plus = ModelParams { mu: mu + h, ..p };
        let minus = ModelParams { mu: mu - h, ..p };
        let deriv = (plus.log_partition(c).unwrap() - minus.log_partition(c).unwrap()) / (2.0 * h);
        let n = p.mean_occupancy(c).unwrap();
        worst = worst.max((deriv / beta - n).abs() / n);
    }
    push(
        checks,
        "partition-function consistency",
        worst < 1e-6,
        format!("worst relative deviation {worst:.3e} over 120 random points"),
    );

    // Peak positions of the three reference parameter rows.
    let rows = [
        ("all", all_sectors(), 3.14e4),
        (
            "manufacturing",
            ModelParams::new(-1.78e-4, -1.63e4, 8.51e7, 1.17).unwrap(),
            2.70e4,
        ),
        (
            "non-manufacturing",
            ModelParams::new(-0.86e-4, -3.47e4, 1.52e7, 1.08).unwrap(),
            3.74e4,
        ),
    ];
    let mut detail = String::new();
    let mut ok = true;
    for (name, p, expected) in rows {
        let cp = p.peak_productivity((1e3, 1e6)).expect("peak");
        let rel = (cp - expected).abs() / expected;
        ok &= rel < 0.05;
        detail.push_str(&format!("{name}: {cp:.0} vs {expected:.0} ({rel:.2e}); "));
    }
    push(checks, "peak positions", ok, detail);
}

fn balance_checks(checks: &mut Vec<Check>) {
    let grid = ProductivityGrid::new(12, 1.0).unwrap();
    let limiter = Limiter::LinearRamp(CapacityLaw::new(900.0, 1.0).unwrap());
    let init = init_state(
        &grid,
        &InitSpec::Targets {
            workers: 600,
            output_index: 4200,
        },
        &limiter,
    )
    .expect("feasible init");
    let (n0, y0) = (init.workers(), init.output_index());
    let config = SimConfig {
        seed: 7,
        steps: 2_000_000,
        burn_in: 400_000,
        sample_every: 20,
        limiter,
        grid,
    };
    let out = run(&config, init).expect("run");
    push(
        checks,
        "conservation",
        out.state.recomputed_totals() == (n0, y0),
        format!(
            "totals {:?} vs initial ({n0}, {y0})",
            out.state.recomputed_totals()
        ),
    );
    let report = flux_balance_report(&out.ledger);
    push(
        checks,
        "detailed balance",
        !report.lines.is_empty() && report.flagged_fraction() <= 0.01,
        format!(
            "{} of {} well-sampled signatures beyond |z| = 3",
            report.flagged,
            report.lines.len()
        ),
    );
    let shape = g_linearity_check(&out.averages, &config.limiter, &grid).expect("g-linearity");
    push(
        checks,
        "stationary shape (capacity-limited)",
        shape.r_squared > 0.99,
        format!(
            "R^2 = {:.5} over {} levels",
            shape.r_squared, shape.levels_used
        ),
    );

    // Unbounded reference run: Boltzmann shape with the sign of the slope
    // fixed by the conserved totals.
    let grid = ProductivityGrid::new(12, 1.0).unwrap();
    let config = SimConfig {
        seed: 11,
        steps: 2_000_000,
        burn_in: 400_000,
        sample_every: 20,
        limiter: Limiter::Unbounded,
        grid,
    };
    let init = init_state(
        &grid,
        &InitSpec::Targets {
            workers: 600,
            output_index: 4800,
        },
        &Limiter::Unbounded,
    )
    .expect("feasible init");
    let out = run(&config, init).expect("run");
    let shape = g_linearity_check(&out.averages, &Limiter::Unbounded, &grid).expect("regression");
    let implied = boltzmann_beta_from_totals(&grid, 600, 4800).expect("implied beta");
    let sign_ok = shape.slope.signum() == (-implied).signum();
    push(
        checks,
        "stationary shape (boltzmann)",
        shape.r_squared > 0.99 && sign_ok,
        format!(
            "R^2 = {:.5}, slope {:.4e} vs implied -beta {:.4e}",
            shape.r_squared, shape.slope, -implied
        ),
    );
}

fn roundtrip_checks(checks: &mut Vec<Check>) {
    let truth = all_sectors();
    let layout = SyntheticBins {
        c_min: 1e3,
        c_max: 1e6,
        bins: 50,
    };
    let curve = synthetic_curve(&truth, &layout, 0.0, 0).expect("curve");
    let result = fit(&curve, &FitOptions::default()).expect("fit");
    let p = result.params;
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    let worst = rel(p.beta, truth.beta)
        .max(rel(p.mu, truth.mu))
        .max(rel(p.gamma, truth.gamma))
        .max(rel(p.amplitude.ln(), truth.amplitude.ln()));
    push(
        checks,
        "noiseless round-trip",
        result.converged && worst < 1e-3,
        format!(
            "worst parameter deviation {worst:.2e}, chi2 {:.2e}",
            result.chi2
        ),
    );

    let noisy = synthetic_curve(&truth, &layout, 0.05, 17).expect("curve");
    let result = fit(&noisy, &FitOptions::default()).expect("fit");
    let p = result.params;
    let ok = rel(p.beta, truth.beta) < 0.05
        && rel(p.mu, truth.mu) < 0.05
        && rel(p.gamma, truth.gamma) < 0.05
        && rel(p.amplitude.ln(), truth.amplitude.ln()) < 0.02;
    push(
        checks,
        "noisy round-trip",
        ok,
        format!(
            "beta {:.2e}, mu {:.2e}, gamma {:.2e}, lnA {:.2e}",
            rel(p.beta, truth.beta),
            rel(p.mu, truth.mu),
            rel(p.gamma, truth.gamma),
            rel(p.amplitude.ln(), truth.amplitude.ln())
        ),
    );
}
