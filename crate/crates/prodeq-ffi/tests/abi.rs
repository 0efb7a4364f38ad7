//! Exercises the C ABI exactly as a foreign caller would: through the
//! exported extern "C" functions, opaque handles and status codes.

use std::ffi::CStr;
use std::ptr;

use prodeq_ffi::*;

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(prodeq_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

fn new_model(beta: f64, mu: f64, amplitude: f64, gamma: f64) -> *mut prodeq_model {
    let mut handle = ptr::null_mut();
    let status = unsafe { prodeq_model_new(beta, mu, amplitude, gamma, &mut handle) };
    assert_eq!(status, prodeq_status::PRODEQ_OK, "{}", last_error());
    assert!(!handle.is_null());
    handle
}

#[test]
fn model_evaluations_match_reference_values() {
    let model = new_model(-1.25e-4, -2.32e4, 5.84e7, 1.18);
    unsafe {
        let mut v = 0.0;
        assert_eq!(
            prodeq_model_capacity(model, 3.14e4, &mut v),
            prodeq_status::PRODEQ_OK
        );
        assert!((v / 288.4269665308723 - 1.0).abs() < 1e-13);

        assert_eq!(
            prodeq_model_mean_occupancy(model, 3.14e4, &mut v),
            prodeq_status::PRODEQ_OK
        );
        assert!((v / 219.61813022286642 - 1.0).abs() < 1e-13);

        assert_eq!(
            prodeq_model_log_partition(model, 3.14e4, &mut v),
            prodeq_status::PRODEQ_OK
        );
        assert!((v / 413.34749315632192 - 1.0).abs() < 1e-12);

        assert_eq!(
            prodeq_model_peak_productivity(model, 1e3, 1e6, &mut v),
            prodeq_status::PRODEQ_OK
        );
        assert!((v / 3.14e4 - 1.0).abs() < 0.05);

        let mut solved = 0.0;
        assert_eq!(
            prodeq_model_solve_occupancy(model, 3.14e4, 1e-12, &mut solved),
            prodeq_status::PRODEQ_OK
        );
        let mut closed = 0.0;
        prodeq_model_mean_occupancy(model, 3.14e4, &mut closed);
        assert!((solved / closed - 1.0).abs() < 1e-10);

        prodeq_model_free(model);
    }
}

#[test]
fn boltzmann_and_domain_errors() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(
            prodeq_boltzmann_occupancy(10.0, 0.0, 0.0, &mut v),
            prodeq_status::PRODEQ_OK
        );
        assert_eq!(v, 1.0);

        assert_eq!(
            prodeq_boltzmann_occupancy(-3.0, 0.1, 0.0, &mut v),
            prodeq_status::PRODEQ_ERR_DOMAIN
        );
        assert!(last_error().contains("positive"));

        assert_eq!(
            prodeq_boltzmann_occupancy(1.0, 0.1, 0.0, ptr::null_mut()),
            prodeq_status::PRODEQ_ERR_NULL_ARGUMENT
        );
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let mut handle = ptr::null_mut();
    let status = unsafe { prodeq_model_new(-1e-4, 0.0, -5.0, 1.0, &mut handle) };
    assert_eq!(status, prodeq_status::PRODEQ_ERR_INVALID_ARGUMENT);
    assert!(last_error().contains("amplitude"));

    let model = new_model(1e-4, 0.0, 10.0, 1.0);
    let mut v = 0.0;
    // Positive temperature has no interior peak.
    let status = unsafe { prodeq_model_peak_productivity(model, 1.0, 1e6, &mut v) };
    assert_eq!(status, prodeq_status::PRODEQ_ERR_SOLVER);
    unsafe { prodeq_model_free(model) };
}

#[test]
fn curve_fit_round_trip_through_the_abi() {
    let model = new_model(-1.25e-4, -2.32e4, 5.84e7, 1.18);
    unsafe {
        let mut curve = ptr::null_mut();
        assert_eq!(
            prodeq_synthetic_curve(model, 1e3, 1e6, 50, 0.0, 0, &mut curve),
            prodeq_status::PRODEQ_OK
        );
        assert_eq!(prodeq_curve_len(curve), 50);

        let mut chi2 = f64::NAN;
        assert_eq!(
            prodeq_chi_square(model, curve, &mut chi2),
            prodeq_status::PRODEQ_OK
        );
        assert!(chi2 < 1e-20);

        let mut result = std::mem::zeroed::<prodeq_fit_result>();
        assert_eq!(prodeq_fit(curve, &mut result), prodeq_status::PRODEQ_OK);
        assert_eq!(result.converged, 1);
        assert!((result.beta / -1.25e-4 - 1.0).abs() < 1e-3);
        assert!((result.mu / -2.32e4 - 1.0).abs() < 1e-3);
        assert!((result.gamma / 1.18 - 1.0).abs() < 1e-3);
        assert!((result.amplitude.ln() / 5.84e7_f64.ln() - 1.0).abs() < 1e-3);

        prodeq_curve_free(curve);
        prodeq_model_free(model);
    }
}

#[test]
fn curve_construction_validates_and_sorts() {
    unsafe {
        let centers = [100.0, 10.0, 1000.0];
        let means = [5.0, 2.0, 9.0];
        let mut curve = ptr::null_mut();
        assert_eq!(
            prodeq_curve_new(centers.as_ptr(), means.as_ptr(), ptr::null(), 3, &mut curve),
            prodeq_status::PRODEQ_OK
        );
        assert_eq!(prodeq_curve_len(curve), 3);
        // Bins come back sorted by center, with the default unit weight.
        let (mut c, mut n, mut w) = (0.0, 0.0, 0.0);
        assert_eq!(
            prodeq_curve_bin(curve, 0, &mut c, &mut n, &mut w),
            prodeq_status::PRODEQ_OK
        );
        assert_eq!((c, n, w), (10.0, 2.0, 1.0));
        assert_eq!(
            prodeq_curve_bin(curve, 3, &mut c, &mut n, &mut w),
            prodeq_status::PRODEQ_ERR_INVALID_ARGUMENT
        );
        prodeq_curve_free(curve);

        let bad_means = [5.0, -2.0, 9.0];
        assert_eq!(
            prodeq_curve_new(
                centers.as_ptr(),
                bad_means.as_ptr(),
                ptr::null(),
                3,
                &mut curve
            ),
            prodeq_status::PRODEQ_ERR_INVALID_ARGUMENT
        );

        // Too few bins for a fit.
        let mut short = ptr::null_mut();
        assert_eq!(
            prodeq_curve_new(centers.as_ptr(), means.as_ptr(), ptr::null(), 3, &mut short),
            prodeq_status::PRODEQ_OK
        );
        let mut result = std::mem::zeroed::<prodeq_fit_result>();
        assert_eq!(
            prodeq_fit(short, &mut result),
            prodeq_status::PRODEQ_ERR_ILL_POSED
        );
        prodeq_curve_free(short);
    }
}

#[test]
fn simulation_through_the_abi_conserves_shape() {
    unsafe {
        let levels = 10usize;
        let mut means = vec![0.0f64; levels];
        let mut vars = vec![0.0f64; levels];
        let status = prodeq_simulate_occupancy(
            levels,
            1.0,
            400,
            2200,
            200_000,
            20_000,
            20,
            11,
            0,
            0.0,
            0.0,
            means.as_mut_ptr(),
            vars.as_mut_ptr(),
        );
        assert_eq!(status, prodeq_status::PRODEQ_OK, "{}", last_error());
        let total: f64 = means.iter().sum();
        assert!((total / 400.0 - 1.0).abs() < 1e-9, "mean total {total}");
        assert!(vars.iter().all(|v| *v >= 0.0));

        // Infeasible totals surface as such.
        let status = prodeq_simulate_occupancy(
            3,
            1.0,
            1,
            4,
            100,
            0,
            1,
            1,
            0,
            0.0,
            0.0,
            ptr::null_mut(),
            ptr::null_mut(),
        );
        assert_eq!(status, prodeq_status::PRODEQ_ERR_INFEASIBLE);
    }
}

#[test]
fn version_and_header_exist() {
    let version = unsafe { CStr::from_ptr(prodeq_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));

    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("prodeq.h");
    let body = std::fs::read_to_string(header).expect("generated header");
    for symbol in [
        "prodeq_model_new",
        "prodeq_fit",
        "prodeq_simulate_occupancy",
        "PRODEQ_ERR_SOLVER",
        "typedef struct prodeq_model prodeq_model;",
    ] {
        assert!(body.contains(symbol), "header missing {symbol}");
    }
}
