//! Subcommand implementations. Every successful run writes its data files
//! plus a manifest.json with the fully resolved configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde_json::json;

use prodeq::fit::{fit as fit_curve, BinnedCurve, FitOptions, SyntheticBins};
use prodeq::manifest::{sha256_file, FileDigest, RunManifest};
use prodeq::model::{CapacityLaw, Limiter, ModelParams};
use prodeq::pipeline::{
    clean, firm_pdf, mean_workers_curve, read_firm_records, synthetic_firms, worker_pdf,
    write_firm_records, CleaningReport, LogBinning, SyntheticFirmSpec, DEFAULT_EXCLUDED_SECTORS,
};
use prodeq::sim::{
    flux_balance_report, init_state, run, write_flux_csv, write_occupancy_csv, InitSpec,
    ProductivityGrid, SimConfig,
};
use prodeq::verify::{run_suite, Suite};

use crate::config::Resolver;
use crate::{
    AnalyzeArgs, CliError, FitArgs, SimulateArgs, SynthCurveArgs, SynthFirmsArgs, VerifyArgs,
};

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    let file = File::create(&path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn digest(path: &Path) -> Result<FileDigest, CliError> {
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_file(path)
            .map_err(|e| CliError::Data(format!("cannot digest {}: {e}", path.display())))?,
    })
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
    let mut out = create(dir, name)?;
    let body = serde_json::to_string_pretty(value).map_err(data_err)?;
    writeln!(out, "{body}")?;
    Ok(())
}

const SIMULATE_KEYS: &[&str] = &[
    "out_dir",
    "levels",
    "dc",
    "workers",
    "output_index",
    "steps",
    "burn_in",
    "sample_every",
    "seed",
    "limiter",
    "amplitude",
    "gamma",
];

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut r = Resolver::new(
        "simulate",
        SIMULATE_KEYS,
        args.common.config.as_deref(),
        args.common.from_manifest.as_deref(),
    )?;
    r.set_flag(
        "out_dir",
        args.common.out_dir.map(|p| p.display().to_string()),
    );
    r.set_flag("levels", args.levels);
    r.set_flag("dc", args.dc);
    r.set_flag("workers", args.workers);
    r.set_flag("output_index", args.output_index);
    r.set_flag("steps", args.steps);
    r.set_flag("burn_in", args.burn_in);
    r.set_flag("sample_every", args.sample_every);
    r.set_flag("seed", args.seed);
    r.set_flag("limiter", args.limiter);
    r.set_flag("amplitude", args.amplitude);
    r.set_flag("gamma", args.gamma);

    let out_dir = r.path_field("out_dir", ".");
    let levels: usize = r.field("levels", 20)?;
    let dc: f64 = r.field("dc", 1.0)?;
    let workers = r.count_field("workers", 2000)?;
    let output_index = r.count_field_with("output_index", || workers * (levels as u64 + 1) / 2)?;
    let steps = r.count_field("steps", 1_000_000)?;
    let burn_in = r.count_field_with("burn_in", || steps / 10)?;
    let sample_every = r.count_field("sample_every", 100)?;
    let seed = r.required_count("seed", "--seed")?;
    let limiter = match r.string_field("limiter", "unbounded").as_str() {
        "unbounded" => Limiter::Unbounded,
        "linear" => {
            let amplitude: f64 = r
                .optional("amplitude")?
                .ok_or_else(|| CliError::Data("the linear limiter needs --amplitude".into()))?;
            let gamma: f64 = r
                .optional("gamma")?
                .ok_or_else(|| CliError::Data("the linear limiter needs --gamma".into()))?;
            Limiter::LinearRamp(CapacityLaw::new(amplitude, gamma).map_err(data_err)?)
        }
        other => {
            return Err(CliError::Data(format!(
                "unknown limiter '{other}' (expected linear | unbounded)"
            )))
        }
    };

    let grid = ProductivityGrid::new(levels, dc)?;
    let state = init_state(
        &grid,
        &InitSpec::Targets {
            workers,
            output_index,
        },
        &limiter,
    )?;
    let config = SimConfig {
        seed,
        steps,
        burn_in,
        sample_every,
        limiter,
        grid,
    };
    let result = run(&config, state)?;
    let report = flux_balance_report(&result.ledger);

    ensure_dir(&out_dir)?;
    let mut occ = create(&out_dir, "occupancy.csv")?;
    write_occupancy_csv(&mut occ, &grid, &result.averages, &config.limiter)?;
    occ.flush()?;
    let mut flux = create(&out_dir, "flux.csv")?;
    write_flux_csv(&mut flux, &report)?;
    flux.flush()?;

    let mut manifest = RunManifest::new("simulate");
    manifest.config = r.into_map();
    manifest.seed = Some(seed);
    manifest.outputs = vec!["occupancy.csv".into(), "flux.csv".into()];
    manifest.summary = json!({
        "workers": result.state.workers(),
        "output_index": result.state.output_index(),
        "proposals": result.proposals,
        "accepted": result.accepted,
        "acceptance_rate": result.acceptance_rate(),
        "samples": result.averages.samples(),
        "flux_signatures_reported": report.lines.len(),
        "flux_flagged": report.flagged,
        "flux_flagged_fraction": report.flagged_fraction(),
    });
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest
        .write_to(&out_dir.join("manifest.json"))
        .map_err(data_err)?;
    Ok(())
}

const FIT_KEYS: &[&str] = &[
    "out_dir",
    "curve",
    "emit_curve",
    "tol",
    "max_evals",
    "beta_starts",
    "gamma_starts",
];

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut r = Resolver::new(
        "fit",
        FIT_KEYS,
        args.common.config.as_deref(),
        args.common.from_manifest.as_deref(),
    )?;
    r.set_flag(
        "out_dir",
        args.common.out_dir.map(|p| p.display().to_string()),
    );
    r.set_flag("curve", args.curve.map(|p| p.display().to_string()));
    r.set_flag("emit_curve", args.emit_curve.then_some(true));
    r.set_flag("tol", args.tol);
    r.set_flag("max_evals", args.max_evals);
    r.set_flag("beta_starts", args.beta_starts);
    r.set_flag("gamma_starts", args.gamma_starts);

    let out_dir = r.path_field("out_dir", ".");
    let curve_path = r.required_path("curve", "--curve")?;
    let emit_curve = r.bool_field("emit_curve", false)?;
    let defaults = FitOptions::default();
    let options = FitOptions {
        tol: r.field("tol", defaults.tol)?,
        max_evals_per_start: r.count_field("max_evals", defaults.max_evals_per_start as u64)?
            as usize,
        beta_starts: r.f64_list_field("beta_starts", &defaults.beta_starts)?,
        gamma_starts: r.f64_list_field("gamma_starts", &defaults.gamma_starts)?,
    };

    let file = File::open(&curve_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", curve_path.display())))?;
    let curve = BinnedCurve::from_csv(file).map_err(data_err)?;

    ensure_dir(&out_dir)?;
    let (fit_json, mut outputs) = fit_and_write(&out_dir, &curve, &options, emit_curve)?;
    outputs.insert(0, "fit.json".into());

    let mut manifest = RunManifest::new("fit");
    manifest.config = r.into_map();
    manifest.inputs = vec![digest(&curve_path)?];
    manifest.outputs = outputs;
    manifest.summary = fit_json;
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest
        .write_to(&out_dir.join("manifest.json"))
        .map_err(data_err)?;
    Ok(())
}

/// Runs the fitter, writes fit.json (and optionally the fitted curve), and
/// returns the JSON summary plus extra output names.
fn fit_and_write(
    out_dir: &Path,
    curve: &BinnedCurve,
    options: &FitOptions,
    emit_curve: bool,
) -> Result<(serde_json::Value, Vec<String>), CliError> {
    let result = fit_curve(curve, options).map_err(data_err)?;
    let peak = peak_within_data(&result.params, curve);
    let fit_json = json!({
        "params": result.params,
        "chi2": result.chi2,
        "n_evals": result.n_evals,
        "converged": result.converged,
        "start_index": result.start_index,
        "peak_productivity": peak,
    });
    write_json(out_dir, "fit.json", &fit_json)?;
    let mut outputs = Vec::new();
    if emit_curve {
        let mut out = create(out_dir, "fitted_curve.csv")?;
        writeln!(out, "c_center,n_model")?;
        for bin in curve.bins() {
            let n = result
                .params
                .mean_occupancy(bin.c_center)
                .map_err(data_err)?;
            writeln!(out, "{},{n}", bin.c_center)?;
        }
        out.flush()?;
        outputs.push("fitted_curve.csv".into());
    }
    Ok((fit_json, outputs))
}

/// Peak position bracketed a decade beyond the data range; absent when the
/// fitted parameters give a monotone curve or push the peak outside.
fn peak_within_data(params: &ModelParams, curve: &BinnedCurve) -> Option<f64> {
    let bins = curve.bins();
    let lo = bins[0].c_center / 10.0;
    let hi = bins[bins.len() - 1].c_center * 10.0;
    params.peak_productivity((lo, hi)).ok()
}

const ANALYZE_KEYS: &[&str] = &[
    "out_dir",
    "records",
    "c_min",
    "c_max",
    "bins_per_decade",
    "exclude_sectors",
    "units_scale",
    "fit",
];

pub fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut r = Resolver::new(
        "analyze",
        ANALYZE_KEYS,
        args.common.config.as_deref(),
        args.common.from_manifest.as_deref(),
    )?;
    r.set_flag(
        "out_dir",
        args.common.out_dir.map(|p| p.display().to_string()),
    );
    r.set_flag("records", args.records.map(|p| p.display().to_string()));
    r.set_flag("c_min", args.c_min);
    r.set_flag("c_max", args.c_max);
    r.set_flag("bins_per_decade", args.bins_per_decade);
    r.set_flag("exclude_sectors", args.exclude_sectors);
    r.set_flag("units_scale", args.units_scale);
    r.set_flag("fit", args.fit.then_some(true));

    let out_dir = r.path_field("out_dir", ".");
    let records_path = r.required_path("records", "--records")?;
    let c_min: f64 = r.field("c_min", 1e2)?;
    let c_max: f64 = r.field("c_max", 1e7)?;
    let bins_per_decade: u32 = r.field("bins_per_decade", 20)?;
    let exclude_raw = r.string_field("exclude_sectors", &DEFAULT_EXCLUDED_SECTORS.join(","));
    let units_scale: f64 = r.field("units_scale", 1.0)?;
    let run_fit = r.bool_field("fit", false)?;
    let exclusions: Vec<String> = exclude_raw
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();

    let file = File::open(&records_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", records_path.display())))?;
    let records = read_firm_records(file, units_scale).map_err(data_err)?;
    let (survivors, tally) = clean(&records, &exclusions);
    if survivors.is_empty() {
        return Err(CliError::Data(format!(
            "no records survived cleaning ({} rejected)",
            tally.total()
        )));
    }
    let report = CleaningReport {
        input_records: records.len() as u64,
        clean_records: survivors.len() as u64,
        rejections: tally,
    };

    let binning = LogBinning::new(c_min, c_max, bins_per_decade).map_err(data_err)?;
    let firms = firm_pdf(&survivors, &binning).map_err(data_err)?;
    let workers = worker_pdf(&survivors, &binning).map_err(data_err)?;
    let curve = mean_workers_curve(&survivors, &binning).map_err(data_err)?;

    ensure_dir(&out_dir)?;
    let mut out = create(&out_dir, "firm_pdf.csv")?;
    firms.write_csv(&mut out).map_err(data_err)?;
    out.flush()?;
    let mut out = create(&out_dir, "worker_pdf.csv")?;
    workers.write_csv(&mut out).map_err(data_err)?;
    out.flush()?;
    let mut out = create(&out_dir, "curve.csv")?;
    curve.write_csv(&mut out).map_err(data_err)?;
    out.flush()?;
    let report_json = serde_json::to_value(&report).map_err(data_err)?;
    write_json(&out_dir, "cleaning_report.json", &report_json)?;

    let mut outputs = vec![
        "firm_pdf.csv".into(),
        "worker_pdf.csv".into(),
        "curve.csv".into(),
        "cleaning_report.json".into(),
    ];
    let mut summary = json!({ "cleaning": report_json });
    if run_fit {
        let (fit_json, extra) = fit_and_write(&out_dir, &curve, &FitOptions::default(), false)?;
        outputs.push("fit.json".into());
        outputs.extend(extra);
        summary["fit"] = fit_json;
    }

    let mut manifest = RunManifest::new("analyze");
    manifest.config = r.into_map();
    manifest.inputs = vec![digest(&records_path)?];
    manifest.outputs = outputs;
    manifest.summary = summary;
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest
        .write_to(&out_dir.join("manifest.json"))
        .map_err(data_err)?;
    Ok(())
}

const SYNTH_CURVE_KEYS: &[&str] = &[
    "out_dir",
    "beta",
    "mu",
    "amplitude",
    "gamma",
    "c_min",
    "c_max",
    "bins",
    "noise",
    "seed",
];

pub fn synth_curve(args: SynthCurveArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut r = Resolver::new(
        "synth curve",
        SYNTH_CURVE_KEYS,
        args.common.config.as_deref(),
        args.common.from_manifest.as_deref(),
    )?;
    r.set_flag(
        "out_dir",
        args.common.out_dir.map(|p| p.display().to_string()),
    );
    r.set_flag("beta", args.beta);
    r.set_flag("mu", args.mu);
    r.set_flag("amplitude", args.amplitude);
    r.set_flag("gamma", args.gamma);
    r.set_flag("c_min", args.c_min);
    r.set_flag("c_max", args.c_max);
    r.set_flag("bins", args.bins);
    r.set_flag("noise", args.noise);
    r.set_flag("seed", args.seed);

    let out_dir = r.path_field("out_dir", ".");
    let params = resolve_params(&mut r)?;
    let layout = SyntheticBins {
        c_min: r.field("c_min", 1e3)?,
        c_max: r.field("c_max", 1e6)?,
        bins: r.count_field("bins", 50)? as usize,
    };
    let noise: f64 = r.field("noise", 0.0)?;
    let seed = r.required_count("seed", "--seed")?;

    let curve = prodeq::fit::synthetic_curve(&params, &layout, noise, seed).map_err(data_err)?;
    ensure_dir(&out_dir)?;
    let mut out = create(&out_dir, "curve.csv")?;
    curve.write_csv(&mut out).map_err(data_err)?;
    out.flush()?;

    let mut manifest = RunManifest::new("synth curve");
    manifest.config = r.into_map();
    manifest.seed = Some(seed);
    manifest.outputs = vec!["curve.csv".into()];
    manifest.summary = json!({ "bins": curve.len(), "noise": noise });
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest
        .write_to(&out_dir.join("manifest.json"))
        .map_err(data_err)?;
    Ok(())
}

const SYNTH_FIRMS_KEYS: &[&str] = &[
    "out_dir",
    "beta",
    "mu",
    "amplitude",
    "gamma",
    "count",
    "c_min",
    "c_max",
    "seed",
    "year",
    "sector",
];

pub fn synth_firms(args: SynthFirmsArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut r = Resolver::new(
        "synth firms",
        SYNTH_FIRMS_KEYS,
        args.common.config.as_deref(),
        args.common.from_manifest.as_deref(),
    )?;
    r.set_flag(
        "out_dir",
        args.common.out_dir.map(|p| p.display().to_string()),
    );
    r.set_flag("beta", args.beta);
    r.set_flag("mu", args.mu);
    r.set_flag("amplitude", args.amplitude);
    r.set_flag("gamma", args.gamma);
    r.set_flag("count", args.count);
    r.set_flag("c_min", args.c_min);
    r.set_flag("c_max", args.c_max);
    r.set_flag("seed", args.seed);
    r.set_flag("year", args.year);
    r.set_flag("sector", args.sector);

    let out_dir = r.path_field("out_dir", ".");
    let params = resolve_params(&mut r)?;
    let spec = SyntheticFirmSpec {
        count: r.count_field("count", 10_000)? as usize,
        c_min: r.field("c_min", 1e3)?,
        c_max: r.field("c_max", 1e6)?,
        year: r.field("year", 2008)?,
        sector: r.string_field("sector", "synthetic"),
    };
    let seed = r.required_count("seed", "--seed")?;

    let firms = synthetic_firms(&params, &spec, seed).map_err(data_err)?;
    ensure_dir(&out_dir)?;
    let mut out = create(&out_dir, "records.csv")?;
    write_firm_records(&mut out, &firms).map_err(data_err)?;
    out.flush()?;

    let mut manifest = RunManifest::new("synth firms");
    manifest.config = r.into_map();
    manifest.seed = Some(seed);
    manifest.outputs = vec!["records.csv".into()];
    manifest.summary = json!({ "count": firms.len() });
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest
        .write_to(&out_dir.join("manifest.json"))
        .map_err(data_err)?;
    Ok(())
}

fn resolve_params(r: &mut Resolver) -> Result<ModelParams, CliError> {
    let beta: f64 = r.required("beta", "--beta")?;
    let mu: f64 = r.required("mu", "--mu")?;
    let amplitude: f64 = r.required("amplitude", "--amplitude")?;
    let gamma: f64 = r.required("gamma", "--gamma")?;
    ModelParams::new(beta, mu, amplitude, gamma).map_err(data_err)
}

pub fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let suite: Suite = args.suite.parse().map_err(CliError::Usage)?;
    let out_dir = args.out_dir.unwrap_or_else(|| ".".into());
    let report = run_suite(suite);
    for check in &report.checks {
        println!(
            "{} {} — {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    ensure_dir(&out_dir)?;
    let report_json = serde_json::to_value(&report).map_err(data_err)?;
    write_json(&out_dir, "verify_report.json", &report_json)?;

    let mut manifest = RunManifest::new("verify");
    manifest
        .config
        .insert("suite".into(), suite.name().to_string());
    manifest
        .config
        .insert("out_dir".into(), out_dir.display().to_string());
    manifest.outputs = vec!["verify_report.json".into()];
    manifest.summary = json!({
        "passed": report.passed,
        "checks": report.checks.len(),
    });
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest
        .write_to(&out_dir.join("manifest.json"))
        .map_err(data_err)?;

    if report.passed {
        Ok(())
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        Err(CliError::Invariant(format!(
            "{failed} of {} verification checks failed",
            report.checks.len()
        )))
    }
}
