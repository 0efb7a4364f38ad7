//! End-to-end exercises of the command-line surface: exit codes, config
//! precedence, and the per-subcommand output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_prodeq")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("prodeq-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const RECORDS_HEADER: &str = "firm_id,year,sector,net_profits,labor_costs,financing_costs,rental_expenses,taxes,depreciation,workers\n";

fn write_fixture_records(dir: &Path) -> PathBuf {
    let path = dir.join("records.csv");
    let body = format!(
        "{RECORDS_HEADER}\
         f1,2008,manufacturing,100,100,50,50,50,50,2\n\
         f2,2008,services,500,700,200,200,200,200,4\n\
         f3,2008,manufacturing,5000,9000,2000,2000,1000,1000,10\n\
         f4,2008,services,6000,8000,2000,2000,1000,1000,4\n\
         f5,2008,finance and insurance,100,100,50,50,50,50,1\n\
         f6,2008,manufacturing,100,,50,50,50,50,3\n"
    );
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(
        code(&run(&["simulate", "--steps", "10"])),
        64,
        "missing --seed"
    );
    assert_eq!(code(&run(&["verify", "bogus"])), 64, "unknown suite");
    assert_eq!(code(&run(&["frobnicate"])), 64, "unknown subcommand");
    assert_eq!(code(&run(&["fit"])), 64, "missing --curve");
    assert_eq!(code(&run(&["analyze"])), 64, "missing --records");
    assert_eq!(
        code(&run(&["synth", "curve", "--seed", "1"])),
        64,
        "missing params"
    );
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["simulate", "--help"])), 0);
}

#[test]
fn zero_step_simulation_reports_initial_occupancy() {
    let dir = tmp("steps0");
    let out_dir = dir.join("out");
    let out = run(&[
        "simulate",
        "--levels",
        "5",
        "--workers",
        "50",
        "--output-index",
        "150",
        "--steps",
        "0",
        "--seed",
        "1",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("occupancy.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "level_index,c,n_mean,n_var,g_of_c");
    let occupancies: Vec<(u64, f64)> = lines
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            (cols[0].parse().unwrap(), cols[2].parse().unwrap())
        })
        .collect();
    // The deterministic target construction: fill level 1, lift singles
    // upward until the output index matches (here 25 lifts to level 5).
    assert_eq!(occupancies.len(), 5);
    let total: f64 = occupancies.iter().map(|(_, n)| n).sum();
    assert_eq!(total, 50.0);
    let weighted: f64 = occupancies.iter().map(|(i, n)| *i as f64 * n).sum();
    assert_eq!(weighted, 150.0);
    // Variance column is all zero for the single degenerate sample.
    for line in fs::read_to_string(out_dir.join("occupancy.csv"))
        .unwrap()
        .lines()
        .skip(1)
    {
        assert_eq!(line.split(',').nth(3).unwrap(), "0");
    }
}

#[test]
fn simulate_infeasible_targets_exit_2() {
    let dir = tmp("infeasible");
    let out = run(&[
        "simulate",
        "--levels",
        "3",
        "--workers",
        "1",
        "--output-index",
        "4",
        "--steps",
        "10",
        "--seed",
        "1",
        "--out-dir",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unreachable"));
}

#[test]
fn fit_rejects_tiny_curves_with_exit_2() {
    let dir = tmp("fit2");
    let curve = dir.join("curve.csv");
    fs::write(
        &curve,
        "c_center,n_mean,weight\n100,5,1\n1000,20,1\n10000,8,1\n",
    )
    .unwrap();
    let out = run(&[
        "fit",
        "--curve",
        curve.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ill-posed"));
}

#[test]
fn fit_emit_curve_samples_model_at_input_centers() {
    let dir = tmp("fitemit");
    let synth_dir = dir.join("synth");
    let out = run(&[
        "synth",
        "curve",
        "--beta=-1.25e-4",
        "--mu=-2.32e4",
        "--amplitude",
        "5.84e7",
        "--gamma",
        "1.18",
        "--bins",
        "30",
        "--noise",
        "0",
        "--seed",
        "3",
        "--out-dir",
        synth_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fit_dir = dir.join("fit");
    let out = run(&[
        "fit",
        "--curve",
        synth_dir.join("curve.csv").to_str().unwrap(),
        "--emit-curve",
        "--out-dir",
        fit_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fitted = fs::read_to_string(fit_dir.join("fitted_curve.csv")).unwrap();
    let input = fs::read_to_string(synth_dir.join("curve.csv")).unwrap();
    assert_eq!(fitted.lines().count(), input.lines().count());
    assert!(fitted.starts_with("c_center,n_model\n"));
    // Noiseless input: the fitted model reproduces each bin closely.
    for (f, i) in fitted.lines().skip(1).zip(input.lines().skip(1)) {
        let model: f64 = f.split(',').nth(1).unwrap().parse().unwrap();
        let data: f64 = i.split(',').nth(1).unwrap().parse().unwrap();
        assert!((model / data - 1.0).abs() < 1e-4, "{model} vs {data}");
    }
    let fit_json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fit_dir.join("fit.json")).unwrap()).unwrap();
    assert!(fit_json["converged"].as_bool().unwrap());
    assert!(fit_json["peak_productivity"].as_f64().is_some());
    // The noiseless curve round-trips the generating parameters.
    let p = &fit_json["params"];
    assert!((p["beta"].as_f64().unwrap() / -1.25e-4 - 1.0).abs() < 1e-3);
    assert!((p["mu"].as_f64().unwrap() / -2.32e4 - 1.0).abs() < 1e-3);
    assert!((p["gamma"].as_f64().unwrap() / 1.18 - 1.0).abs() < 1e-3);
}

#[test]
fn analyze_writes_all_products() {
    let dir = tmp("analyze");
    let records = write_fixture_records(&dir);
    let out_dir = dir.join("out");
    let out = run(&[
        "analyze",
        "--records",
        records.to_str().unwrap(),
        "--c-min",
        "100",
        "--c-max",
        "10000",
        "--bins-per-decade",
        "1",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for file in [
        "firm_pdf.csv",
        "worker_pdf.csv",
        "curve.csv",
        "cleaning_report.json",
        "manifest.json",
    ] {
        assert!(out_dir.join(file).exists(), "{file} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("cleaning_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["input_records"], 6);
    assert_eq!(report["clean_records"], 4);
    assert_eq!(report["rejections"]["excluded_sector"], 1);
    assert_eq!(report["rejections"]["missing_value_added"], 1);
}

#[test]
fn analyze_all_excluded_exits_2() {
    let dir = tmp("allex");
    let path = dir.join("records.csv");
    fs::write(
        &path,
        format!("{RECORDS_HEADER}f1,2008,holding companies,1,1,1,1,1,1,2\n"),
    )
    .unwrap();
    let out = run(&[
        "analyze",
        "--records",
        path.to_str().unwrap(),
        "--out-dir",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no records survived"));
}

#[test]
fn analyze_empty_exclusion_override_keeps_everything() {
    let dir = tmp("noex");
    let path = dir.join("records.csv");
    fs::write(
        &path,
        format!("{RECORDS_HEADER}f1,2008,holding companies,100,100,50,50,50,50,2\n"),
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "analyze",
        "--records",
        path.to_str().unwrap(),
        "--exclude-sectors",
        "",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("cleaning_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["clean_records"], 1);
}

#[test]
fn config_file_feeds_flags_and_flags_win() {
    let dir = tmp("config");
    let config = dir.join("sim.conf");
    fs::write(
        &config,
        "# reference chain\nlevels = 6\nworkers = 40\nsteps = 100\nseed = 5\nout_dir = ignored\n",
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["levels"], "6");
    assert_eq!(manifest["config"]["workers"], "40");
    // The flag overrode the file's out_dir.
    assert_eq!(manifest["config"]["out_dir"], out_dir.to_str().unwrap());
    assert_eq!(manifest["seed"], 5);
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tmp("badkey");
    let config = dir.join("sim.conf");
    fs::write(&config, "levles = 6\nseed = 1\n").unwrap();
    let out = run(&["simulate", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("levles"));
}

#[test]
fn config_and_manifest_together_exit_64() {
    let dir = tmp("both");
    let config = dir.join("a.conf");
    fs::write(&config, "seed = 1\n").unwrap();
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--from-manifest",
        config.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 64);
}

#[test]
fn verify_reports_and_respects_suite_names() {
    let dir = tmp("verify");
    let out = run(&["verify", "closed-form", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS closed-form equivalence"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("verify_report.json")).unwrap()).unwrap();
    assert_eq!(report["suite"], "closed-form");
    assert_eq!(report["passed"], true);
}

#[test]
fn simulate_golden_run_is_reproducible() {
    // Fixed-seed run frozen as a regression fixture: the output digests
    // are pinned, so a silent change to the generator, the sampling
    // order, or the float formatting trips this test.
    let dir_a = tmp("golden-a");
    let dir_b = tmp("golden-b");
    let args = |out: &Path| {
        vec![
            "simulate".to_string(),
            "--levels".into(),
            "20".into(),
            "--dc".into(),
            "1".into(),
            "--workers".into(),
            "2000".into(),
            "--steps".into(),
            "2e4".into(),
            "--seed".into(),
            "42".into(),
            "--out-dir".into(),
            out.display().to_string(),
        ]
    };
    let out = Command::new(bin()).args(args(&dir_a)).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = Command::new(bin()).args(args(&dir_b)).output().unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read(dir_a.join("occupancy.csv")).unwrap(),
        fs::read(dir_b.join("occupancy.csv")).unwrap()
    );
    assert_eq!(
        prodeq::manifest::sha256_file(&dir_a.join("occupancy.csv")).unwrap(),
        "b2798de5eb1f34e53f9d1bdf02bc9dac968ad54589ec12567ff58f924b792203"
    );
    assert_eq!(
        prodeq::manifest::sha256_file(&dir_a.join("flux.csv")).unwrap(),
        "d08afafbd9f94ff06b82dccc83e73b246840149c4c684e7a2f4b649afcaab439"
    );
}
