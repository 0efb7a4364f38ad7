//! Firm-record ingestion, cleaning, and log-binned aggregation.
//!
//! Value added per firm is the six-component sum (net profits, labor costs,
//! financing costs, rental expenses, taxes, depreciation); a record with
//! any component missing carries no value added. Labor productivity is
//! value added per worker, in 10^3 yen/person; ingestion performs no unit
//! conversion beyond an optional one-time scale declared by the caller.
//! Cleaning drops excluded sectors, records missing value added or worker
//! counts, and non-positive value added (the log axis needs `c > 0`), and
//! tallies every rejection by reason.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{BinnedCurve, CurveBin, FitError};
use crate::model::{ModelError, ModelParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("invalid binning: {0}")]
    InvalidBinning(String),
    #[error("no records fall inside the binning range")]
    EmptyHistogram,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Curve(#[from] FitError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sectors excluded by default: each shows anomalously high productivity
/// driven by bookkeeping rather than production.
pub const DEFAULT_EXCLUDED_SECTORS: [&str; 3] = [
    "finance and insurance",
    "deep-sea foreign transport of freight",
    "holding companies",
];

/// One firm-year as ingested. Monetary fields are in 10^3 yen; a missing
/// field means the source had no entry, not zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmRecord {
    pub firm_id: String,
    pub year: i32,
    pub sector: String,
    pub net_profits: Option<f64>,
    pub labor_costs: Option<f64>,
    pub financing_costs: Option<f64>,
    pub rental_expenses: Option<f64>,
    pub taxes: Option<f64>,
    pub depreciation: Option<f64>,
    pub workers: Option<u64>,
}

/// Value added: the six-component sum, or missing if any component is.
/// Components may be negative (losses); the sum may come out non-positive
/// and is filtered later, not here.
pub fn value_added(record: &FirmRecord) -> Option<f64> {
    Some(
        record.net_profits?
            + record.labor_costs?
            + record.financing_costs?
            + record.rental_expenses?
            + record.taxes?
            + record.depreciation?,
    )
}

/// A record that survived cleaning: value added, workers and productivity
/// all present and positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanRecord {
    pub firm_id: String,
    pub year: i32,
    pub sector: String,
    pub value_added: f64,
    pub workers: u64,
    pub productivity: f64,
}

/// Rejection counts by reason. A record is counted once, under the first
/// matching reason in the order sector, missing value added, missing
/// workers, non-positive value added.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionTally {
    pub excluded_sector: u64,
    pub missing_value_added: u64,
    pub missing_workers: u64,
    pub nonpositive_value_added: u64,
}

impl RejectionTally {
    pub fn total(&self) -> u64 {
        self.excluded_sector
            + self.missing_value_added
            + self.missing_workers
            + self.nonpositive_value_added
    }
}

/// Summary emitted alongside cleaned outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_records: u64,
    pub clean_records: u64,
    pub rejections: RejectionTally,
}

/// Applies the filters and computes productivity for the survivors.
pub fn clean(records: &[FirmRecord], exclusions: &[String]) -> (Vec<CleanRecord>, RejectionTally) {
    let excluded: HashSet<&str> = exclusions.iter().map(|s| s.as_str()).collect();
    let mut tally = RejectionTally::default();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if excluded.contains(r.sector.as_str()) {
            tally.excluded_sector += 1;
            continue;
        }
        let y = match value_added(r) {
            Some(y) => y,
            None => {
                tally.missing_value_added += 1;
                continue;
            }
        };
        let n = match r.workers {
            Some(n) => n,
            None => {
                tally.missing_workers += 1;
                continue;
            }
        };
        if !(y > 0.0) {
            tally.nonpositive_value_added += 1;
            continue;
        }
        out.push(CleanRecord {
            firm_id: r.firm_id.clone(),
            year: r.year,
            sector: r.sector.clone(),
            value_added: y,
            workers: n,
            productivity: y / n as f64,
        });
    }
    (out, tally)
}

/// Logarithmic binning: edges at `c_min * 10^(k / bins_per_decade)`. The
/// covered range runs from `c_min` up to the first edge at or beyond
/// `c_max`; records outside it are ignored by the histograms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogBinning {
    c_min: f64,
    c_max: f64,
    bins_per_decade: u32,
}

impl LogBinning {
    pub fn new(c_min: f64, c_max: f64, bins_per_decade: u32) -> Result<Self, PipelineError> {
        if !(c_min > 0.0 && c_max > c_min) || !c_min.is_finite() || !c_max.is_finite() {
            return Err(PipelineError::InvalidBinning(format!(
                "need 0 < c_min < c_max, got [{c_min}, {c_max}]"
            )));
        }
        if bins_per_decade == 0 {
            return Err(PipelineError::InvalidBinning(
                "bins_per_decade must be at least 1".into(),
            ));
        }
        Ok(Self {
            c_min,
            c_max,
            bins_per_decade,
        })
    }

    pub fn bin_count(&self) -> usize {
        let decades = (self.c_max / self.c_min).log10();
        (decades * self.bins_per_decade as f64).ceil().max(1.0) as usize
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        (self.edge(bin), self.edge(bin + 1))
    }

    fn edge(&self, k: usize) -> f64 {
        self.c_min * 10f64.powf(k as f64 / self.bins_per_decade as f64)
    }

    /// Geometric mean of the bin edges.
    pub fn center(&self, bin: usize) -> f64 {
        let (lo, hi) = self.edges(bin);
        (lo * hi).sqrt()
    }

    /// Constant bin width in `ln c`.
    pub fn ln_width(&self) -> f64 {
        std::f64::consts::LN_10 / self.bins_per_decade as f64
    }

    pub fn bin_index(&self, c: f64) -> Option<usize> {
        if !(c >= self.c_min) {
            return None;
        }
        let t = (c / self.c_min).log10() * self.bins_per_decade as f64;
        let k = t.floor() as usize;
        (k < self.bin_count()).then_some(k)
    }
}

/// One bin of a normalized density over `ln c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdfBin {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

/// Histogram over `ln c` normalized to unit integral; empty bins are kept
/// with zero density so the output is plot-ready.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPdf {
    pub bins: Vec<PdfBin>,
}

impl LogPdf {
    /// `sum(density * width)`; 1 up to rounding for any input.
    pub fn integral(&self) -> f64 {
        self.bins
            .iter()
            .map(|b| b.density * (b.hi / b.lo).ln())
            .sum()
    }

    /// Columns: bin_lo, bin_hi, density.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<(), PipelineError> {
        writeln!(out, "bin_lo,bin_hi,density")?;
        for b in &self.bins {
            writeln!(out, "{},{},{}", b.lo, b.hi, b.density)?;
        }
        Ok(())
    }
}

/// Density of firms over `ln c`, each firm with weight 1.
pub fn firm_pdf(clean: &[CleanRecord], binning: &LogBinning) -> Result<LogPdf, PipelineError> {
    weighted_pdf(clean, binning, |_| 1.0)
}

/// Density of workers over `ln c`: each firm weighted by its head count.
pub fn worker_pdf(clean: &[CleanRecord], binning: &LogBinning) -> Result<LogPdf, PipelineError> {
    weighted_pdf(clean, binning, |r| r.workers as f64)
}

fn weighted_pdf(
    clean: &[CleanRecord],
    binning: &LogBinning,
    weight: impl Fn(&CleanRecord) -> f64,
) -> Result<LogPdf, PipelineError> {
    let mut mass = vec![0.0f64; binning.bin_count()];
    let mut total = 0.0f64;
    for r in clean {
        if let Some(k) = binning.bin_index(r.productivity) {
            let w = weight(r);
            mass[k] += w;
            total += w;
        }
    }
    if total <= 0.0 {
        return Err(PipelineError::EmptyHistogram);
    }
    let width = binning.ln_width();
    let bins = mass
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let (lo, hi) = binning.edges(k);
            PdfBin {
                lo,
                hi,
                density: m / (total * width),
            }
        })
        .collect();
    Ok(LogPdf { bins })
}

/// Mean workers per firm by productivity bin. Bin centers are geometric
/// means of the edges, weights are firm counts, empty bins are omitted.
pub fn mean_workers_curve(
    clean: &[CleanRecord],
    binning: &LogBinning,
) -> Result<BinnedCurve, PipelineError> {
    let mut counts = vec![0u64; binning.bin_count()];
    let mut worker_sums = vec![0u128; binning.bin_count()];
    for r in clean {
        if let Some(k) = binning.bin_index(r.productivity) {
            counts[k] += 1;
            worker_sums[k] += r.workers as u128;
        }
    }
    let bins: Vec<CurveBin> = counts
        .iter()
        .zip(&worker_sums)
        .enumerate()
        .filter(|(_, (&count, _))| count > 0)
        .map(|(k, (&count, &sum))| CurveBin {
            c_center: binning.center(k),
            n_mean: sum as f64 / count as f64,
            weight: count as f64,
        })
        .collect();
    if bins.is_empty() {
        return Err(PipelineError::EmptyHistogram);
    }
    Ok(BinnedCurve::new(bins)?)
}

const RECORD_HEADER: [&str; 10] = [
    "firm_id",
    "year",
    "sector",
    "net_profits",
    "labor_costs",
    "financing_costs",
    "rental_expenses",
    "taxes",
    "depreciation",
    "workers",
];

/// Reads firm records from CSV. Empty fields are missing values; present
/// monetary fields must be finite, present worker counts at least 1. The
/// six monetary columns are multiplied by `units_scale` once at parse time
/// (1.0 when the input is already in 10^3 yen).
pub fn read_firm_records(
    reader: impl Read,
    units_scale: f64,
) -> Result<Vec<FirmRecord>, PipelineError> {
    if !(units_scale > 0.0) || !units_scale.is_finite() {
        return Err(PipelineError::Parse {
            row: 0,
            message: format!("units scale must be positive and finite, got {units_scale}"),
        });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != RECORD_HEADER {
        return Err(PipelineError::Parse {
            row: 1,
            message: format!(
                "expected header {RECORD_HEADER:?}, got {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        });
    }
    let mut records = Vec::new();
    for (idx, result) in rdr.records().enumerate() {
        let row = idx + 2;
        let record = result?;
        if record.len() != RECORD_HEADER.len() {
            return Err(PipelineError::Parse {
                row,
                message: format!(
                    "expected {} fields, got {}",
                    RECORD_HEADER.len(),
                    record.len()
                ),
            });
        }
        let money = |k: usize| -> Result<Option<f64>, PipelineError> {
            let raw = record.get(k).unwrap_or("").trim();
            if raw.is_empty() {
                return Ok(None);
            }
            let v: f64 = raw.parse().map_err(|e| PipelineError::Parse {
                row,
                message: format!("bad {}: {e}", RECORD_HEADER[k]),
            })?;
            if !v.is_finite() {
                return Err(PipelineError::Parse {
                    row,
                    message: format!("{} must be finite, got {v}", RECORD_HEADER[k]),
                });
            }
            Ok(Some(v * units_scale))
        };
        let workers_raw = record.get(9).unwrap_or("").trim();
        let workers = if workers_raw.is_empty() {
            None
        } else {
            let n: u64 = workers_raw.parse().map_err(|e| PipelineError::Parse {
                row,
                message: format!("bad workers: {e}"),
            })?;
            if n == 0 {
                return Err(PipelineError::Parse {
                    row,
                    message: "workers must be at least 1 when present".into(),
                });
            }
            Some(n)
        };
        records.push(FirmRecord {
            firm_id: record.get(0).unwrap_or("").to_string(),
            year: record
                .get(1)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| PipelineError::Parse {
                    row,
                    message: format!("bad year: {e}"),
                })?,
            sector: record.get(2).unwrap_or("").to_string(),
            net_profits: money(3)?,
            labor_costs: money(4)?,
            financing_costs: money(5)?,
            rental_expenses: money(6)?,
            taxes: money(7)?,
            depreciation: money(8)?,
            workers,
        });
    }
    Ok(records)
}

/// Writes firm records in the same CSV schema `read_firm_records` accepts.
pub fn write_firm_records(
    out: &mut impl Write,
    records: &[FirmRecord],
) -> Result<(), PipelineError> {
    writeln!(out, "{}", RECORD_HEADER.join(","))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.firm_id,
            r.year,
            r.sector,
            opt(r.net_profits),
            opt(r.labor_costs),
            opt(r.financing_costs),
            opt(r.rental_expenses),
            opt(r.taxes),
            opt(r.depreciation),
            r.workers.map(|n| n.to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}

/// Layout of a synthetic firm population.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFirmSpec {
    pub count: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub year: i32,
    pub sector: String,
}

/// Draws a synthetic population: productivity log-uniform on
/// `[c_min, c_max)`, worker counts zero-truncated Poisson around the model
/// mean occupancy, value added split over the six components with fixed
/// shares. Deterministic in the seed (ChaCha8).
pub fn synthetic_firms(
    params: &ModelParams,
    spec: &SyntheticFirmSpec,
    seed: u64,
) -> Result<Vec<FirmRecord>, PipelineError> {
    if !(spec.c_min > 0.0 && spec.c_max > spec.c_min) || spec.count == 0 {
        return Err(PipelineError::InvalidBinning(format!(
            "bad population spec: count = {}, range [{}, {}]",
            spec.count, spec.c_min, spec.c_max
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_ratio = (spec.c_max / spec.c_min).ln();
    let mut firms = Vec::with_capacity(spec.count);
    for idx in 0..spec.count {
        let u: f64 = rng.random();
        let c = spec.c_min * (u * log_ratio).exp();
        let lambda = params.mean_occupancy(c)?.max(1e-9);
        let poisson = Poisson::new(lambda)
            .map_err(|e| PipelineError::InvalidBinning(format!("poisson({lambda}): {e}")))?;
        let mut workers = 0u64;
        for _ in 0..1000 {
            workers = poisson.sample(&mut rng) as u64;
            if workers > 0 {
                break;
            }
        }
        let workers = workers.max(1);
        let y = c * workers as f64;
        let labor_costs = 0.55 * y;
        let depreciation = 0.12 * y;
        let taxes = 0.08 * y;
        let rental_expenses = 0.06 * y;
        let financing_costs = 0.04 * y;
        let net_profits =
            y - (labor_costs + depreciation + taxes + rental_expenses + financing_costs);
        firms.push(FirmRecord {
            firm_id: format!("syn-{idx:06}"),
            year: spec.year,
            sector: spec.sector.clone(),
            net_profits: Some(net_profits),
            labor_costs: Some(labor_costs),
            financing_costs: Some(financing_costs),
            rental_expenses: Some(rental_expenses),
            taxes: Some(taxes),
            depreciation: Some(depreciation),
            workers: Some(workers),
        });
    }
    Ok(firms)
}
