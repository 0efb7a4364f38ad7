//! Plot-ready CSV emission for run results. Floats use Rust's shortest
//! round-trip formatting, so files are bit-stable across identical runs.

use std::io::Write;

use crate::model::Limiter;

use super::chain::TimeAverages;
use super::flux::FluxReport;
use super::state::ProductivityGrid;
use super::SimError;

/// Columns: level_index, c, n_mean, n_var, g_of_c. The capacity column is
/// `inf` under the unbounded limiter.
pub fn write_occupancy_csv<W: Write>(
    out: &mut W,
    grid: &ProductivityGrid,
    averages: &TimeAverages,
    limiter: &Limiter,
) -> Result<(), SimError> {
    writeln!(out, "level_index,c,n_mean,n_var,g_of_c")?;
    for level in 1..=grid.levels() {
        let c = grid.productivity(level);
        let g = limiter.capacity(c)?.unwrap_or(f64::INFINITY);
        writeln!(
            out,
            "{level},{c},{},{},{g}",
            averages.mean(level),
            averages.variance(level)
        )?;
    }
    Ok(())
}

/// Columns: src_lo, src_hi, dst_lo, dst_hi, forward, reverse, z.
pub fn write_flux_csv<W: Write>(out: &mut W, report: &FluxReport) -> Result<(), SimError> {
    writeln!(out, "src_lo,src_hi,dst_lo,dst_hi,forward,reverse,z")?;
    for line in &report.lines {
        let s = line.signature;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.src.0, s.src.1, s.dst.0, s.dst.1, line.forward, line.reverse, line.z
        )?;
    }
    Ok(())
}
