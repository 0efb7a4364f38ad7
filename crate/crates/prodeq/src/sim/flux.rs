//! Forward/reverse flux bookkeeping for detailed-balance diagnostics.
//!
//! In equilibrium the number of executed moves `(i, j) -> (k, l)` per unit
//! time equals the number of reverse moves `(k, l) -> (i, j)`, so for each
//! unordered transition the difference between the two counts, scaled by
//! the square root of their sum, behaves like a standard normal. Large
//! `|z|` on well-sampled transitions means the chain is not stationary or
//! not reversible.

use std::collections::BTreeMap;

use super::chain::sorted;

/// Signatures with fewer total counts than this are left out of the report;
/// below it the normal approximation to the count difference is poor.
pub const MIN_SIGNATURE_COUNT: u64 = 100;

/// An unordered transition: both level pairs sorted, and `src <= dst`
/// lexicographically so each transition and its reverse share one key.
/// Source and destination index sums always match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionSignature {
    pub src: (usize, usize),
    pub dst: (usize, usize),
}

/// Counts of executed moves per transition signature, split by direction.
/// Identity moves carry no direction and are not recorded.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FluxLedger {
    counts: BTreeMap<TransitionSignature, (u64, u64)>,
}

impl FluxLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one executed move from levels `from` to levels `to`.
    pub fn record(&mut self, from: (usize, usize), to: (usize, usize)) {
        let (a, b) = (sorted(from), sorted(to));
        if a == b {
            return;
        }
        debug_assert_eq!(a.0 + a.1, b.0 + b.1, "signature breaks conservation");
        let (key, forward) = if a <= b {
            (TransitionSignature { src: a, dst: b }, true)
        } else {
            (TransitionSignature { src: b, dst: a }, false)
        };
        let entry = self.counts.entry(key).or_insert((0, 0));
        if forward {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TransitionSignature, &(u64, u64))> {
        self.counts.iter()
    }
}

/// One row of the balance report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxLine {
    pub signature: TransitionSignature,
    pub forward: u64,
    pub reverse: u64,
    /// `(forward - reverse) / sqrt(forward + reverse)`.
    pub z: f64,
}

/// Balance report over all signatures with at least
/// [`MIN_SIGNATURE_COUNT`] total counts.
#[derive(Debug, Clone, Default)]
pub struct FluxReport {
    pub lines: Vec<FluxLine>,
    /// Signatures in the ledger, including under-sampled ones.
    pub total_signatures: usize,
    /// Reported lines with `|z| > 3`.
    pub flagged: usize,
}

impl FluxReport {
    /// Fraction of reported signatures with `|z| > 3`; 0 when nothing
    /// qualifies.
    pub fn flagged_fraction(&self) -> f64 {
        if self.lines.is_empty() {
            0.0
        } else {
            self.flagged as f64 / self.lines.len() as f64
        }
    }
}

pub fn flux_balance_report(ledger: &FluxLedger) -> FluxReport {
    let mut report = FluxReport {
        total_signatures: ledger.len(),
        ..Default::default()
    };
    for (&signature, &(forward, reverse)) in ledger.iter() {
        let total = forward + reverse;
        if total < MIN_SIGNATURE_COUNT {
            continue;
        }
        let z = (forward as f64 - reverse as f64) / (total as f64).sqrt();
        if z.abs() > 3.0 {
            report.flagged += 1;
        }
        report.lines.push(FluxLine {
            signature,
            forward,
            reverse,
            z,
        });
    }
    report
}
