//! Discrete productivity grid and the occupancy state of the exchange chain.
//!
//! Level `i` (1-based) has productivity `c_i = i * dc`. Working on an integer
//! index grid makes the paired-move conservation law exact: a move of workers
//! from levels `(i, j)` to `(k, l)` is legal iff `i + j = k + l`, so the
//! worker count and the index-weighted output `sum_i i * n_i` are both
//! conserved as integers, with no floating-point drift.

use crate::model::Limiter;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductivityGrid {
    levels: usize,
    spacing: f64,
}

impl ProductivityGrid {
    pub fn new(levels: usize, spacing: f64) -> Result<Self, SimError> {
        if levels < 2 {
            return Err(SimError::InvalidConfig(format!(
                "grid needs at least 2 levels, got {levels}"
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(SimError::InvalidConfig(format!(
                "grid spacing must be positive and finite, got {spacing}"
            )));
        }
        Ok(Self { levels, spacing })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Productivity of 1-based level `i`.
    pub fn productivity(&self, level: usize) -> f64 {
        debug_assert!(level >= 1 && level <= self.levels);
        level as f64 * self.spacing
    }

    /// Largest integer occupancy strictly below `g(c_i)` per level, or
    /// `None` for the unbounded limiter. Levels whose capacity is below 1
    /// get a cap of 0.
    pub fn integer_caps(&self, limiter: &Limiter) -> Result<Option<Vec<u64>>, SimError> {
        let law = match limiter {
            Limiter::Unbounded => return Ok(None),
            Limiter::LinearRamp(law) => law,
        };
        let mut caps = Vec::with_capacity(self.levels);
        for level in 1..=self.levels {
            let g = law.value(self.productivity(level))?;
            let cap = if g <= 1.0 {
                0
            } else if g >= u64::MAX as f64 {
                u64::MAX
            } else if g.fract() == 0.0 {
                g as u64 - 1
            } else {
                g.floor() as u64
            };
            caps.push(cap);
        }
        Ok(Some(caps))
    }
}

/// Occupancy vector plus cached conserved totals.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    occupancy: Vec<u64>,
    workers: u64,
    output_index: u64,
}

impl SystemState {
    pub(crate) fn from_occupancy(occupancy: Vec<u64>) -> Self {
        let workers = occupancy.iter().sum();
        let output_index = occupancy
            .iter()
            .enumerate()
            .map(|(idx, &n)| (idx as u64 + 1) * n)
            .sum();
        Self {
            occupancy,
            workers,
            output_index,
        }
    }

    /// Occupancies indexed by level - 1.
    pub fn occupancy(&self) -> &[u64] {
        &self.occupancy
    }

    /// Workers at 1-based level `i`.
    pub fn count(&self, level: usize) -> u64 {
        self.occupancy[level - 1]
    }

    /// Total worker count `N`.
    pub fn workers(&self) -> u64 {
        self.workers
    }

    /// Index-weighted output `sum_i i * n_i`; physical output is this times
    /// the grid spacing.
    pub fn output_index(&self) -> u64 {
        self.output_index
    }

    /// Totals recomputed from scratch, for conservation checks.
    pub fn recomputed_totals(&self) -> (u64, u64) {
        let n = self.occupancy.iter().sum();
        let y = self
            .occupancy
            .iter()
            .enumerate()
            .map(|(idx, &v)| (idx as u64 + 1) * v)
            .sum();
        (n, y)
    }

    /// Level of the `r`-th worker (0-based) under cumulative ordering.
    pub(crate) fn locate_worker(&self, r: u64) -> usize {
        let mut acc = 0u64;
        for (idx, &n) in self.occupancy.iter().enumerate() {
            acc += n;
            if r < acc {
                return idx + 1;
            }
        }
        unreachable!("worker rank {r} out of range (N = {})", self.workers)
    }

    /// Same, but with one worker at `skip_level` already removed.
    pub(crate) fn locate_worker_excluding(&self, r: u64, skip_level: usize) -> usize {
        let mut acc = 0u64;
        for (idx, &n) in self.occupancy.iter().enumerate() {
            let n = if idx + 1 == skip_level { n - 1 } else { n };
            acc += n;
            if r < acc {
                return idx + 1;
            }
        }
        unreachable!("worker rank {r} out of range after exclusion")
    }

    pub(crate) fn apply_move(&mut self, from: (usize, usize), to: (usize, usize)) {
        debug_assert!(from.0 + from.1 == to.0 + to.1, "move breaks conservation");
        self.occupancy[from.0 - 1] -= 1;
        self.occupancy[from.1 - 1] -= 1;
        self.occupancy[to.0 - 1] += 1;
        self.occupancy[to.1 - 1] += 1;
    }
}

/// How to build the initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// Use this occupancy vector as-is (validated, rebalanced if needed).
    Explicit(Vec<u64>),
    /// Construct a deterministic state with these conserved totals.
    Targets { workers: u64, output_index: u64 },
}

/// Builds a feasible initial state.
///
/// Target mode fills level 1 and then lifts single workers upward until the
/// output index matches; both modes then move workers off any level holding
/// at least its capacity, in total-preserving pairs, until every level
/// satisfies `n_i < g(c_i)`. The construction is deterministic so fixtures
/// stay stable.
pub fn init_state(
    grid: &ProductivityGrid,
    spec: &InitSpec,
    limiter: &Limiter,
) -> Result<SystemState, SimError> {
    let m = grid.levels();
    let occupancy = match spec {
        InitSpec::Explicit(occ) => {
            if occ.len() != m {
                return Err(SimError::Infeasible(format!(
                    "explicit occupancy has {} levels, grid has {m}",
                    occ.len()
                )));
            }
            occ.clone()
        }
        InitSpec::Targets {
            workers,
            output_index,
        } => build_from_targets(m, *workers, *output_index)?,
    };
    let mut state = SystemState::from_occupancy(occupancy);
    if let Some(caps) = grid.integer_caps(limiter)? {
        rebalance(&mut state, &caps)?;
    }
    Ok(state)
}

fn build_from_targets(m: usize, workers: u64, output_index: u64) -> Result<Vec<u64>, SimError> {
    if workers == 0 {
        return Err(SimError::Infeasible("need at least one worker".into()));
    }
    let max_index = workers
        .checked_mul(m as u64)
        .ok_or_else(|| SimError::Infeasible("output index target overflows".into()))?;
    if output_index < workers || output_index > max_index {
        return Err(SimError::Infeasible(format!(
            "output index {output_index} unreachable for {workers} workers on {m} levels \
             (feasible range [{workers}, {max_index}])"
        )));
    }
    let mut occ = vec![0u64; m];
    occ[0] = workers;
    let mut deficit = output_index - workers;
    while deficit > 0 {
        let jump = deficit.min(m as u64 - 1);
        occ[0] -= 1;
        occ[jump as usize] += 1;
        deficit -= jump;
    }
    Ok(occ)
}

/// Moves workers off over-capacity levels in conservation-preserving pairs:
/// one worker drops `d` levels from the overfull level while a partner
/// worker (possibly from the same level) climbs `d` levels, or the mirror
/// image. Receivers must have slack, so total excess strictly decreases
/// with every move.
fn rebalance(state: &mut SystemState, caps: &[u64]) -> Result<(), SimError> {
    let total_cap: u128 = caps.iter().map(|&c| c as u128).sum();
    if (state.workers() as u128) > total_cap {
        return Err(SimError::Infeasible(format!(
            "{} workers exceed total capacity {total_cap}",
            state.workers()
        )));
    }
    let excess = |occ: &[u64]| -> u64 {
        occ.iter()
            .zip(caps)
            .map(|(&n, &cap)| n.saturating_sub(cap))
            .sum()
    };
    let mut budget = excess(state.occupancy()) + 1;
    while let Some(idx) = state
        .occupancy()
        .iter()
        .zip(caps)
        .position(|(&n, &cap)| n > cap)
    {
        if budget == 0 {
            return Err(SimError::Infeasible("rebalance failed to converge".into()));
        }
        budget -= 1;
        let level = idx + 1;
        let Some((from, to)) = find_rebalance_move(state.occupancy(), caps, level) else {
            return Err(SimError::Infeasible(format!(
                "level {level} holds {} workers against capacity cap {}, and no \
                 conservation-preserving rebalance move exists",
                state.count(level),
                caps[idx]
            )));
        };
        state.apply_move(from, to);
    }
    Ok(())
}

/// Smallest-displacement pair move taking one worker out of the overfull
/// `level`: `(level, j) -> (level -+ d, j +- d)`. Destinations need slack
/// and must not feed the overfull level itself.
fn find_rebalance_move(
    occ: &[u64],
    caps: &[u64],
    level: usize,
) -> Option<((usize, usize), (usize, usize))> {
    let m = caps.len();
    for d in 1..m {
        for (down, dst) in [
            (true, level.checked_sub(d)),
            (false, (level + d <= m).then_some(level + d)),
        ] {
            let Some(dst) = dst else { continue };
            if dst < 1 || occ[dst - 1] >= caps[dst - 1] {
                continue;
            }
            // Partner climbs the compensating d levels; prefer splitting
            // the overfull level itself.
            let candidates = std::iter::once(level).chain(1..=m);
            for j in candidates {
                let partner_dst = if down {
                    if j + d > m {
                        continue;
                    }
                    j + d
                } else {
                    if j <= d {
                        continue;
                    }
                    j - d
                };
                if partner_dst == level {
                    continue;
                }
                let needed = if j == level { 2 } else { 1 };
                if occ[j - 1] < needed {
                    continue;
                }
                // Both receivers need room; account for them coinciding.
                let incoming = if partner_dst == dst { 2 } else { 1 };
                if occ[dst - 1] + incoming > caps[dst - 1]
                    || occ[partner_dst - 1] >= caps[partner_dst - 1]
                {
                    continue;
                }
                return Some(((level, j), (dst, partner_dst)));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CapacityLaw;

    #[test]
    fn explicit_state_totals() {
        let grid = ProductivityGrid::new(3, 1.0).unwrap();
        let s = init_state(
            &grid,
            &InitSpec::Explicit(vec![2, 0, 1]),
            &Limiter::Unbounded,
        )
        .unwrap();
        assert_eq!(s.workers(), 3);
        assert_eq!(s.output_index(), 5);
    }

    #[test]
    fn target_state_hits_totals() {
        let grid = ProductivityGrid::new(3, 1.0).unwrap();
        let s = init_state(
            &grid,
            &InitSpec::Targets {
                workers: 3,
                output_index: 5,
            },
            &Limiter::Unbounded,
        )
        .unwrap();
        assert_eq!(s.workers(), 3);
        assert_eq!(s.output_index(), 5);
    }

    #[test]
    fn target_state_is_deterministic() {
        let grid = ProductivityGrid::new(10, 1.0).unwrap();
        let spec = InitSpec::Targets {
            workers: 100,
            output_index: 600,
        };
        let a = init_state(&grid, &spec, &Limiter::Unbounded).unwrap();
        let b = init_state(&grid, &spec, &Limiter::Unbounded).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unreachable_targets_rejected() {
        let grid = ProductivityGrid::new(3, 1.0).unwrap();
        for (n, y) in [(1, 4), (2, 1), (0, 0)] {
            let r = init_state(
                &grid,
                &InitSpec::Targets {
                    workers: n,
                    output_index: y,
                },
                &Limiter::Unbounded,
            );
            assert!(matches!(r, Err(SimError::Infeasible(_))), "N={n} Y={y}");
        }
    }

    #[test]
    fn target_extremes_work() {
        let grid = ProductivityGrid::new(5, 1.0).unwrap();
        for y in [7, 7 * 5, 20] {
            let s = init_state(
                &grid,
                &InitSpec::Targets {
                    workers: 7,
                    output_index: y,
                },
                &Limiter::Unbounded,
            )
            .unwrap();
            assert_eq!(s.workers(), 7);
            assert_eq!(s.output_index(), y);
        }
    }

    #[test]
    fn rebalance_respects_caps_and_totals() {
        // g(c) = 60 / c on a unit grid: the greedy fill overshoots the
        // level-1 cap of 59 and must spill upward.
        let grid = ProductivityGrid::new(5, 1.0).unwrap();
        let lim = Limiter::LinearRamp(CapacityLaw::new(60.0, 1.0).unwrap());
        let s = init_state(
            &grid,
            &InitSpec::Targets {
                workers: 100,
                output_index: 200,
            },
            &lim,
        )
        .unwrap();
        assert_eq!(s.workers(), 100);
        assert_eq!(s.output_index(), 200);
        let caps = grid.integer_caps(&lim).unwrap().unwrap();
        for (lvl, (&n, &cap)) in s.occupancy().iter().zip(&caps).enumerate() {
            assert!(n <= cap, "level {} has {n} > cap {cap}", lvl + 1);
        }
    }

    #[test]
    fn integer_cap_excludes_exact_capacity() {
        // Integer capacity g = 10 means at most 9 workers satisfy n < g.
        let grid = ProductivityGrid::new(2, 1.0).unwrap();
        let lim = Limiter::LinearRamp(CapacityLaw::new(10.0, 0.0).unwrap());
        let caps = grid.integer_caps(&lim).unwrap().unwrap();
        assert_eq!(caps, vec![9, 9]);
    }

    #[test]
    fn overfull_without_room_is_infeasible() {
        let grid = ProductivityGrid::new(2, 1.0).unwrap();
        let lim = Limiter::LinearRamp(CapacityLaw::new(3.0, 0.0).unwrap());
        let r = init_state(&grid, &InitSpec::Explicit(vec![3, 3]), &lim);
        assert!(matches!(r, Err(SimError::Infeasible(_))));
    }
}
