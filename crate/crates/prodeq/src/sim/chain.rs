//! The paired-exchange Markov chain.
//!
//! Each step draws two distinct workers uniformly at random, keeps their
//! level-index sum `s = i + j`, draws an ordered destination pair `(k, l)`
//! uniformly from all pairs with `k + l = s` inside the grid, and accepts
//! the move with probability given by the destination limiter values. The
//! proposal is symmetric in sources, in destinations, and under exchange of
//! a move with its reverse, so any imbalance between forward and reverse
//! fluxes in the ledger indicates a broken chain rather than a biased
//! proposal.
//!
//! Runs are reproducible: the generator is ChaCha8 seeded from the config's
//! 64-bit seed, and identical (seed, config, initial state) produce
//! bit-identical trajectories.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::Limiter;

use super::flux::FluxLedger;
use super::state::{ProductivityGrid, SystemState};
use super::SimError;

/// A proposed paired move: workers leave levels `from.0` and `from.1` and
/// land on `to.0` and `to.1`. Index sums match by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProposedMove {
    pub from: (usize, usize),
    pub to: (usize, usize),
}

impl ProposedMove {
    /// True when the unordered source and destination pairs coincide, so
    /// executing the move leaves the state unchanged.
    pub fn is_identity(&self) -> bool {
        sorted(self.from) == sorted(self.to)
    }
}

pub(crate) fn sorted(p: (usize, usize)) -> (usize, usize) {
    if p.0 <= p.1 {
        p
    } else {
        (p.1, p.0)
    }
}

/// Draws a move. Sources are worker-uniform (clusters weighted by
/// occupancy; one cluster may supply both workers when it holds at least
/// two); destinations are uniform over the ordered pairs preserving the
/// index sum.
pub fn propose_move<R: RngExt>(
    state: &SystemState,
    grid: &ProductivityGrid,
    rng: &mut R,
) -> Result<ProposedMove, SimError> {
    let n = state.workers();
    if n < 2 {
        return Err(SimError::TooFewWorkers(n));
    }
    let i = state.locate_worker(rng.random_range(0..n));
    let j = state.locate_worker_excluding(rng.random_range(0..n - 1), i);
    let m = grid.levels();
    let s = i + j;
    let k_min = s.saturating_sub(m).max(1);
    let k_max = (s - 1).min(m);
    let k = k_min + rng.random_range(0..(k_max - k_min + 1));
    let l = s - k;
    Ok(ProposedMove {
        from: (i, j),
        to: (k, l),
    })
}

/// Probability of accepting `mv`, from the limiter values at the
/// destinations with both movers already removed from their sources. When
/// both movers land on the same level they are placed sequentially, so a
/// hard cap can never be overshot by the pair.
pub fn acceptance_probability(
    state: &SystemState,
    mv: &ProposedMove,
    limiter: &Limiter,
    grid: &ProductivityGrid,
) -> Result<f64, SimError> {
    let (i, j) = mv.from;
    let (k, l) = mv.to;
    debug_assert!(state.count(i) >= 1 && state.count(j) >= 1);
    debug_assert!(i != j || state.count(i) >= 2);
    let occ_after = |level: usize| -> f64 {
        let removed = (level == i) as u64 + (level == j) as u64;
        (state.count(level) - removed) as f64
    };
    let p = if k != l {
        limiter.value(grid.productivity(k), occ_after(k))?
            * limiter.value(grid.productivity(l), occ_after(l))?
    } else {
        let c = grid.productivity(k);
        let base = occ_after(k);
        limiter.value(c, base)? * limiter.value(c, base + 1.0)?
    };
    Ok(p)
}

/// Full run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub steps: u64,
    pub burn_in: u64,
    pub sample_every: u64,
    pub limiter: Limiter,
    pub grid: ProductivityGrid,
}

impl SimConfig {
    /// Steps must exceed the burn-in so at least one sample lands, except
    /// for the degenerate zero-step run (which reports the initial state).
    pub fn validate(&self) -> Result<(), SimError> {
        let empty_run = self.steps == 0 && self.burn_in == 0;
        if self.steps <= self.burn_in && !empty_run {
            return Err(SimError::InvalidConfig(format!(
                "steps ({}) must exceed burn_in ({})",
                self.steps, self.burn_in
            )));
        }
        if self.sample_every == 0 {
            return Err(SimError::InvalidConfig(
                "sample_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Accumulated occupancy moments over the post-burn-in samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAverages {
    sum: Vec<u128>,
    sum_sq: Vec<u128>,
    samples: u64,
}

impl TimeAverages {
    fn new(levels: usize) -> Self {
        Self {
            sum: vec![0; levels],
            sum_sq: vec![0; levels],
            samples: 0,
        }
    }

    fn record(&mut self, state: &SystemState) {
        for (idx, &n) in state.occupancy().iter().enumerate() {
            self.sum[idx] += n as u128;
            self.sum_sq[idx] += (n as u128) * (n as u128);
        }
        self.samples += 1;
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn levels(&self) -> usize {
        self.sum.len()
    }

    /// Time-averaged occupancy of 1-based level `i`.
    pub fn mean(&self, level: usize) -> f64 {
        self.sum[level - 1] as f64 / self.samples as f64
    }

    /// Population variance of the occupancy of 1-based level `i`.
    pub fn variance(&self, level: usize) -> f64 {
        let mean = self.mean(level);
        (self.sum_sq[level - 1] as f64 / self.samples as f64 - mean * mean).max(0.0)
    }

    pub fn means(&self) -> Vec<f64> {
        (1..=self.levels()).map(|i| self.mean(i)).collect()
    }
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub state: SystemState,
    pub averages: TimeAverages,
    pub ledger: FluxLedger,
    pub proposals: u64,
    pub accepted: u64,
}

impl RunResult {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// Proposal filter used by the negative-control tests: `ForwardOnly`
/// suppresses every move whose sorted destination pair precedes its sorted
/// source pair, deliberately breaking reversibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum MovePolicy {
    All,
    ForwardOnly,
}

/// Executes the chain. Post-burn-in, the occupancy vector is accumulated
/// every `sample_every` proposals and every executed non-identity move is
/// recorded in the flux ledger. Conservation of both totals is asserted
/// after every step in debug builds and checked pre/post in release.
pub fn run(config: &SimConfig, state: SystemState) -> Result<RunResult, SimError> {
    run_with_policy(config, state, MovePolicy::All)
}

pub(crate) fn run_with_policy(
    config: &SimConfig,
    mut state: SystemState,
    policy: MovePolicy,
) -> Result<RunResult, SimError> {
    config.validate()?;
    let grid = &config.grid;
    let initial_totals = state.recomputed_totals();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut averages = TimeAverages::new(grid.levels());
    let mut ledger = FluxLedger::new();
    let mut accepted = 0u64;
    // Debug builds also police the capacity bound n < g + 1 every step.
    #[cfg(debug_assertions)]
    let caps = grid.integer_caps(&config.limiter)?;
    for idx in 0..config.steps {
        let mv = propose_move(&state, grid, &mut rng)?;
        let p = acceptance_probability(&state, &mv, &config.limiter, grid)?;
        let u: f64 = rng.random();
        let mut take = u < p;
        if policy == MovePolicy::ForwardOnly && sorted(mv.to) < sorted(mv.from) {
            take = false;
        }
        if take {
            state.apply_move(mv.from, mv.to);
            accepted += 1;
            if idx >= config.burn_in && !mv.is_identity() {
                ledger.record(mv.from, mv.to);
            }
        }
        if idx >= config.burn_in && (idx - config.burn_in).is_multiple_of(config.sample_every) {
            averages.record(&state);
        }
        debug_assert_eq!(
            state.recomputed_totals(),
            initial_totals,
            "conservation broke at step {idx}"
        );
        #[cfg(debug_assertions)]
        if let Some(caps) = &caps {
            for (level_idx, &n) in state.occupancy().iter().enumerate() {
                debug_assert!(
                    n <= caps[level_idx] + 1,
                    "level {} breached its capacity at step {idx}",
                    level_idx + 1
                );
            }
        }
    }
    if averages.samples() == 0 {
        averages.record(&state);
    }
    let final_totals = state.recomputed_totals();
    if final_totals != initial_totals {
        return Err(SimError::Invariant(format!(
            "conserved totals changed: {initial_totals:?} -> {final_totals:?}"
        )));
    }
    Ok(RunResult {
        state,
        averages,
        ledger,
        proposals: config.steps,
        accepted,
    })
}
