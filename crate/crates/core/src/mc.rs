//! Seeded size/power experiments.
//!
//! Each (cell, replication) pair gets its own ChaCha8 stream derived from
//! `(root_seed, cell_index, rep_index)` by [`derive_stream`], so results do
//! not depend on scheduling and the report is identical for any worker
//! count.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cdtest::{run_all, Battery, TestConfig, TestKind, TestOutcome};
use crate::dgp::{generate_with, DgpConfig};
use crate::error::{Error, Result};
use crate::panel::{fit, ModelSpec};

pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for replication `rep` of cell `cell`.
///
/// The three indices are folded with the SplitMix64 finalizer,
/// `key = mix(mix(mix(root + g) ^ cell + g) ^ rep + g)` with `g` the 64-bit
/// golden ratio, and the 32-byte ChaCha8 key is the little-endian bytes of
/// `mix(key + j*g)` for `j = 1..=4`. Only wrapping integer arithmetic is
/// involved, so streams are identical on every platform.
pub fn derive_stream(root_seed: u64, cell: u64, rep: u64) -> Stream {
    let mut key = mix64(root_seed.wrapping_add(GOLDEN));
    key = mix64((key ^ cell).wrapping_add(GOLDEN));
    key = mix64((key ^ rep).wrapping_add(GOLDEN));
    let mut seed = [0u8; 32];
    for (j, chunk) in seed.chunks_exact_mut(8).enumerate() {
        let word = mix64(key.wrapping_add((j as u64 + 1).wrapping_mul(GOLDEN)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Outcome of one test in one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFlag {
    Reject,
    Accept,
    /// The test is undefined for the cell's estimator.
    Unsupported,
    Failed,
}

/// Per-test flags of one replication, or the reason the whole replication
/// failed (generation or estimation).
#[derive(Debug, Clone, PartialEq)]
pub enum Replication {
    Flags(Vec<TestFlag>),
    Failed(String),
}

impl Replication {
    /// Flag of the `idx`-th requested test.
    pub fn flag(&self, idx: usize) -> TestFlag {
        match self {
            Replication::Flags(f) => f[idx],
            Replication::Failed(_) => TestFlag::Failed,
        }
    }
}

/// Generates, fits and tests one panel, returning the full battery.
pub fn replicate_battery(cfg: &DgpConfig, tests: &TestConfig, rng: &mut Stream) -> Result<Battery> {
    let generated = generate_with(cfg, rng)?;
    let spec = generated.model_spec;
    let want_bases = tests.tests.contains(&TestKind::LmAdj) && spec != ModelSpec::FixedEffects;
    let resid = fit(&generated.panel, spec, want_bases)?;
    Ok(run_all(&resid, tests))
}

/// One replication: generate, fit, test, decide. Errors are captured.
pub fn run_replication(cfg: &DgpConfig, tests: &TestConfig, rng: &mut Stream) -> Replication {
    match replicate_battery(cfg, tests, rng) {
        Err(e) => Replication::Failed(e.to_string()),
        Ok(b) => Replication::Flags(
            b.entries
                .iter()
                .map(|(_, o)| match o {
                    TestOutcome::Computed(r) if r.reject => TestFlag::Reject,
                    TestOutcome::Computed(_) => TestFlag::Accept,
                    TestOutcome::Unsupported(_) => TestFlag::Unsupported,
                    TestOutcome::Failed(_) => TestFlag::Failed,
                })
                .collect(),
        ),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    /// The `seed` field of each cell is ignored; streams derive from `root_seed`.
    pub cells: Vec<DgpConfig>,
    pub reps: usize,
    pub alpha: f64,
    pub tests: Vec<TestKind>,
    pub root_seed: u64,
    /// Worker threads; does not affect results.
    pub workers: usize,
}

impl ExperimentPlan {
    pub fn new(cells: Vec<DgpConfig>, reps: usize, root_seed: u64) -> Self {
        ExperimentPlan { cells, reps, alpha: crate::cdtest::DEFAULT_ALPHA, tests: TestKind::ALL.to_vec(), root_seed, workers: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidInput("experiment has no cells".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if self.tests.is_empty() {
            return Err(Error::InvalidInput("no tests requested".into()));
        }
        TestConfig::new(self.alpha, self.tests.clone())?;
        self.cells.iter().try_for_each(|c| c.validate())
    }
}

/// Aggregate for one (cell, test).
#[derive(Debug, Clone, PartialEq)]
pub struct CellTestSummary {
    pub cell: usize,
    pub test: TestKind,
    pub rejections: usize,
    /// Replications where the test was unsupported or failed.
    pub failed: usize,
    /// Rejection frequency in percent over the non-failed replications.
    pub frequency: Option<f64>,
    /// Monte Carlo standard error of `frequency`, in percent.
    pub mc_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionReport {
    pub plan: ExperimentPlan,
    /// Cell-major, tests in plan order.
    pub rows: Vec<CellTestSummary>,
    /// First failure message per cell, if any.
    pub failure_notes: Vec<Option<String>>,
    pub wall_time: Duration,
}

impl RejectionReport {
    pub fn get(&self, cell: usize, test: TestKind) -> Option<&CellTestSummary> {
        self.rows.iter().find(|r| r.cell == cell && r.test == test)
    }

    /// Rejection frequency (percent) of `test` in `cell`.
    pub fn frequency(&self, cell: usize, test: TestKind) -> Option<f64> {
        self.get(cell, test).and_then(|r| r.frequency)
    }
}

fn summarize(cell: usize, test: TestKind, reps: usize, rejections: usize, failed: usize) -> CellTestSummary {
    let valid = reps - failed;
    let (frequency, mc_se) = if valid == 0 {
        (None, None)
    } else {
        let p = rejections as f64 / valid as f64;
        (Some(100.0 * rejections as f64 / valid as f64), Some(100.0 * (p * (1.0 - p) / valid as f64).sqrt()))
    };
    CellTestSummary { cell, test, rejections, failed, frequency, mc_se }
}

/// Runs every (cell, replication) on a pool of `plan.workers` threads and
/// aggregates in index order.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<RejectionReport> {
    plan.validate()?;
    let start = Instant::now();
    let tests = TestConfig::new(plan.alpha, plan.tests.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let reps = plan.reps;
    let outcomes: Vec<Replication> = pool.install(|| {
        (0..plan.cells.len() * reps)
            .into_par_iter()
            .map(|idx| {
                let (cell, rep) = (idx / reps, idx % reps);
                let mut rng = derive_stream(plan.root_seed, cell as u64, rep as u64);
                run_replication(&plan.cells[cell], &tests, &mut rng)
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(plan.cells.len() * plan.tests.len());
    let mut failure_notes = Vec::with_capacity(plan.cells.len());
    for (cell, chunk) in outcomes.chunks(reps).enumerate() {
        failure_notes.push(chunk.iter().find_map(|r| match r {
            Replication::Failed(msg) => Some(msg.clone()),
            _ => None,
        }));
        for (t, &test) in plan.tests.iter().enumerate() {
            let (mut rej, mut failed) = (0, 0);
            for r in chunk {
                match r.flag(t) {
                    TestFlag::Reject => rej += 1,
                    TestFlag::Accept => {}
                    TestFlag::Unsupported | TestFlag::Failed => failed += 1,
                }
            }
            rows.push(summarize(cell, test, reps, rej, failed));
        }
    }
    Ok(RejectionReport { plan: plan.clone(), rows, failure_notes, wall_time: start.elapsed() })
}
