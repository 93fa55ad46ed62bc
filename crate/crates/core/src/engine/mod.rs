//! Drop orchestration, the subframe loop, standalone studies and metrics.
//!
//! Drops are independent: each draws from its own random streams and drops
//! run in parallel. Results are merged in drop order.

mod metrics;
mod studies;
mod system;
mod world;

use rayon::prelude::*;

pub use metrics::{EnbComponent, MetricsAccumulator, UeRecord};
pub use studies::{
    region_grid, reference_point, replacements, snapshot_drop, ul_power_at, upper_bound_drop, upper_bound_in,
    GridCell, SnapshotResult, UpperBoundResult,
};
pub use system::{
    run_drop, run_drop_in, scenario_tag, select_relays, DropOutput, PruneRecord, TraceKind, TraceRow,
    TRACE_HEADER,
};
pub use world::{build_layout, shadow_for, World};

use crate::config::{Mode, ScenarioConfig};
use crate::error::Result;

/// Merged result of a baseline, relay or relay-im run.
#[derive(Debug, Clone)]
pub struct SystemRun {
    pub metrics: MetricsAccumulator,
    /// Per-drop details, in drop order; their metrics are moved into `metrics`.
    pub drops: Vec<DropOutput>,
}

#[derive(Debug, Clone)]
pub enum RunOutput {
    System(SystemRun),
    UpperBound(UpperBoundResult),
    Snapshot(SnapshotResult),
}

/// Runs `f` for every drop on `threads` workers (0: all cores) and returns
/// results in drop order.
pub fn par_drops<T, F>(drops: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| (0..drops as u64).into_par_iter().map(&f).collect())
}

pub fn run_system(cfg: &ScenarioConfig, threads: usize, trace: bool) -> Result<SystemRun> {
    let mut drops = par_drops(cfg.run.drops, threads, |d| run_drop(cfg, d, trace))?;
    let mut metrics = MetricsAccumulator::default();
    for d in &mut drops {
        metrics = metrics.merge(std::mem::take(&mut d.metrics))?;
    }
    Ok(SystemRun { metrics, drops })
}

pub fn run_upper_bound(cfg: &ScenarioConfig, threads: usize) -> Result<UpperBoundResult> {
    let parts = par_drops(cfg.run.drops, threads, |d| upper_bound_drop(cfg, d))?;
    Ok(parts.into_iter().fold(UpperBoundResult::default(), UpperBoundResult::merge))
}

pub fn run_snapshot(cfg: &ScenarioConfig, threads: usize) -> Result<SnapshotResult> {
    let parts = par_drops(cfg.run.drops, threads, |d| snapshot_drop(cfg, d, d == 0))?;
    Ok(parts.into_iter().fold(SnapshotResult::default(), SnapshotResult::merge))
}

/// Validates `cfg` and runs its mode.
pub fn run(cfg: &ScenarioConfig, threads: usize, trace: bool) -> Result<RunOutput> {
    cfg.validate()?;
    Ok(match cfg.run.mode {
        Mode::Baseline | Mode::Relay | Mode::RelayIm => RunOutput::System(run_system(cfg, threads, trace)?),
        Mode::UpperBound => RunOutput::UpperBound(run_upper_bound(cfg, threads)?),
        Mode::Snapshot => RunOutput::Snapshot(run_snapshot(cfg, threads)?),
    })
}
