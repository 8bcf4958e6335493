//! Paired migration on/off comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::{run_simulation, Ecosystem};
use crate::config::SimConfig;
use crate::error::SimError;

/// Mean generations per request over rounds `first..=last`. Runs that stop
/// at the generation budget count with the full budget, and requests skipped
/// for an empty pool count as the full budget too.
pub fn mean_generations(eco: &Ecosystem, first: u64, last: u64) -> f64 {
    let budget = f64::from(eco.cfg.ga.generations_max);
    let window = |r: u64| r >= first && r <= last;
    let mut total = 0.0;
    let mut n = 0usize;
    for rec in eco.history.iter().filter(|r| window(r.round)) {
        total += f64::from(rec.generations_used);
        n += 1;
    }
    for _ in eco.skipped.iter().filter(|r| window(r.round)) {
        total += budget;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedRun {
    pub seed: u64,
    pub migration_on: f64,
    pub migration_off: f64,
    /// LINK_CREATED events in the migration-off run; always 0.
    pub off_links_created: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub warmup: u64,
    pub rounds: u64,
    pub runs: Vec<PairedRun>,
    pub mean_on: f64,
    pub mean_off: f64,
    /// `mean_on / mean_off`.
    pub ratio: f64,
}

/// Runs every seed with migration on and off and averages generations per
/// request over rounds `warmup + 1 ..= rounds`. Seeds run in parallel; each
/// simulation is itself single-threaded, so results do not depend on
/// scheduling.
pub fn compare_migration(cfg: &SimConfig, seeds: &[u64], warmup: u64, rounds: u64) -> Result<CompareReport, SimError> {
    let mut on_cfg = cfg.clone();
    on_cfg.ecosystem.migration_enabled = true;
    let mut off_cfg = cfg.clone();
    off_cfg.ecosystem.migration_enabled = false;

    let runs: Result<Vec<PairedRun>, SimError> = seeds
        .par_iter()
        .map(|&seed| {
            let on = run_simulation(&on_cfg, seed, rounds, 1)?;
            let off = run_simulation(&off_cfg, seed, rounds, 1)?;
            Ok(PairedRun {
                seed,
                migration_on: mean_generations(&on, warmup + 1, rounds),
                migration_off: mean_generations(&off, warmup + 1, rounds),
                off_links_created: off
                    .events
                    .iter()
                    .filter(|e| e.kind == super::EventKind::LinkCreated)
                    .count(),
            })
        })
        .collect();
    let runs = runs?;
    let n = runs.len().max(1) as f64;
    let mean_on = runs.iter().map(|r| r.migration_on).sum::<f64>() / n;
    let mean_off = runs.iter().map(|r| r.migration_off).sum::<f64>() / n;
    let ratio = if mean_off > 0.0 { mean_on / mean_off } else { f64::NAN };
    Ok(CompareReport {
        warmup,
        rounds,
        runs,
        mean_on,
        mean_off,
        ratio,
    })
}
