//! Many sessions across class sizes and seeds.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use classplay_core::protocol::codes;
use classplay_core::scenario::{validate_scenario, Scenario, MIN_SUPPORTED_PLAYERS};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::run::{run_simulation, RunReport, SimConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRun {
    pub players: usize,
    pub seed: u64,
    pub ok: bool,
    pub completed: bool,
    pub violations: Vec<String>,
    pub engine_fault: Option<String>,
    pub no_matching_entry: u64,
    pub error: Option<String>,
    pub virtual_ms: u64,
    pub transcript_digest: String,
}

impl SweepRun {
    fn from_report(r: &RunReport) -> Self {
        Self {
            players: r.players,
            seed: r.seed,
            ok: r.ok(),
            completed: r.completed,
            violations: r.violations.clone(),
            engine_fault: r.engine_fault.clone(),
            no_matching_entry: r
                .error_codes
                .get(codes::NO_MATCHING_ENTRY)
                .copied()
                .unwrap_or(0),
            error: None,
            virtual_ms: r.virtual_ms,
            transcript_digest: r.transcript_digest.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    pub elapsed_ms: u128,
}

impl SweepReport {
    pub fn ok(&self) -> bool {
        self.runs.iter().all(|r| r.ok && r.no_matching_entry == 0)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepRun> {
        self.runs
            .iter()
            .filter(|r| !r.ok || r.no_matching_entry > 0)
    }
}

/// Runs every (size, seed) combination of `base` on all available cores.
/// Results come back ordered by size, then seed.
///
/// Nothing runs unless the scenario validates and every size is within its
/// supported range.
pub fn sweep(
    scenario: &Scenario,
    base: &SimConfig,
    sizes: &[usize],
    seeds: &[u64],
) -> Result<SweepReport, SimError> {
    let report = validate_scenario(scenario);
    if !report.ok {
        let lines: Vec<String> = report.errors().map(|d| d.to_string()).collect();
        return Err(SimError::InvalidScenario(lines.join("\n")));
    }
    let min = scenario.min_players.max(MIN_SUPPORTED_PLAYERS);
    let max = scenario.max_players;
    if let Some(&players) = sizes.iter().find(|&&n| n < min || n > max) {
        return Err(SimError::Size { players, min, max });
    }
    let start = Instant::now();
    let jobs: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(jobs.len()));
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(players, seed)) = jobs.get(i) else {
                    break;
                };
                let mut config = base.clone();
                config.players = players;
                config.seed = seed;
                let run = match run_simulation(scenario, &config) {
                    Ok((_, report)) => SweepRun::from_report(&report),
                    Err(e) => SweepRun {
                        players,
                        seed,
                        ok: false,
                        completed: false,
                        violations: Vec::new(),
                        engine_fault: None,
                        no_matching_entry: 0,
                        error: Some(e.to_string()),
                        virtual_ms: 0,
                        transcript_digest: String::new(),
                    },
                };
                results.lock().expect("results lock").push(run);
            });
        }
    });
    let mut runs = results.into_inner().expect("results lock");
    runs.sort_by_key(|r| (r.players, r.seed));
    Ok(SweepReport {
        runs,
        elapsed_ms: start.elapsed().as_millis(),
    })
}
