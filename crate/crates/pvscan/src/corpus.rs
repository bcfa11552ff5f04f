//! Seeded random scenario batches.

use pvscan_core::control::ControllerKind;
use pvscan_core::pv::{nd195r1s, ModuleCondition, ModuleDatasheet, ModuleIndex};
use pvscan_core::sim::{run_closed_loop, RunOutput, Scenario, ShadingPattern, TimelineEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Settled-power tolerance against the oracle.
pub const WITHIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusConfig {
    pub seed: u64,
    pub scenarios: usize,
    pub controller: ControllerKind,
    pub ramp_rate: Option<f64>,
    /// Time between pattern changes.
    pub event_spacing: f64,
    pub events: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            seed: 1,
            scenarios: 100,
            controller: ControllerKind::Ramp,
            ramp_rate: None,
            event_spacing: 3.0,
            events: 2,
        }
    }
}

fn random_pattern(rng: &mut ChaCha8Rng, levels: &[ModuleCondition], ns: usize, np: usize) -> ShadingPattern {
    let counts = (0..np)
        .map(|_| {
            let mut left = ns as u32;
            let mut c: Vec<u32> = (0..levels.len() - 1)
                .map(|_| {
                    let n = rng.random_range(0..=left);
                    left -= n;
                    n
                })
                .collect();
            c.push(left);
            c
        })
        .collect();
    ShadingPattern {
        levels: levels.to_vec(),
        counts,
    }
}

/// One random ND195R1S array (4–6 in series, 2–3 strings) with three
/// shading levels and `cfg.events` random patterns.
pub fn random_scenario(rng: &mut ChaCha8Rng, cfg: &CorpusConfig) -> Scenario {
    let ns = rng.random_range(4..=6usize);
    let np = rng.random_range(2..=3usize);
    let s0 = rng.random_range(0.7..=1.0);
    let s1 = rng.random_range(0.3..=s0 - 0.1);
    let s2 = rng.random_range(0.1..=s1 - 0.05);
    let levels: Vec<ModuleCondition> = [s0, s1, s2]
        .iter()
        .map(|&s| ModuleCondition::new(s, rng.random_range(15.0..=50.0)))
        .collect();
    let timeline = (0..cfg.events)
        .map(|k| TimelineEvent {
            t: k as f64 * cfg.event_spacing,
            pattern: random_pattern(rng, &levels, ns, np),
        })
        .collect();
    let mut s = Scenario::new(
        ModuleDatasheet::ND195R1S,
        nd195r1s(),
        ns,
        np,
        ModuleIndex::new(0, ns.min(4) - 1),
        timeline,
        cfg.events as f64 * cfg.event_spacing,
    );
    s.controller.kind = cfg.controller;
    if let Some(r) = cfg.ramp_rate {
        s.controller.ramp_rate = r;
    }
    s.seed = rng.random();
    s
}

pub fn generate(cfg: &CorpusConfig) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.scenarios)
        .map(|_| random_scenario(&mut rng, cfg))
        .collect()
}

/// Runs every scenario (in parallel); results keep the input order.
pub fn run(scenarios: &[Scenario]) -> Vec<pvscan_core::Result<RunOutput>> {
    scenarios.par_iter().map(run_closed_loop).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EventRow {
    pub scenario: usize,
    pub event: usize,
    pub pattern: String,
    pub detected: bool,
    pub scan_duration_s: Option<f64>,
    pub final_power_w: f64,
    pub oracle_p_w: f64,
    pub deficit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusSummary {
    pub scenarios: usize,
    pub failed_runs: usize,
    pub events: usize,
    pub within_1pct: usize,
    pub fraction_within: f64,
    pub prune_checks: usize,
    pub prune_violations: usize,
    pub max_scan_duration_s: f64,
    pub rows: Vec<EventRow>,
}

pub fn summarize(results: &[pvscan_core::Result<RunOutput>]) -> CorpusSummary {
    let mut rows = Vec::new();
    let (mut checks, mut violations, mut failed) = (0, 0, 0);
    let mut max_scan: f64 = 0.0;
    for (k, r) in results.iter().enumerate() {
        let Ok(out) = r else {
            failed += 1;
            continue;
        };
        for (j, e) in out.report.events.iter().enumerate() {
            checks += e.prune_checks.len();
            violations += e.prune_checks.iter().filter(|c| !c.is_safe()).count();
            max_scan = max_scan.max(e.scan_duration.unwrap_or(0.0));
            rows.push(EventRow {
                scenario: k,
                event: j,
                pattern: e.pattern.clone(),
                detected: e.detected,
                scan_duration_s: e.scan_duration,
                final_power_w: e.final_power,
                oracle_p_w: e.oracle_p,
                deficit: e.deficit(),
            });
        }
    }
    let within = rows.iter().filter(|r| r.deficit <= WITHIN).count();
    CorpusSummary {
        scenarios: results.len(),
        failed_runs: failed,
        events: rows.len(),
        within_1pct: within,
        fraction_within: if rows.is_empty() {
            0.0
        } else {
            within as f64 / rows.len() as f64
        },
        prune_checks: checks,
        prune_violations: violations,
        max_scan_duration_s: max_scan,
        rows,
    }
}
