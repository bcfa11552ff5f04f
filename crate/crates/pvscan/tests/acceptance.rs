//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs as a plain binary (`harness = false`) so the lines
//! always reach the console.

use pvscan::{corpus, presets};
use pvscan_core::control::{assess, psi_probe, ControllerKind, DetectorConfig, ReferenceModel};
use pvscan_core::converter::{run_with_dt, CommandSignal, ConverterParams};
use pvscan_core::pv::{
    module_current, nd195r1s, sweep_curve, ArraySpec, ModuleCondition, ModuleDatasheet, ModuleIndex,
};
use pvscan_core::sim::{run_closed_loop, Scenario, ShadingPattern, TimelineEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

// Criterion 1
const ISC: f64 = 8.68;
const ISC_TOL: f64 = 0.005;
const I_VOC_TOL: f64 = 0.04;
const PMAX: f64 = 195.0;
const PMAX_TOL: f64 = 0.02;
// Criterion 2
const GRID_POINTS: usize = 200;
// Criterion 3
const SETTLE_BAND: f64 = 0.02;
const SETTLE_RANGE_MS: (f64, f64) = (10.0, 25.0);
/// Ramp tracking bound, frozen from a dt/10 reference run (3.008 V peak
/// error, 3.039 V overshoot, both dominated by the r_L·i offset).
const B_RAMP: f64 = 3.2;
// Criterion 4
const MAGNITUDE_TOL: f64 = 0.5;
/// Zero table entries are compared as |x| ≤ this.
const ZERO_TOL: f64 = 0.005;
const UNIFORM_GRID: (usize, usize) = (10, 5);
// Criterion 5
const SCAN_LIMIT_S: f64 = 70e-3;
const WITHIN: f64 = corpus::WITHIN;
const CORPUS_FRACTION: f64 = 0.99;
const RUNTIME_LIMIT_S: f64 = 60.0;
// Criterion 7
const IDENTITY_PATTERNS: usize = 50;
const IDENTITY_TOL: f64 = 1e-3;
/// Probe half-width as a fraction of the voltage.
const IDENTITY_PROBE: f64 = 1e-3;
// Criterion 9
const PO_DEFICIT: f64 = 0.10;

/// Expected criteria per named pattern: (name, PSI, |ΔV_arr/V_arr|, ΔV_mod/V_mod).
const EXPECTED_CRITERIA: [(&str, f64, f64, f64); 5] = [
    ("PSC1", 0.008, 0.09, 0.3),
    ("PSC2", 0.0036, 0.04, 0.0),
    ("PSC3", 0.002, 0.022, 0.03),
    ("PSC4", 0.003, 0.03, 0.08),
    ("PSC5", 4e-4, 0.003, -0.08),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: u32, title: &str, o: &Outcome) {
    println!(
        "{} [{n}] {title}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
}

fn datasheet_fidelity() -> Outcome {
    let p = nd195r1s();
    let i = |v| module_current(&p, ModuleCondition::STC, v).unwrap();
    let (i0, ioc, pm) = (i(0.0), i(29.7), 23.6 * i(23.6));
    let pass =
        (i0 - ISC).abs() <= ISC_TOL * ISC && ioc.abs() <= I_VOC_TOL && (pm - PMAX).abs() <= PMAX_TOL * PMAX;
    Outcome {
        pass,
        detail: format!(
            "I(0)={i0:.4} A (8.68±0.5%), I(29.7)={ioc:+.4} A (±{I_VOC_TOL}), P(23.6)={pm:.2} W (195±2%)"
        ),
    }
}

/// Checks one two-level string; `None` when all structural claims hold.
fn string_violation(n_in: usize, n_sh: usize, ir: f64) -> Option<String> {
    let hs = ModuleCondition::STC;
    let ls = ModuleCondition::new(1.0 / ir, 25.0);
    let mut c = vec![hs; n_in];
    c.extend(std::iter::repeat_n(ls, n_sh));
    let spec = ArraySpec::new(nd195r1s(), n_in + n_sh, 1, c, ModuleIndex::default()).unwrap();
    let maxima = sweep_curve(&spec, 0.01).unwrap().local_maxima();
    if maxima.len() != 2 {
        return Some(format!(
            "n_in={n_in} n_sh={n_sh} IR={ir:.2}: {} maxima",
            maxima.len()
        ));
    }
    let (v1, v2) = (maxima[0].0, maxima[1].0);
    let m = nd195r1s();
    let (vm_ls, _, _) = m.curve(ls).mpp();
    let voc_hs = m.curve(hs).v_oc();
    let (lo, hi) = (
        (n_in + n_sh) as f64 * vm_ls,
        n_sh as f64 * vm_ls + n_in as f64 * voc_hs,
    );
    if !(lo < v2 && v2 < hi) {
        return Some(format!(
            "n_in={n_in} n_sh={n_sh} IR={ir:.2}: V2={v2:.2} outside ({lo:.2}, {hi:.2})"
        ));
    }
    if v2 - v1 <= vm_ls {
        return Some(format!(
            "n_in={n_in} n_sh={n_sh} IR={ir:.2}: peaks {v1:.2}/{v2:.2} closer than {vm_ls:.2}"
        ));
    }
    None
}

fn multi_peak_structure() -> Outcome {
    let mut violations = Vec::new();
    violations.extend(string_violation(2, 2, 2.0));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..GRID_POINTS {
        let ns = rng.random_range(2..=8usize);
        let n_sh = rng.random_range(1..ns);
        let ir = rng.random_range(1.2..=10.0);
        violations.extend(string_violation(ns - n_sh, n_sh, ir));
    }
    Outcome {
        pass: violations.is_empty(),
        detail: format!(
            "Ns=4/n_sh=2/IR=2 plus {GRID_POINTS} random strings, {} violations{}",
            violations.len(),
            violations
                .first()
                .map_or(String::new(), |v| format!(" (first: {v})"))
        ),
    }
}

fn converter_dynamics() -> Outcome {
    // 5 modules of a 26 V / 8 A class: 130 V open circuit, 8 A short circuit.
    let module = nd195r1s().scaled(26.0 / 29.7, 8.0 / 8.68, 42);
    let array = ArraySpec::uniform(module, 5, 1, ModuleCondition::STC).unwrap();
    let p = ConverterParams::REFERENCE;
    let period = 0.1e-3;
    let t0 = 5e-3;

    let step = CommandSignal::new(40.0).hold(40.0, t0).hold(80.0, 0.1);
    let tr = run_with_dt(&step, &array, &p, period, 5e-6).unwrap();
    let v_end = tr.last().unwrap().v_pv;
    let band = SETTLE_BAND * 40.0;
    let last_out = tr
        .iter()
        .filter(|r| (r.v_pv - v_end).abs() > band)
        .map(|r| r.t)
        .fold(t0, f64::max);
    let settle_ms = (last_out + period - t0) * 1e3;

    let big = CommandSignal::new(60.0).hold(60.0, t0).hold(100.0, 0.05);
    let peak_step = run_with_dt(&big, &array, &p, period, 5e-6)
        .unwrap()
        .iter()
        .map(|r| r.v_pv)
        .fold(f64::MIN, f64::max);

    let ramp = CommandSignal::new(60.0)
        .hold(60.0, t0)
        .ramp(100.0, 4000.0)
        .hold(100.0, 0.05);
    let tr = run_with_dt(&ramp, &array, &p, period, 5e-6).unwrap();
    let err = tr
        .iter()
        .filter(|r| r.t >= t0)
        .map(|r| (r.v_pv - r.v_ref).abs())
        .fold(0.0, f64::max);
    let overshoot = tr.iter().map(|r| r.v_pv - 100.0).fold(f64::MIN, f64::max);

    let pass = (SETTLE_RANGE_MS.0..=SETTLE_RANGE_MS.1).contains(&settle_ms)
        && peak_step > 100.0
        && err < B_RAMP
        && overshoot < B_RAMP;
    Outcome {
        pass,
        detail: format!(
            "40→80 V step settles in {settle_ms:.2} ms (2% band, [10, 25]); 60→100 V step peaks at {peak_step:.1} V; \
             4000 V/s ramp error {err:.3} V, overshoot {overshoot:.3} V (B_ramp {B_RAMP} V)"
        ),
    }
}

fn magnitude_ok(got: f64, want: f64) -> bool {
    if want == 0.0 {
        got.abs() <= ZERO_TOL
    } else {
        (got.abs() - want.abs()).abs() <= MAGNITUDE_TOL * want.abs()
    }
}

fn detection_verdicts() -> Outcome {
    let refs = presets::references(true);
    let cfg = DetectorConfig::default();
    let mut problems = Vec::new();
    let mut rows = Vec::new();
    for (name, psi, dva, dvm) in EXPECTED_CRITERIA {
        let a = assess(
            &presets::array(&presets::pattern(name).unwrap()).unwrap(),
            &refs,
            &cfg,
        )
        .unwrap();
        let c = a.criteria;
        rows.push(format!("{name} {:.5}/{:.4}/{:+.4}", c.psi, c.dv_arr, c.dv_mod));
        if !a.psc {
            problems.push(format!("{name} not detected"));
        }
        for (label, got, want) in [
            ("PSI", c.psi, psi),
            ("dV_arr", c.dv_arr, dva),
            ("dV_mod", c.dv_mod, dvm),
        ] {
            if !magnitude_ok(got, want) {
                problems.push(format!("{name} {label} {got:.5} vs {want} ±50%"));
            }
        }
        let fired = c.fired(&cfg);
        if name == "PSC2" && c.dv_mod.abs() > ZERO_TOL {
            problems.push(format!("PSC2 criterion 3 = {:.4}", c.dv_mod));
        }
        if name == "PSC5" && fired != [false, false, true] {
            problems.push(format!("PSC5 fired {fired:?}"));
        }
    }
    let (ns, nt) = UNIFORM_GRID;
    let mut false_pos = 0;
    for a in 0..ns {
        for b in 0..nt {
            let s = 0.1 + 0.9 * a as f64 / (ns - 1) as f64;
            let t = 60.0 * b as f64 / (nt - 1) as f64;
            let spec = ArraySpec::new(
                nd195r1s(),
                presets::N_SERIES,
                presets::N_PARALLEL,
                vec![ModuleCondition::new(s, t); presets::N_SERIES * presets::N_PARALLEL],
                presets::SAMPLE_MODULE,
            )
            .unwrap();
            if assess(&spec, &refs, &cfg).unwrap().psc {
                false_pos += 1;
            }
        }
    }
    if false_pos > 0 {
        problems.push(format!("{false_pos} uniform false positives"));
    }
    Outcome {
        pass: problems.is_empty(),
        detail: format!(
            "[{}]; uniform grid {}×{}: {false_pos} false positives; {}",
            rows.join(", "),
            ns,
            nt,
            if problems.is_empty() {
                "all checks hold".into()
            } else {
                problems.join("; ")
            }
        ),
    }
}

struct CorpusResult {
    summary: corpus::CorpusSummary,
    onset_prune: (usize, usize),
}

fn gmppt_accuracy() -> (Outcome, CorpusResult) {
    let start = Instant::now();
    let mut problems = Vec::new();
    let mut rows = Vec::new();
    let (mut checks, mut unsafe_) = (0, 0);
    for (name, _) in presets::PATTERNS {
        let s = presets::onset_scenario(presets::pattern(name).unwrap(), 0.5, 1.2, ControllerKind::Ramp);
        let out = run_closed_loop(&s).unwrap();
        let e = &out.report.events[1];
        checks += e.prune_checks.len();
        unsafe_ += e.prune_checks.iter().filter(|c| !c.is_safe()).count();
        let scan = e.scan_duration;
        rows.push(format!(
            "{name} {} ms/{:+.2}%",
            scan.map_or("-".into(), |d| format!("{:.1}", d * 1e3)),
            -100.0 * e.deficit()
        ));
        if !scan.is_some_and(|d| d < SCAN_LIMIT_S) {
            problems.push(format!("{name} scan {scan:?}"));
        }
        if e.deficit() > WITHIN {
            problems.push(format!("{name} deficit {:.4}", e.deficit()));
        }
    }
    let results = corpus::run(&corpus::generate(&corpus::CorpusConfig::default()));
    let summary = corpus::summarize(&results);
    let elapsed = start.elapsed().as_secs_f64();
    if summary.failed_runs > 0 {
        problems.push(format!("{} corpus runs failed", summary.failed_runs));
    }
    if summary.fraction_within < CORPUS_FRACTION {
        problems.push("corpus below 99%".into());
    }
    if elapsed >= RUNTIME_LIMIT_S {
        problems.push("runtime over 60 s".into());
    }
    let o = Outcome {
        pass: problems.is_empty(),
        detail: format!(
            "onsets [{}] (scan < 70 ms, within 1%); corpus {}/{} events within 1% ({:.1}%, need ≥ 99%); {elapsed:.1} s{}",
            rows.join(", "),
            summary.within_1pct,
            summary.events,
            100.0 * summary.fraction_within,
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    };
    (
        o,
        CorpusResult {
            summary,
            onset_prune: (checks, unsafe_),
        },
    )
}

fn pruning_safety(c: &CorpusResult) -> Outcome {
    let checks = c.summary.prune_checks + c.onset_prune.0;
    let violations = c.summary.prune_violations + c.onset_prune.1;
    Outcome {
        pass: violations == 0 && checks > 0,
        detail: format!("{checks} pruning decisions replayed against the oracle curve, {violations} unsafe"),
    }
}

/// Largest relative gap between array PSI and power-weighted string PSI at
/// `v`, all probed at `v ± h`.
fn identity_gap(spec: &ArraySpec, v: f64, h: f64) -> f64 {
    let psi = psi_probe(|x| spec.array_current(x), v, h).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..spec.n_parallel() {
        let pk = v * spec.string_current(k, v);
        if let Ok(psi_k) = psi_probe(|x| spec.string_current(k, x), v, h) {
            num += psi_k * pk;
            den += pk;
        }
    }
    (psi - num / den).abs() / psi.abs().max(1e-3)
}

fn psi_identity() -> Outcome {
    let refs = presets::references(true);
    let cfg = DetectorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst, mut worst_detector): (f64, f64) = (0.0, 0.0);
    for _ in 0..IDENTITY_PATTERNS {
        let counts = (0..presets::N_PARALLEL)
            .map(|_| {
                let a = rng.random_range(0..=5u32);
                let b = rng.random_range(0..=5 - a);
                vec![a, b, 5 - a - b]
            })
            .collect();
        let p = ShadingPattern::new(presets::levels(), counts).unwrap();
        let spec = presets::array(&p).unwrap();
        let va = assess(&spec, &refs, &cfg).unwrap().v_mpp_arr;
        worst = worst.max(identity_gap(&spec, va, IDENTITY_PROBE * va));
        worst_detector = worst_detector.max(identity_gap(&spec, va, cfg.probe_dv(va)));
    }
    Outcome {
        pass: worst <= IDENTITY_TOL,
        detail: format!(
            "{IDENTITY_PATTERNS} random patterns at the array reference, ±0.1% probe: worst relative gap {worst:.2e} \
             (≤ {IDENTITY_TOL:e}); with the ±1% detector probe the O(h²) weighting error gives {worst_detector:.2e}"
        ),
    }
}

fn detector_miss_fallback() -> Outcome {
    let refs = presets::references(true);
    let cfg = DetectorConfig::default();
    let (ns, np) = (presets::N_SERIES, presets::N_PARALLEL);
    let mut misses = Vec::new();
    // One insolated module per shaded string: K = n_sh/n_in = 4.
    for ir in [1.1, 1.2, 1.3, 1.4, 1.5] {
        for shaded_strings in 1..=np {
            let levels = vec![
                ModuleCondition::new(0.9, 35.0),
                ModuleCondition::new(0.9 / ir, 35.0),
            ];
            let counts = (0..np)
                .map(|k| {
                    if k < shaded_strings {
                        vec![1, 4]
                    } else {
                        vec![5, 0]
                    }
                })
                .collect();
            let p = ShadingPattern::new(levels, counts).unwrap();
            let a = assess(&presets::array(&p).unwrap(), &refs, &cfg).unwrap();
            if !a.psc {
                misses.push((ir, p, a.v_mpp_arr));
            }
        }
    }
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for (ir, p, va) in &misses {
        let notation = p.notation();
        let mut s = Scenario::new(
            ModuleDatasheet::ND195R1S,
            nd195r1s(),
            ns,
            np,
            presets::SAMPLE_MODULE,
            vec![TimelineEvent {
                t: 0.0,
                pattern: p.clone(),
            }],
            1.0,
        );
        s.controller.kind = ControllerKind::PerturbObserve;
        s.initial_v_ref = Some(*va);
        let e = &run_closed_loop(&s).unwrap().report.events[0];
        worst = worst.max(e.deficit());
        rows.push(format!("IR {ir} {notation} {:+.2}%", -100.0 * e.deficit()));
    }
    Outcome {
        pass: misses.len() >= 3 && worst <= WITHIN,
        detail: format!(
            "{} constructed K=4, IR ≤ 1.5 patterns missed by all criteria; P&O from the array reference: [{}]; worst deficit {:.2}% (≤ 1%)",
            misses.len(),
            rows.join(", "),
            100.0 * worst
        ),
    }
}

fn po_baseline_failure() -> Outcome {
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, _) in presets::PATTERNS {
        let s = presets::onset_scenario(
            presets::pattern(name).unwrap(),
            0.5,
            1.2,
            ControllerKind::PerturbObserve,
        );
        let d = run_closed_loop(&s).unwrap().report.events[1].deficit();
        worst = worst.max(d);
        rows.push(format!("{name} {:.1}%", 100.0 * d));
    }
    Outcome {
        pass: worst >= PO_DEFICIT,
        detail: format!(
            "P&O-only deficits [{}]; largest {:.1}% (need ≥ 10%)",
            rows.join(", "),
            100.0 * worst
        ),
    }
}

fn main() {
    // Keeps the reference model and its correction table warm for all criteria.
    let _: ReferenceModel = presets::references(true);
    let mut all = true;
    let mut run = |n, title: &str, o: Outcome| {
        report(n, title, &o);
        all &= o.pass;
    };
    run(1, "datasheet fidelity", datasheet_fidelity());
    run(2, "multi-peak structure", multi_peak_structure());
    run(3, "converter dynamics", converter_dynamics());
    run(4, "detection verdicts", detection_verdicts());
    let (o5, corpus) = gmppt_accuracy();
    run(5, "GMPPT accuracy and speed", o5);
    run(6, "pruning safety", pruning_safety(&corpus));
    run(7, "weighted PSI identity", psi_identity());
    run(8, "detector-miss fallback", detector_miss_fallback());
    run(9, "P&O baseline failure", po_baseline_failure());
    if !all {
        std::process::exit(1);
    }
}
