use pvscan::output::{write_trace, TRACE_HEADER};
use pvscan::{load_scenario, parse_scenario, LoadError};
use pvscan_core::sim::run_closed_loop;
use std::path::{Path, PathBuf};
use std::process::Command;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn trace_bytes(name: &str, seed: Option<u64>) -> Vec<u8> {
    let mut s = load_scenario(scenario_path(name)).unwrap();
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let out = run_closed_loop(&s).unwrap();
    let mut buf = Vec::new();
    write_trace(&out.trace, &mut buf).unwrap();
    buf
}

#[test]
fn bundled_scenarios_load() {
    for name in ["psc1", "psc2", "psc3", "psc4", "psc5", "uniform", "onset"] {
        let s = load_scenario(scenario_path(&format!("{name}.json"))).unwrap();
        s.validate().unwrap();
    }
}

#[test]
fn psc1_trace_is_byte_identical_on_rerun() {
    assert_eq!(trace_bytes("psc1.json", None), trace_bytes("psc1.json", None));
}

#[test]
fn noisy_trace_depends_only_on_seed() {
    let a = trace_bytes("onset.json", Some(3));
    assert_eq!(a, trace_bytes("onset.json", Some(3)));
    assert_ne!(a, trace_bytes("onset.json", Some(4)));
}

#[test]
fn report_respects_oracle_and_cadence() {
    for name in ["psc1.json", "psc4.json", "uniform.json", "onset.json"] {
        let s = load_scenario(scenario_path(name)).unwrap();
        let out = run_closed_loop(&s).unwrap();
        let expected = s.horizon / s.controller.adc_period;
        assert!(
            (out.trace.len() as f64 - expected).abs() <= 1.0,
            "{name}: {} rows",
            out.trace.len()
        );
        for e in &out.report.events {
            assert!(e.final_power <= e.oracle_p * (1.0 + 1e-3), "{name}: {e:?}");
            assert!(
                (0.0..=1.02).contains(&e.efficiency),
                "{name}: efficiency {}",
                e.efficiency
            );
        }
        let eff = out.report.efficiency();
        assert!((0.0..=1.02).contains(&eff), "{name}: run efficiency {eff}");
    }
}

#[test]
fn uniform_run_never_scans_and_tracks() {
    let s = load_scenario(scenario_path("uniform.json")).unwrap();
    let out = run_closed_loop(&s).unwrap();
    assert!(out.trace.iter().all(|r| !r.mode.is_scan()));
    for e in &out.report.events {
        assert!(!e.detected);
        assert!(e.deficit() < 0.01, "{e:?}");
    }
}

#[test]
fn scan_command_moves_only_at_ramp_rate() {
    for name in ["psc1.json", "psc3.json", "psc5.json"] {
        let s = load_scenario(scenario_path(name)).unwrap();
        let out = run_closed_loop(&s).unwrap();
        let step = s.controller.ramp_rate * s.controller.adc_period;
        let (mut travel, mut ticks) = (0.0, 0usize);
        for w in out.trace.windows(2) {
            // Row k+1 holds the command that row k's tick produced.
            if w[0].mode.is_scan() {
                travel += (w[1].v_ref - w[0].v_ref).abs();
                ticks += 1;
            }
        }
        assert!(ticks > 0, "{name}: no scan");
        let expected = step * ticks as f64;
        assert!(
            (travel - expected).abs() < 1e-6 * expected,
            "{name}: {travel} vs {expected}"
        );
    }
}

#[test]
fn schema_and_validation_errors_are_distinct() {
    let bad_counts = std::fs::read_to_string(scenario_path("psc1.json"))
        .unwrap()
        .replace("2-2-1/1-3-1/3-2-0", "2-2-2/1-3-1/3-2-0");
    assert!(matches!(
        parse_scenario(&bad_counts, Path::new("x.json")),
        Err(LoadError::Invalid { .. })
    ));
    let bad_type = std::fs::read_to_string(scenario_path("psc1.json"))
        .unwrap()
        .replace("\"horizon_s\": 1.2", "\"horizon_s\": \"long\"");
    match parse_scenario(&bad_type, Path::new("x.json")) {
        Err(LoadError::Schema { field, .. }) => assert_eq!(field, "horizon_s"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        load_scenario(Path::new("/nonexistent/s.json")),
        Err(LoadError::Io { .. })
    ));
}

fn pvscan(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pvscan"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_run_writes_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let scen = scenario_path("psc2.json");
    let o = pvscan(&[
        "run",
        "--scenario",
        scen.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), TRACE_HEADER.join(","));
    assert_eq!(trace.lines().count(), 2401);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["controller"], "ramp");
    assert_eq!(report["events"].as_array().unwrap().len(), 2);
}

#[test]
fn cli_po_override_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let scen = scenario_path("psc1.json");
    let o = pvscan(&[
        "run",
        "--scenario",
        scen.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--controller",
        "po",
    ]);
    assert!(o.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["controller"], "po");
}

#[test]
fn cli_detect_and_sweep() {
    let o = pvscan(&["detect"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with("yes")).count(), 5, "{text}");

    let o = pvscan(&["sweep", "--pattern", "PSC3", "--step", "0.05"]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("v,i,p"));
    assert!(csv.lines().count() > 1000);
}

#[test]
fn cli_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"array\": 3}").unwrap();
    let o = pvscan(&[
        "run",
        "--scenario",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    let o = pvscan(&["run", "--scenario", "/nonexistent.json"]);
    assert!(!o.status.success());
}
