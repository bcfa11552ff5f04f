//! Trace CSV, report JSON and sweep CSV.

use anyhow::{Context, Result};
use pvscan_core::control::{ControllerKind, ScanPhase};
use pvscan_core::pv::PvCurve;
use pvscan_core::sim::{EventReport, RunReport};
use pvscan_core::trace::TraceRecord;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

pub const TRACE_HEADER: [&str; 9] = ["t", "v_ref", "duty", "v_pv", "i_pv", "p", "mode", "p_e", "v_e"];

pub fn write_trace<W: Write>(trace: &[TraceRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in trace {
        out.write_record([
            r.t.to_string(),
            r.v_ref.to_string(),
            r.duty.to_string(),
            r.v_pv.to_string(),
            r.i_pv.to_string(),
            r.p.to_string(),
            r.mode.as_str().to_string(),
            r.p_e.to_string(),
            r.v_e.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_trace(trace: &[TraceRecord], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trace(trace, std::io::BufWriter::new(f)).with_context(|| format!("writing {}", path.display()))
}

pub fn write_sweep<W: Write>(curve: &PvCurve, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["v", "i", "p"])?;
    for s in curve.samples() {
        out.write_record([s.v.to_string(), s.i.to_string(), s.p.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionJson {
    pub t_s: f64,
    pub psi_per_v: f64,
    pub dv_arr: Option<f64>,
    pub dv_mod: f64,
    pub psc: bool,
    pub v_mpp_arr_v: f64,
    pub v_mpp_mod_v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PruneJson {
    pub t_s: f64,
    pub phase: &'static str,
    pub v_v: f64,
    pub p_e_w: f64,
    pub skipped_max_w: f64,
    pub safe: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventJson {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub pattern: String,
    pub detected: bool,
    pub detection_latency_s: Option<f64>,
    pub scan_duration_s: Option<f64>,
    pub tracking_time_s: Option<f64>,
    pub scans: u32,
    pub final_power_w: f64,
    pub oracle_v_v: f64,
    pub oracle_p_w: f64,
    pub efficiency: f64,
    pub detections: Vec<DetectionJson>,
    pub prune_checks: Vec<PruneJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub controller: &'static str,
    pub energy_j: f64,
    pub oracle_energy_j: f64,
    pub efficiency: f64,
    pub events: Vec<EventJson>,
}

pub fn controller_name(k: ControllerKind) -> &'static str {
    match k {
        ControllerKind::Ramp => "ramp",
        ControllerKind::PerturbObserve => "po",
    }
}

fn event_json(e: &EventReport) -> EventJson {
    EventJson {
        t_start_s: e.t_start,
        t_end_s: e.t_end,
        pattern: e.pattern.clone(),
        detected: e.detected,
        detection_latency_s: e.detection_latency,
        scan_duration_s: e.scan_duration,
        tracking_time_s: e.tracking_time,
        scans: e.scans,
        final_power_w: e.final_power,
        oracle_v_v: e.oracle_v,
        oracle_p_w: e.oracle_p,
        efficiency: e.efficiency,
        detections: e
            .detections
            .iter()
            .map(|(t, d)| DetectionJson {
                t_s: *t,
                psi_per_v: d.psi,
                dv_arr: d.dv_arr,
                dv_mod: d.dv_mod,
                psc: d.psc,
                v_mpp_arr_v: d.v_mpp_arr,
                v_mpp_mod_v: d.v_mpp_mod,
            })
            .collect(),
        prune_checks: e
            .prune_checks
            .iter()
            .map(|c| PruneJson {
                t_s: c.t,
                phase: match c.phase {
                    ScanPhase::Up => "up",
                    ScanPhase::Down => "down",
                },
                v_v: c.v,
                p_e_w: c.p_e,
                skipped_max_w: c.skipped_max,
                safe: c.is_safe(),
            })
            .collect(),
    }
}

pub fn report_json(r: &RunReport) -> ReportJson {
    ReportJson {
        controller: controller_name(r.controller),
        energy_j: r.energy,
        oracle_energy_j: r.oracle_energy,
        efficiency: r.efficiency(),
        events: r.events.iter().map(event_json).collect(),
    }
}

pub fn emit_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn emit_report(r: &RunReport, path: &Path) -> Result<()> {
    emit_json(&report_json(r), path)
}
