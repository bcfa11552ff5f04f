use super::scenario::Scenario;
use crate::control::{Controller, ControllerEvent, ControllerKind, DetectionOutcome, Measurement, ScanPhase};
use crate::converter::{duty_for_voltage, steady_state, step_ode, ConverterState};
use crate::error::Result;
use crate::pv::{refine_gmpp, sweep_curve, ArraySpec, PvCurve, TabulatedArray};
use crate::trace::{Mode, TraceRecord};
use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Window over which the settled power of an event is averaged.
pub const FINAL_POWER_WINDOW: f64 = 40e-3;

/// One pruning decision replayed against the true curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneCheck {
    pub t: f64,
    pub phase: ScanPhase,
    pub v: f64,
    pub p_e: f64,
    /// Largest true power in the voltage range the pruning skipped.
    pub skipped_max: f64,
}

impl PruneCheck {
    pub fn is_safe(&self) -> bool {
        self.skipped_max <= self.p_e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventReport {
    pub t_start: f64,
    pub t_end: f64,
    pub pattern: String,
    pub detections: Vec<(f64, DetectionOutcome)>,
    /// Some detection in the window concluded partial shading.
    pub detected: bool,
    /// From the event to the first detection verdict.
    pub detection_latency: Option<f64>,
    /// From scan start until the command reaches the best point.
    pub scan_duration: Option<f64>,
    /// From the event until P&O resumes after detection (and scan).
    pub tracking_time: Option<f64>,
    pub scans: u32,
    pub final_power: f64,
    pub oracle_v: f64,
    pub oracle_p: f64,
    /// `∫p dt / (p_gmpp·window)`.
    pub efficiency: f64,
    pub prune_checks: Vec<PruneCheck>,
}

impl EventReport {
    /// Relative shortfall of the settled power against the oracle.
    pub fn deficit(&self) -> f64 {
        if self.oracle_p > 0.0 {
            1.0 - self.final_power / self.oracle_p
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub controller: ControllerKind,
    pub events: Vec<EventReport>,
    pub energy: f64,
    pub oracle_energy: f64,
}

impl RunReport {
    pub fn efficiency(&self) -> f64 {
        if self.oracle_energy > 0.0 {
            self.energy / self.oracle_energy
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub report: RunReport,
}

/// Grid step of the sample-module voltage table.
pub const SAMPLE_TABLE_STEP: f64 = 0.05;

/// Sample-module terminal voltage against array voltage, tabulated.
#[derive(Debug, Clone)]
pub struct SampleModuleTable {
    inv_step: f64,
    values: Vec<f64>,
}

impl SampleModuleTable {
    pub fn new(spec: &ArraySpec, step: f64) -> Self {
        let ix = spec.sample_module();
        let string = &spec.strings()[ix.string];
        let module = spec.module_curve(ix);
        let n = libm::ceil(string.v_oc() / step) as usize + 2;
        let mut guess = f64::NAN;
        let values = (0..n)
            .map(|k| {
                guess = string.current_from(k as f64 * step, guess);
                module.voltage(guess)
            })
            .collect();
        SampleModuleTable {
            inv_step: 1.0 / step,
            values,
        }
    }

    pub fn voltage(&self, v: f64) -> f64 {
        let n = self.values.len();
        let x = (v * self.inv_step).clamp(0.0, (n - 1) as f64);
        let k = (x as usize).min(n - 2);
        let w = x - k as f64;
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }
}

/// Plant-side view of one timeline event.
pub struct EventPlant {
    pub spec: ArraySpec,
    pub table: TabulatedArray,
    pub sample: SampleModuleTable,
    pub oracle: (f64, f64),
}

impl EventPlant {
    pub fn new(spec: ArraySpec, sweep_step: f64) -> Result<Self> {
        let curve = sweep_curve(&spec, sweep_step)?;
        let oracle = refine_gmpp(&spec, &curve);
        Ok(EventPlant {
            sample: SampleModuleTable::new(&spec, SAMPLE_TABLE_STEP),
            spec,
            table: TabulatedArray::new(curve),
            oracle,
        })
    }

    pub fn curve(&self) -> &PvCurve {
        self.table.curve()
    }
}

struct Window {
    start_tick: usize,
    detections: Vec<(f64, DetectionOutcome)>,
    scan_start: Option<f64>,
    arrived: Option<f64>,
    settled: Option<f64>,
    scans: u32,
    floor: f64,
    prune_checks: Vec<PruneCheck>,
    powers: Vec<f64>,
}

/// Runs controller, converter and array together for the whole horizon.
///
/// The plant sees a tabulated I-V characteristic per timeline event (the
/// same sweep the oracle uses) and a tabulated sample-module voltage. One
/// trace row per ADC period.
pub fn run_closed_loop(s: &Scenario) -> Result<RunOutput> {
    s.validate()?;
    let refs = s.references();
    let adc = s.controller.adc_period;
    let n_ticks = libm::floor(s.horizon / adc + 1e-9) as usize;
    let substeps = libm::round(adc / s.dt).max(1.0) as usize;
    let h = adc / substeps as f64;
    let event_ticks: Vec<usize> = s
        .timeline
        .iter()
        .map(|e| libm::ceil(e.t / adc - 1e-9) as usize)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let conv = &s.converter;

    let mut ev = 0;
    let mut plant = EventPlant::new(s.array_at(0)?, s.sweep_step)?;
    let t_sample = plant.spec.sample_condition().temperature_t;
    let v_ref0 = s
        .initial_v_ref
        .unwrap_or_else(|| refs.update(t_sample).0)
        .clamp(0.0, conv.v_out);
    let mut state = steady_state(duty_for_voltage(v_ref0, conv.v_out)?, &plant.table, conv);
    let mut ctrl = Controller::new(s.controller, refs.clone(), v_ref0)?;
    let mut v_cmd = v_ref0;

    let mut trace = Vec::with_capacity(n_ticks);
    let mut events = Vec::with_capacity(s.timeline.len());
    let mut win = new_window(0, refs.update(t_sample).1);

    for k in 0..n_ticks {
        if ev + 1 < s.timeline.len() && k >= event_ticks[ev + 1] {
            events.push(close_window(s, ev, win, &plant, k, adc));
            ev += 1;
            plant = EventPlant::new(s.array_at(ev)?, s.sweep_step)?;
            win = new_window(k, refs.update(plant.spec.sample_condition().temperature_t).1);
        }
        let t = k as f64 * adc;
        let v_true = state.v_pv;
        let i_true = plant.table.current(v_true);
        let mut m = Measurement {
            v: v_true,
            i: i_true,
            v_sample_mod: plant.sample.voltage(v_true),
            t_sample_mod: plant.spec.sample_condition().temperature_t,
            t,
        };
        if s.noise.v_amplitude > 0.0 {
            let a = s.noise.v_amplitude;
            m.v += rng.random_range(-a..=a);
            m.v_sample_mod += rng.random_range(-a..=a) / s.n_series as f64;
        }
        if s.noise.i_amplitude > 0.0 {
            let a = s.noise.i_amplitude;
            m.i = (m.i + rng.random_range(-a..=a)).max(0.0);
        }
        let cmd = ctrl.tick(&m);
        for e in ctrl.drain_events() {
            record_event(&mut win, e, &plant, refs.v_oc_arr_rated);
        }
        let (p_e, v_e) = match (cmd.mode.is_scan(), cmd.best) {
            (true, Some(b)) => (b.p_e, b.v_e),
            _ => (0.0, 0.0),
        };
        trace.push(TraceRecord {
            t,
            v_ref: v_cmd,
            duty: duty_for_voltage(v_cmd, conv.v_out)?,
            v_pv: m.v,
            i_pv: m.i,
            p: m.v * m.i,
            mode: cmd.mode,
            p_e,
            v_e,
        });
        win.powers.push(v_true * i_true);

        let (a, b) = (v_cmd, cmd.v_ref.clamp(0.0, conv.v_out));
        for j in 0..substeps {
            let vr = a + (b - a) * (j as f64 + 0.5) / substeps as f64;
            state = step_ode(state, duty_for_voltage(vr, conv.v_out)?, h, &plant.table, conv);
        }
        state = ConverterState {
            t: (k + 1) as f64 * adc,
            ..state
        };
        v_cmd = b;
    }
    events.push(close_window(s, ev, win, &plant, n_ticks, adc));

    let energy = events
        .iter()
        .map(|e| e.efficiency * e.oracle_p * (e.t_end - e.t_start))
        .sum();
    let oracle_energy = events.iter().map(|e| e.oracle_p * (e.t_end - e.t_start)).sum();
    Ok(RunOutput {
        trace,
        report: RunReport {
            controller: s.controller.kind,
            events,
            energy,
            oracle_energy,
        },
    })
}

fn new_window(start_tick: usize, floor: f64) -> Window {
    Window {
        start_tick,
        detections: Vec::new(),
        scan_start: None,
        arrived: None,
        settled: None,
        scans: 0,
        floor,
        prune_checks: Vec::new(),
        powers: Vec::new(),
    }
}

fn record_event(w: &mut Window, e: ControllerEvent, plant: &EventPlant, v_top: f64) {
    match e {
        ControllerEvent::Detection { t, outcome } => {
            w.floor = outcome.v_mpp_mod;
            w.detections.push((t, outcome));
        }
        ControllerEvent::ScanStarted { t, .. } => {
            w.scans += 1;
            w.scan_start.get_or_insert(t);
        }
        ControllerEvent::Pruned { t, phase, v, p_e } => {
            let (lo, hi) = match phase {
                ScanPhase::Up => (v, v_top),
                ScanPhase::Down => (w.floor, v),
            };
            w.prune_checks.push(PruneCheck {
                t,
                phase,
                v,
                p_e,
                skipped_max: plant.curve().max_power_in(lo, hi),
            });
        }
        ControllerEvent::ArrivedAtBest { t } => {
            w.arrived.get_or_insert(t);
        }
        ControllerEvent::SettledToBest { t, .. } => {
            w.settled.get_or_insert(t);
        }
        ControllerEvent::DetectionStarted { .. } | ControllerEvent::ScanFinished { .. } => {}
    }
}

fn close_window(
    s: &Scenario,
    ev: usize,
    w: Window,
    plant: &EventPlant,
    end_tick: usize,
    adc: f64,
) -> EventReport {
    let t_start = w.start_tick as f64 * adc;
    let t_end = end_tick as f64 * adc;
    let n = w.powers.len();
    let tail = (libm::round(FINAL_POWER_WINDOW / adc) as usize).clamp(1, n.max(1));
    let final_power = if n == 0 {
        0.0
    } else {
        w.powers[n - tail..].iter().sum::<f64>() / tail as f64
    };
    let (oracle_v, oracle_p) = plant.oracle;
    let efficiency = if oracle_p > 0.0 && n > 0 {
        w.powers.iter().sum::<f64>() / (n as f64 * oracle_p)
    } else {
        0.0
    };
    let first_detection = w.detections.first().map(|d| d.0);
    let detected = w.detections.iter().any(|d| d.1.psc);
    let tracking_time = match (w.settled, detected) {
        (Some(t), _) => Some(t - t_start),
        (None, false) => w.detections.last().map(|d| d.0 - t_start),
        (None, true) => None,
    };
    EventReport {
        t_start,
        t_end,
        pattern: s.timeline[ev].pattern.notation(),
        detected,
        detection_latency: first_detection.map(|t| t - t_start),
        scan_duration: match (w.scan_start, w.arrived) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        },
        tracking_time,
        scans: w.scans,
        final_power,
        oracle_v,
        oracle_p,
        efficiency,
        prune_checks: w.prune_checks,
        detections: w.detections,
    }
}

/// Mode-by-mode tick counts of a trace (diagnostics).
pub fn mode_ticks(trace: &[TraceRecord], mode: Mode) -> usize {
    trace.iter().filter(|r| r.mode == mode).count()
}
