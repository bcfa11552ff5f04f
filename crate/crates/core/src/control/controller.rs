//! Sampled-time controller: P&O tracking, shading detection and ramp scan.
//!
//! The controller only sees array voltage/current and the sample module's
//! voltage and temperature. It emits a voltage command once per ADC period;
//! the command moves linearly over the following period.

use super::detector::{compute_psi, DetectorConfig, MAX_RETARGET, RETARGET_TOL};
use super::po::PerturbObserve;
use super::reference::ReferenceModel;
use super::scan::{Best, PhaseEnd, Scan, ScanPhase, ScanStep};
use crate::error::{invalid, Result};
use crate::trace::Mode;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControllerKind {
    /// Detection plus ramp scan, P&O in between.
    #[default]
    Ramp,
    /// P&O only; the baseline.
    PerturbObserve,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub adc_period: f64,
    pub po_period: f64,
    pub po_step: f64,
    /// Wait after each detection move before sampling.
    pub settle_time: f64,
    pub ramp_rate: f64,
    /// P&O periods per oscillation cycle used by the local-MPP estimate.
    pub local_window: usize,
    /// Give-up bound on the local-MPP search, in P&O periods.
    pub local_max_periods: u32,
    pub detector: DetectorConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            kind: ControllerKind::Ramp,
            adc_period: 0.5e-3,
            po_period: 20e-3,
            po_step: 0.5,
            settle_time: 20e-3,
            ramp_rate: 4000.0,
            local_window: 4,
            local_max_periods: 25,
            detector: DetectorConfig::default(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.adc_period,
            self.po_period,
            self.po_step,
            self.settle_time,
            self.ramp_rate,
        ];
        if pos.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(invalid("controller periods, step and ramp rate must be positive"));
        }
        if self.po_period < self.adc_period || self.settle_time < self.adc_period {
            return Err(invalid(
                "P&O period and settle time must span at least one ADC period",
            ));
        }
        if self.local_window < 2 || self.local_window > WINDOW_CAP || self.local_max_periods == 0 {
            return Err(invalid(
                "local window must be in 2..=8 with a positive period bound",
            ));
        }
        self.detector.validate()
    }

    fn ticks(&self, seconds: f64) -> u32 {
        (libm::round(seconds / self.adc_period) as u32).max(1)
    }
}

const WINDOW_CAP: usize = 8;
/// ADC samples averaged at the end of each settle/P&O period.
const AVG_SAMPLES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measurement {
    pub v: f64,
    pub i: f64,
    pub v_sample_mod: f64,
    pub t_sample_mod: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    StartUp,
    PowerChange,
    Periodic,
}

/// Result of one detection sequence. `dv_arr` is only measured when the
/// other two criteria stay quiet, since any single criterion decides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOutcome {
    pub psi: f64,
    pub dv_arr: Option<f64>,
    pub dv_mod: f64,
    pub psc: bool,
    pub v_mpp_arr: f64,
    pub v_mpp_mod: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerEvent {
    DetectionStarted {
        t: f64,
        trigger: Trigger,
    },
    Detection {
        t: f64,
        outcome: DetectionOutcome,
    },
    ScanStarted {
        t: f64,
        v: f64,
    },
    Pruned {
        t: f64,
        phase: ScanPhase,
        v: f64,
        p_e: f64,
    },
    ScanFinished {
        t: f64,
        best: Best,
    },
    /// Command reached the best point of the scan.
    ArrivedAtBest {
        t: f64,
    },
    /// Back in P&O after reaching the scan's best point.
    SettledToBest {
        t: f64,
        v: f64,
    },
}

/// Command for the next ADC period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    /// Command value at the end of the period.
    pub v_ref: f64,
    pub mode: Mode,
    /// Best point so far while scanning.
    pub best: Option<Best>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stage {
    StartUp,
    Po { n: u32 },
    Settle { retargets: u32, wait: u32 },
    Minus { wait: u32 },
    Plus { wait: u32 },
    Local { n: u32, periods: u32 },
    Scanning(Scan),
    ToBest { wait: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Avg {
    buf: [(f64, f64, f64); AVG_SAMPLES],
    len: usize,
    next: usize,
}

impl Avg {
    fn push(&mut self, m: &Measurement) {
        self.buf[self.next] = (m.v, m.i, m.v_sample_mod);
        self.next = (self.next + 1) % AVG_SAMPLES;
        self.len = (self.len + 1).min(AVG_SAMPLES);
    }

    /// Mean `(v, i, v_sample)` of the retained samples.
    fn mean(&self) -> (f64, f64, f64) {
        let n = self.len.max(1) as f64;
        let s = self.buf[..self.len]
            .iter()
            .fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        (s.0 / n, s.1 / n, s.2 / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Probe {
    v_mpp_arr: f64,
    v_mpp_mod: f64,
    h: f64,
    v_sample: f64,
    minus: (f64, f64),
    psi: f64,
    dv_mod: f64,
}

#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    refs: ReferenceModel,
    v_ref: f64,
    ramp_to: Option<f64>,
    stage: Stage,
    po: PerturbObserve,
    avg: Avg,
    last_period_power: Option<f64>,
    last_detection: f64,
    /// Estimated series drop per ampere between command and array voltage.
    r_est: f64,
    probe: Probe,
    local: Vec<(f64, f64)>,
    events: Vec<ControllerEvent>,
    settle_ticks: u32,
    po_ticks: u32,
}

impl Controller {
    pub fn new(cfg: ControllerConfig, refs: ReferenceModel, v_ref0: f64) -> Result<Self> {
        cfg.validate()?;
        refs.validate()?;
        if !(v_ref0.is_finite() && v_ref0 >= 0.0) {
            return Err(invalid("initial command must be finite and non-negative"));
        }
        let stage = match cfg.kind {
            ControllerKind::Ramp => Stage::StartUp,
            ControllerKind::PerturbObserve => Stage::Po { n: 0 },
        };
        Ok(Controller {
            settle_ticks: cfg.ticks(cfg.settle_time),
            po_ticks: cfg.ticks(cfg.po_period),
            po: PerturbObserve::new(cfg.po_step),
            cfg,
            refs,
            v_ref: v_ref0,
            ramp_to: None,
            stage,
            avg: Avg::default(),
            last_period_power: None,
            last_detection: 0.0,
            r_est: 0.0,
            probe: Probe::default(),
            local: Vec::with_capacity(WINDOW_CAP),
            events: Vec::new(),
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn v_ref(&self) -> f64 {
        self.v_ref
    }

    pub fn mode(&self) -> Mode {
        match self.stage {
            Stage::StartUp | Stage::Settle { .. } => Mode::DetectSettle,
            Stage::Po { .. } | Stage::Local { .. } => Mode::PerturbObserve,
            Stage::Minus { .. } | Stage::Plus { .. } => Mode::DetectProbe,
            Stage::Scanning(s) => match s.phase {
                ScanPhase::Up => Mode::ScanUp,
                ScanPhase::Down => Mode::ScanDown,
            },
            Stage::ToBest { .. } => Mode::SettleToBest,
        }
    }

    /// Events raised since the last call.
    pub fn drain_events(&mut self) -> impl Iterator<Item = ControllerEvent> + '_ {
        self.events.drain(..)
    }

    /// One ADC period.
    pub fn tick(&mut self, m: &Measurement) -> Command {
        self.avg.push(m);
        match self.stage {
            Stage::StartUp => self.start_detection(m, Trigger::StartUp),
            Stage::Po { n } => self.tick_po(m, n + 1),
            Stage::Settle { retargets, wait } => {
                if let Some(w) = self.waited(wait) {
                    self.stage = Stage::Settle { retargets, wait: w };
                } else {
                    self.finish_settle(m, retargets);
                }
            }
            Stage::Minus { wait } => {
                if let Some(w) = self.waited(wait) {
                    self.stage = Stage::Minus { wait: w };
                } else {
                    let (v, i, _) = self.avg.mean();
                    self.probe.minus = (v, v * i);
                    self.move_to(self.v_ref + 2.0 * self.probe.h);
                    self.stage = Stage::Plus {
                        wait: self.settle_ticks,
                    };
                }
            }
            Stage::Plus { wait } => {
                if let Some(w) = self.waited(wait) {
                    self.stage = Stage::Plus { wait: w };
                } else {
                    self.finish_probe(m);
                }
            }
            Stage::Local { n, periods } => self.tick_local(m, n + 1, periods),
            Stage::Scanning(mut scan) => {
                match scan.observe(m.v, m.i) {
                    ScanStep::Continue => {}
                    ScanStep::Reverse(end) => {
                        if end == PhaseEnd::Pruned {
                            self.events.push(ControllerEvent::Pruned {
                                t: m.t,
                                phase: ScanPhase::Up,
                                v: m.v,
                                p_e: scan.best.p_e,
                            });
                        }
                    }
                    ScanStep::Done(end) => {
                        if end == PhaseEnd::Pruned {
                            self.events.push(ControllerEvent::Pruned {
                                t: m.t,
                                phase: ScanPhase::Down,
                                v: m.v,
                                p_e: scan.best.p_e,
                            });
                        }
                        self.events.push(ControllerEvent::ScanFinished {
                            t: m.t,
                            best: scan.best,
                        });
                        let b = scan.best;
                        self.move_to(b.v_e - self.r_est * b.i_e);
                        self.stage = Stage::ToBest {
                            wait: self.settle_ticks,
                        };
                        return self.finish_tick(None, m.t);
                    }
                }
                self.stage = Stage::Scanning(scan);
                self.v_ref =
                    (self.v_ref + scan.direction() * self.cfg.ramp_rate * self.cfg.adc_period).max(0.0);
                return self.finish_tick(Some(scan.best), m.t);
            }
            Stage::ToBest { wait } => {
                if let Some(w) = self.waited(wait) {
                    self.stage = Stage::ToBest { wait: w };
                } else {
                    self.events
                        .push(ControllerEvent::SettledToBest { t: m.t, v: m.v });
                    self.resume_po(m.t);
                }
            }
        }
        let best = match self.stage {
            Stage::Scanning(s) => Some(s.best),
            _ => None,
        };
        self.finish_tick(best, m.t)
    }

    /// Counts down a settle wait once the command has arrived; `None` when
    /// the wait is over.
    fn waited(&self, wait: u32) -> Option<u32> {
        if self.ramp_to.is_some() {
            Some(wait)
        } else if wait > 1 {
            Some(wait - 1)
        } else {
            None
        }
    }

    fn finish_tick(&mut self, best: Option<Best>, t: f64) -> Command {
        if let Some(target) = self.ramp_to {
            let step = self.cfg.ramp_rate * self.cfg.adc_period;
            let d = target - self.v_ref;
            if libm::fabs(d) <= step {
                self.v_ref = target;
                self.ramp_to = None;
                if matches!(self.stage, Stage::ToBest { .. }) {
                    self.events.push(ControllerEvent::ArrivedAtBest {
                        t: t + self.cfg.adc_period,
                    });
                }
            } else {
                self.v_ref += step * d.signum();
            }
        }
        Command {
            v_ref: self.v_ref,
            mode: self.mode(),
            best,
        }
    }

    fn move_to(&mut self, target: f64) {
        self.ramp_to = Some(target.max(0.0));
    }

    fn period_power(&self) -> f64 {
        let (v, i, _) = self.avg.mean();
        v * i
    }

    fn tick_po(&mut self, m: &Measurement, n: u32) {
        if n < self.po_ticks {
            self.stage = Stage::Po { n };
            return;
        }
        self.stage = Stage::Po { n: 0 };
        let p = self.period_power();
        if self.cfg.kind == ControllerKind::Ramp {
            let trig = &self.cfg.detector;
            let changed = self
                .last_period_power
                .is_some_and(|lp| lp > 0.0 && libm::fabs(p - lp) / lp > trig.power_change_trigger);
            if changed {
                return self.start_detection(m, Trigger::PowerChange);
            }
            if m.t - self.last_detection >= trig.periodic_trigger {
                return self.start_detection(m, Trigger::Periodic);
            }
        }
        self.last_period_power = Some(p);
        self.v_ref = self.po.step(p, self.v_ref).max(0.0);
    }

    fn resume_po(&mut self, t: f64) {
        self.po.reset();
        self.last_period_power = None;
        self.last_detection = t;
        self.stage = Stage::Po { n: 0 };
    }

    fn start_detection(&mut self, m: &Measurement, trigger: Trigger) {
        self.events
            .push(ControllerEvent::DetectionStarted { t: m.t, trigger });
        self.last_detection = m.t;
        let (va, _) = self.refs.update(m.t_sample_mod);
        let offset = m.v - self.v_ref;
        self.move_to(va - offset);
        self.stage = Stage::Settle {
            retargets: 0,
            wait: self.settle_ticks,
        };
    }

    fn finish_settle(&mut self, m: &Measurement, retargets: u32) {
        let (v, i, vs) = self.avg.mean();
        let (va, vm) = self.refs.corrected(m.t_sample_mod, i);
        let err = va - v;
        if libm::fabs(err) > RETARGET_TOL * va && (retargets as usize) < MAX_RETARGET {
            self.move_to(self.v_ref + err);
            self.stage = Stage::Settle {
                retargets: retargets + 1,
                wait: self.settle_ticks,
            };
            return;
        }
        if i > 1e-3 {
            self.r_est = ((v - self.v_ref) / i).max(0.0);
        }
        self.probe = Probe {
            v_mpp_arr: va,
            v_mpp_mod: vm,
            h: self.cfg.detector.probe_dv(va),
            v_sample: vs,
            ..Probe::default()
        };
        self.move_to(self.v_ref - self.probe.h);
        self.stage = Stage::Minus {
            wait: self.settle_ticks,
        };
    }

    fn finish_probe(&mut self, m: &Measurement) {
        let (v, i, _) = self.avg.mean();
        // A dark array cannot be assessed; treat it as unshaded.
        let psi = compute_psi(self.probe.minus, (v, v * i)).unwrap_or(0.0);
        let pr = &mut self.probe;
        pr.psi = psi;
        pr.dv_mod = (pr.v_sample - pr.v_mpp_mod) / pr.v_mpp_mod;
        let d = &self.cfg.detector;
        if libm::fabs(psi) > d.psi_threshold || libm::fabs(pr.dv_mod) > d.dv_mod_threshold {
            self.conclude(m, None, true);
        } else {
            self.po.reset();
            self.local.clear();
            self.stage = Stage::Local { n: 0, periods: 0 };
        }
    }

    fn tick_local(&mut self, m: &Measurement, n: u32, periods: u32) {
        if n < self.po_ticks {
            self.stage = Stage::Local { n, periods };
            return;
        }
        let periods = periods + 1;
        let p = self.period_power();
        let (v, _, _) = self.avg.mean();
        if self.local.len() == self.cfg.local_window {
            self.local.remove(0);
        }
        self.local.push((self.v_ref, v));
        let full = self.local.len() == self.cfg.local_window;
        let (lo, hi) = self
            .local
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                (a.min(x.0), b.max(x.0))
            });
        let resting = full && hi - lo <= 2.0 * self.cfg.po_step + 1e-9;
        if resting || periods >= self.cfg.local_max_periods {
            let v_local = self.local.iter().map(|x| x.1).sum::<f64>() / self.local.len() as f64;
            let va = self.probe.v_mpp_arr;
            let dv_arr = (v_local - va) / va;
            let psc = libm::fabs(dv_arr) > self.cfg.detector.dv_arr_threshold;
            self.conclude(m, Some(dv_arr), psc);
            if !psc {
                self.last_period_power = Some(p);
            }
            return;
        }
        self.stage = Stage::Local { n: 0, periods };
        self.v_ref = self.po.step(p, self.v_ref).max(0.0);
    }

    fn conclude(&mut self, m: &Measurement, dv_arr: Option<f64>, psc: bool) {
        let pr = self.probe;
        self.events.push(ControllerEvent::Detection {
            t: m.t,
            outcome: DetectionOutcome {
                psi: pr.psi,
                dv_arr,
                dv_mod: pr.dv_mod,
                psc,
                v_mpp_arr: pr.v_mpp_arr,
                v_mpp_mod: pr.v_mpp_mod,
            },
        });
        self.last_detection = m.t;
        if !psc {
            self.stage = Stage::Po { n: 0 };
            return;
        }
        self.events.push(ControllerEvent::ScanStarted { t: m.t, v: m.v });
        self.ramp_to = None;
        self.stage = Stage::Scanning(Scan::begin(
            m.v,
            m.i,
            self.refs.v_oc_arr_rated,
            pr.v_mpp_mod,
            self.refs.i_sc_rated,
        ));
        // The scan moves the command in the same tick it starts.
        self.v_ref += self.cfg.ramp_rate * self.cfg.adc_period;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pv::{
        nd195r1s, oracle_gmpp, sweep_curve, ArraySpec, ModuleCondition, ModuleDatasheet, ModuleIndex,
    };

    // Plant with no dynamics: the array sits exactly at the command.
    fn run(
        spec: &ArraySpec,
        kind: ControllerKind,
        v0: f64,
        seconds: f64,
    ) -> (Controller, Vec<(f64, Command)>) {
        let cfg = ControllerConfig {
            kind,
            ..ControllerConfig::default()
        };
        let refs =
            ReferenceModel::from_datasheet(&ModuleDatasheet::ND195R1S, spec.n_series(), spec.n_parallel());
        let mut c = Controller::new(cfg, refs, v0).unwrap();
        let ticks = (seconds / cfg.adc_period) as usize;
        let t_mod = spec.sample_condition().temperature_t;
        let mut out = Vec::with_capacity(ticks);
        for k in 0..ticks {
            let v = c.v_ref();
            let m = Measurement {
                v,
                i: spec.array_current(v),
                v_sample_mod: spec.sample_module_voltage(v),
                t_sample_mod: t_mod,
                t: k as f64 * cfg.adc_period,
            };
            out.push((v, c.tick(&m)));
        }
        (c, out)
    }

    fn shaded() -> ArraySpec {
        let hi = ModuleCondition::new(1.0, 25.0);
        let lo = ModuleCondition::new(0.3, 25.0);
        let mut cond = alloc::vec![hi; 15];
        for s in 0..3 {
            cond[s * 5] = lo;
            cond[s * 5 + 1] = lo;
        }
        ArraySpec::new(nd195r1s(), 5, 3, cond, ModuleIndex::new(0, 0)).unwrap()
    }

    #[test]
    fn uniform_array_never_scans() {
        let spec = ArraySpec::uniform(nd195r1s(), 5, 3, ModuleCondition::STC).unwrap();
        let (mut c, out) = run(&spec, ControllerKind::Ramp, 100.0, 1.0);
        let ev: Vec<_> = c.drain_events().collect();
        assert!(ev
            .iter()
            .any(|e| matches!(e, ControllerEvent::Detection { outcome, .. } if !outcome.psc)));
        assert!(!ev
            .iter()
            .any(|e| matches!(e, ControllerEvent::ScanStarted { .. })));
        assert!(out.iter().all(|(_, cmd)| !cmd.mode.is_scan()));
    }

    #[test]
    fn shaded_array_scans_to_global_peak() {
        let spec = shaded();
        let (v_star, p_star) = oracle_gmpp(&sweep_curve(&spec, 0.01).unwrap());
        let (mut c, out) = run(&spec, ControllerKind::Ramp, 118.0, 1.0);
        let ev: Vec<_> = c.drain_events().collect();
        let order: Vec<u8> = ev
            .iter()
            .filter_map(|e| match e {
                ControllerEvent::DetectionStarted { .. } => Some(0),
                ControllerEvent::Detection { outcome, .. } if outcome.psc => Some(1),
                ControllerEvent::ScanStarted { .. } => Some(2),
                ControllerEvent::ScanFinished { .. } => Some(3),
                ControllerEvent::ArrivedAtBest { .. } => Some(4),
                ControllerEvent::SettledToBest { .. } => Some(5),
                _ => None,
            })
            .collect();
        assert_eq!(&order[..6], &[0, 1, 2, 3, 4, 5]);
        let v = out.last().unwrap().1.v_ref;
        let p = v * spec.array_current(v);
        assert!(p > 0.99 * p_star, "p {p} vs {p_star} at {v_star}");
    }

    #[test]
    fn scan_moves_command_at_ramp_rate() {
        let (_, out) = run(&shaded(), ControllerKind::Ramp, 118.0, 0.5);
        let step = 4000.0 * 0.5e-3;
        let mut n = 0;
        for w in out.windows(2) {
            if w[1].1.mode.is_scan() && w[0].1.mode.is_scan() {
                assert!((libm::fabs(w[1].1.v_ref - w[0].1.v_ref) - step).abs() < 1e-9);
                n += 1;
            }
        }
        assert!(n > 10);
    }

    #[test]
    fn po_baseline_never_detects() {
        let (mut c, out) = run(&shaded(), ControllerKind::PerturbObserve, 118.0, 0.5);
        assert_eq!(c.drain_events().count(), 0);
        assert!(out.iter().all(|(_, cmd)| cmd.mode == Mode::PerturbObserve));
    }

    #[test]
    fn rejects_bad_config() {
        let refs = ReferenceModel::from_datasheet(&ModuleDatasheet::ND195R1S, 5, 3);
        let cfg = ControllerConfig {
            ramp_rate: 0.0,
            ..ControllerConfig::default()
        };
        assert!(Controller::new(cfg, refs.clone(), 100.0).is_err());
        assert!(Controller::new(ControllerConfig::default(), refs, f64::NAN).is_err());
    }
}
