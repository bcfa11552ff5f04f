//! Averaged model of the boost converter between the PV array and a stiff
//! DC link:
//!
//! ```text
//! C·dv/dt = i_pv(v) − i_L
//! L·di/dt = v − r_L·i_L − (1 − D)·v_out
//! ```
//!
//! Open-loop control sets `D = 1 − v_ref/v_out`, so at steady state the
//! array sits `r_L·i_L` above the command.

use crate::error::{invalid, Error, Result};
use crate::pv::{ArraySpec, TabulatedArray};
use crate::trace::{Mode, TraceRecord};
use alloc::vec::Vec;

pub const DEFAULT_DT: f64 = 5e-6;
pub const MAX_DT: f64 = 20e-6;
pub const MAX_DUTY: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterParams {
    /// Inductor series resistance (Ω).
    pub r_l: f64,
    /// Inductance (H).
    pub l: f64,
    /// PV-side capacitance (F).
    pub c_pv: f64,
    /// DC-link voltage, held constant (V).
    pub v_out: f64,
    /// Switching frequency (Hz); informational only in the averaged model.
    pub f_sw: f64,
}

impl ConverterParams {
    /// Reference design used throughout: high r_L, 20 kHz, 250 V link.
    pub const REFERENCE: ConverterParams = ConverterParams {
        r_l: 0.3,
        l: 600e-6,
        c_pv: 100e-6,
        v_out: 250.0,
        f_sw: 20e3,
    };

    pub fn validate(&self) -> Result<()> {
        let v = [self.r_l, self.l, self.c_pv, self.v_out, self.f_sw];
        if v.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(())
        } else {
            Err(invalid("converter parameters must be positive and finite"))
        }
    }
}

impl Default for ConverterParams {
    fn default() -> Self {
        Self::REFERENCE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConverterState {
    pub v_pv: f64,
    pub i_l: f64,
    pub t: f64,
}

/// Anything that maps terminal voltage to delivered current.
pub trait CurrentSource {
    fn current(&self, v: f64) -> f64;
}

impl CurrentSource for ArraySpec {
    fn current(&self, v: f64) -> f64 {
        self.array_current(v.max(0.0))
    }
}

impl CurrentSource for TabulatedArray {
    fn current(&self, v: f64) -> f64 {
        TabulatedArray::current(self, v)
    }
}

/// Ideal current source, independent of voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCurrent(pub f64);

impl CurrentSource for ConstantCurrent {
    fn current(&self, _v: f64) -> f64 {
        self.0
    }
}

impl<S: CurrentSource + ?Sized> CurrentSource for &S {
    fn current(&self, v: f64) -> f64 {
        (**self).current(v)
    }
}

/// Duty cycle that puts `v_ref` on the converter input: `D = 1 − v_ref/v_out`.
pub fn duty_for_voltage(v_ref: f64, v_out: f64) -> Result<f64> {
    if !(v_ref >= 0.0) || v_ref > v_out {
        return Err(Error::Domain {
            what: "v_ref outside [0, v_out]",
            value: v_ref,
        });
    }
    Ok((1.0 - v_ref / v_out).clamp(0.0, MAX_DUTY))
}

fn derivatives<S: CurrentSource + ?Sized>(
    v: f64,
    i: f64,
    duty: f64,
    src: &S,
    p: &ConverterParams,
) -> (f64, f64) {
    let i = i.max(0.0);
    (
        (src.current(v.max(0.0)) - i) / p.c_pv,
        (v - p.r_l * i - (1.0 - duty) * p.v_out) / p.l,
    )
}

/// One RK4 step with the duty held constant. The inductor current is
/// clamped at zero (the boost diode blocks reverse current).
pub fn step_ode<S: CurrentSource + ?Sized>(
    s: ConverterState,
    duty: f64,
    dt: f64,
    src: &S,
    p: &ConverterParams,
) -> ConverterState {
    let (v, i) = (s.v_pv, s.i_l);
    let (k1v, k1i) = derivatives(v, i, duty, src, p);
    let (k2v, k2i) = derivatives(v + 0.5 * dt * k1v, i + 0.5 * dt * k1i, duty, src, p);
    let (k3v, k3i) = derivatives(v + 0.5 * dt * k2v, i + 0.5 * dt * k2i, duty, src, p);
    let (k4v, k4i) = derivatives(v + dt * k3v, i + dt * k3i, duty, src, p);
    ConverterState {
        v_pv: (v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)).max(0.0),
        i_l: (i + dt / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)).max(0.0),
        t: s.t + dt,
    }
}

/// Equilibrium for a fixed duty: `v − r_L·i_pv(v) = (1 − D)·v_out`.
pub fn steady_state<S: CurrentSource + ?Sized>(duty: f64, src: &S, p: &ConverterParams) -> ConverterState {
    let vt = (1.0 - duty) * p.v_out;
    // h(v) = v − r_L·i(v) − vt is increasing because i(v) is non-increasing.
    let h = |v: f64| v - p.r_l * src.current(v) - vt;
    let lo = vt;
    let hi = vt + p.r_l * src.current(vt).max(0.0);
    let v = if hi <= lo {
        lo
    } else {
        crate::solve::bisect(h, lo, hi, 1e-12, 200).unwrap_or(lo)
    };
    ConverterState {
        v_pv: v,
        i_l: src.current(v).max(0.0),
        t: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// Jump to `level` and hold it for `duration` seconds.
    Hold { level: f64, duration: f64 },
    /// Move linearly to `target` at `rate` V/s.
    Ramp { target: f64, rate: f64 },
}

/// Piecewise command `v_ref(t)` starting from `initial`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandSignal {
    pub initial: f64,
    pub segments: Vec<Segment>,
}

impl CommandSignal {
    pub fn new(initial: f64) -> Self {
        CommandSignal {
            initial,
            segments: Vec::new(),
        }
    }

    pub fn hold(mut self, level: f64, duration: f64) -> Self {
        self.segments.push(Segment::Hold { level, duration });
        self
    }

    pub fn ramp(mut self, target: f64, rate: f64) -> Self {
        self.segments.push(Segment::Ramp { target, rate });
        self
    }

    pub fn validate(&self, v_out: f64) -> Result<()> {
        let in_range = |v: f64| (0.0..=v_out).contains(&v);
        if !in_range(self.initial) {
            return Err(Error::Domain {
                what: "command level outside [0, v_out]",
                value: self.initial,
            });
        }
        for s in &self.segments {
            let (level, ok) = match *s {
                Segment::Hold { level, duration } => (level, duration.is_finite() && duration >= 0.0),
                Segment::Ramp { target, rate } => (target, rate.is_finite() && rate > 0.0),
            };
            if !in_range(level) {
                return Err(Error::Domain {
                    what: "command level outside [0, v_out]",
                    value: level,
                });
            }
            if !ok {
                return Err(invalid("segment duration/rate must be finite and positive"));
            }
        }
        Ok(())
    }

    fn spans(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        // (start level, end level, duration) per segment
        let mut prev = self.initial;
        self.segments.iter().map(move |s| {
            let span = match *s {
                Segment::Hold { level, duration } => (level, level, duration),
                Segment::Ramp { target, rate } => (prev, target, (target - prev).abs() / rate),
            };
            prev = span.1;
            span
        })
    }

    pub fn duration(&self) -> f64 {
        self.spans().map(|s| s.2).sum()
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let mut t0 = 0.0;
        let mut last = self.initial;
        for (a, b, d) in self.spans() {
            if t < t0 + d {
                return if d > 0.0 { a + (b - a) * (t - t0) / d } else { b };
            }
            t0 += d;
            last = b;
        }
        last
    }
}

/// Plays `command` into the plant from the steady state at its initial
/// level and samples every `sample_period`.
pub fn run<S: CurrentSource + ?Sized>(
    command: &CommandSignal,
    src: &S,
    params: &ConverterParams,
    sample_period: f64,
) -> Result<Vec<TraceRecord>> {
    run_with_dt(command, src, params, sample_period, DEFAULT_DT)
}

pub fn run_with_dt<S: CurrentSource + ?Sized>(
    command: &CommandSignal,
    src: &S,
    params: &ConverterParams,
    sample_period: f64,
    dt: f64,
) -> Result<Vec<TraceRecord>> {
    params.validate()?;
    command.validate(params.v_out)?;
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::Domain {
            what: "integration step (0, 20 µs]",
            value: dt,
        });
    }
    if !(sample_period >= dt) {
        return Err(Error::Domain {
            what: "sample period shorter than integration step",
            value: sample_period,
        });
    }
    let horizon = command.duration();
    if horizon <= 0.0 {
        return Ok(Vec::new());
    }
    let d0 = duty_for_voltage(command.initial, params.v_out)?;
    let mut s = steady_state(d0, src, params);
    let n_samples = libm::floor(horizon / sample_period + 1e-9) as usize;
    let steps = libm::round(sample_period / dt).max(1.0) as usize;
    let h = sample_period / steps as f64;
    let mut out = Vec::with_capacity(n_samples + 1);
    let mut step_index = 0usize;
    for k in 0..=n_samples {
        let t = k as f64 * sample_period;
        let v_ref = command.value_at(t);
        let duty = duty_for_voltage(v_ref, params.v_out)?;
        let i_pv = src.current(s.v_pv).max(0.0);
        out.push(TraceRecord {
            t,
            v_ref,
            duty,
            v_pv: s.v_pv,
            i_pv,
            p: s.v_pv * i_pv,
            mode: Mode::OpenLoop,
            p_e: 0.0,
            v_e: 0.0,
        });
        if k == n_samples {
            break;
        }
        for _ in 0..steps {
            // Midpoint command keeps ramps second-order accurate.
            let tm = (step_index as f64 + 0.5) * h;
            let duty = duty_for_voltage(command.value_at(tm), params.v_out)?;
            s = step_ode(s, duty, h, src, params);
            step_index += 1;
        }
        s.t = (k + 1) as f64 * sample_period;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duty_examples() {
        assert_eq!(duty_for_voltage(250.0, 250.0).unwrap(), 0.0);
        assert!((duty_for_voltage(100.0, 250.0).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(duty_for_voltage(0.0, 250.0).unwrap(), 0.99);
        assert!(duty_for_voltage(251.0, 250.0).is_err());
        assert!(duty_for_voltage(-1.0, 250.0).is_err());
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = ConverterParams::REFERENCE;
        let src = ConstantCurrent(6.0);
        let d = duty_for_voltage(100.0, p.v_out).unwrap();
        let s = steady_state(d, &src, &p);
        assert!((s.v_pv - (100.0 + 0.3 * 6.0)).abs() < 1e-9);
        let n = step_ode(s, d, DEFAULT_DT, &src, &p);
        assert!((n.v_pv - s.v_pv).abs() <= 1e-6 * s.v_pv);
        assert!((n.i_l - s.i_l).abs() <= 1e-6 * s.i_l);
    }

    #[test]
    fn inductor_current_never_negative() {
        let p = ConverterParams::REFERENCE;
        let s = ConverterState {
            v_pv: 10.0,
            i_l: 0.01,
            t: 0.0,
        };
        let n = step_ode(s, 0.0, DEFAULT_DT, &ConstantCurrent(0.0), &p);
        assert!(n.i_l >= 0.0);
    }

    #[test]
    fn command_shape() {
        let c = CommandSignal::new(60.0)
            .hold(60.0, 0.01)
            .ramp(100.0, 4000.0)
            .hold(100.0, 0.01);
        assert!((c.duration() - 0.03).abs() < 1e-12);
        assert_eq!(c.value_at(0.005), 60.0);
        assert!((c.value_at(0.015) - 80.0).abs() < 1e-9);
        assert_eq!(c.value_at(1.0), 100.0);
    }

    #[test]
    fn empty_command_gives_empty_trace() {
        let tr = run(
            &CommandSignal::new(50.0),
            &ConstantCurrent(1.0),
            &ConverterParams::REFERENCE,
            1e-3,
        )
        .unwrap();
        assert!(tr.is_empty());
    }

    #[test]
    fn out_of_range_command_rejected() {
        let c = CommandSignal::new(50.0).hold(300.0, 0.01);
        let r = run(&c, &ConstantCurrent(1.0), &ConverterParams::REFERENCE, 1e-3);
        assert!(matches!(r, Err(Error::Domain { .. })));
    }
}
