use super::array::ArraySpec;
use crate::error::{Error, Result};
use crate::solve::golden_max;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvSample {
    pub v: f64,
    pub i: f64,
    pub p: f64,
}

/// Dense P-V characteristic on a uniform voltage grid from 0 to `V_oc`.
/// The last sample sits exactly at `V_oc` with zero current.
#[derive(Debug, Clone, PartialEq)]
pub struct PvCurve {
    samples: Vec<PvSample>,
    v_step: f64,
    inv_step: f64,
}

impl PvCurve {
    pub fn samples(&self) -> &[PvSample] {
        &self.samples
    }

    pub fn v_step(&self) -> f64 {
        self.v_step
    }

    pub fn v_oc(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.v)
    }

    /// Linear interpolation of the current; 0 above `V_oc`.
    pub fn current(&self, v: f64) -> f64 {
        let n = self.samples.len();
        if n == 0 || v >= self.v_oc() {
            return 0.0;
        }
        if v <= 0.0 {
            return self.samples[0].i;
        }
        let x = v * self.inv_step;
        let k = (x as usize).min(n - 2);
        let (a, b) = (self.samples[k], self.samples[k + 1]);
        // All intervals are one grid step except the last, which ends at V_oc.
        let w = if k + 2 < n {
            x - k as f64
        } else {
            (v - a.v) / (b.v - a.v)
        };
        a.i + w * (b.i - a.i)
    }

    /// Sample-level local maxima of power, `(v, p)` in ascending voltage.
    pub fn local_maxima(&self) -> Vec<(f64, f64)> {
        let s = &self.samples;
        let floor = 1e-9 * s.iter().map(|x| x.p).fold(0.0, f64::max);
        (1..s.len().saturating_sub(1))
            .filter(|&k| s[k].p > s[k - 1].p && s[k].p >= s[k + 1].p && s[k].p > floor)
            .map(|k| (s[k].v, s[k].p))
            .collect()
    }

    /// Highest power among samples with `lo < v < hi`.
    pub fn max_power_in(&self, lo: f64, hi: f64) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.v > lo && s.v < hi)
            .map(|s| s.p)
            .fold(0.0, f64::max)
    }
}

/// Sweeps the array from 0 V to its open-circuit voltage.
pub fn sweep_curve(spec: &ArraySpec, v_step: f64) -> Result<PvCurve> {
    if !(v_step > 0.0 && v_step <= 0.05) {
        return Err(Error::Domain {
            what: "sweep v_step (0, 0.05] V",
            value: v_step,
        });
    }
    let voc = spec.open_circuit_voltage();
    let mut guesses = alloc::vec![f64::NAN; spec.n_parallel()];
    let n = libm::ceil(voc / v_step) as usize;
    let mut samples = Vec::with_capacity(n + 1);
    let mut i_prev = f64::INFINITY;
    for k in 0..n.max(1) {
        let v = k as f64 * v_step;
        if k > 0 && v >= voc - 1e-9 {
            break;
        }
        // Running minimum keeps the characteristic monotone against
        // solver-level noise.
        let i = spec.array_current_from(v, &mut guesses).min(i_prev).max(0.0);
        i_prev = i;
        samples.push(PvSample { v, i, p: v * i });
    }
    if voc > 0.0 {
        samples.push(PvSample {
            v: voc,
            i: 0.0,
            p: 0.0,
        });
    }
    Ok(PvCurve {
        samples,
        v_step,
        inv_step: 1.0 / v_step,
    })
}

/// Global maximum of a curve: best sample refined by golden-section search
/// on the interpolated characteristic to 1 mV.
pub fn oracle_gmpp(curve: &PvCurve) -> (f64, f64) {
    let s = curve.samples();
    let Some((k, best)) = s.iter().enumerate().max_by(|a, b| a.1.p.total_cmp(&b.1.p)) else {
        return (0.0, 0.0);
    };
    let lo = if k > 0 { s[k - 1].v } else { best.v };
    let hi = if k + 1 < s.len() { s[k + 1].v } else { best.v };
    if hi <= lo {
        return (best.v, best.p);
    }
    let (v, p) = golden_max(|v| v * curve.current(v), lo, hi, 1e-3);
    if p > best.p {
        (v, p)
    } else {
        (best.v, best.p)
    }
}

/// Global maximum refined against the exact array model instead of the
/// interpolated curve.
pub fn refine_gmpp(spec: &ArraySpec, curve: &PvCurve) -> (f64, f64) {
    let (v0, _) = oracle_gmpp(curve);
    let h = curve.v_step();
    let lo = (v0 - h).max(0.0);
    let hi = (v0 + h).min(curve.v_oc());
    golden_max(|v| v * spec.array_current(v), lo, hi, 1e-6)
}

/// O(1) current lookup on a swept curve, for the converter integrator.
#[derive(Debug, Clone)]
pub struct TabulatedArray {
    curve: PvCurve,
}

impl TabulatedArray {
    pub fn new(curve: PvCurve) -> Self {
        TabulatedArray { curve }
    }

    pub fn curve(&self) -> &PvCurve {
        &self.curve
    }

    pub fn current(&self, v: f64) -> f64 {
        self.curve.current(v)
    }
}
