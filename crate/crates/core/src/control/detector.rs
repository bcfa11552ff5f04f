//! Partial-shading detector: PSI index plus two voltage-deviation criteria,
//! any one of which flags partial shading.

use super::reference::ReferenceModel;
use crate::error::{Error, Result};
use crate::pv::ArraySpec;
use crate::solve::golden_max;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub psi_threshold: f64,
    pub dv_arr_threshold: f64,
    pub dv_mod_threshold: f64,
    /// Relative power change (between P&O samples) that starts a detection.
    pub power_change_trigger: f64,
    /// Seconds between unconditional detections.
    pub periodic_trigger: f64,
    /// Half-width of the PSI probe; `None` means 1% of the reference.
    pub psi_probe_dv: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            psi_threshold: 0.001,
            dv_arr_threshold: 0.02,
            dv_mod_threshold: 0.02,
            power_change_trigger: 0.03,
            periodic_trigger: 5.0,
            psi_probe_dv: None,
        }
    }
}

impl DetectorConfig {
    pub fn probe_dv(&self, v_mpp_arr: f64) -> f64 {
        self.psi_probe_dv.unwrap_or(0.01 * v_mpp_arr)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [
            self.psi_threshold,
            self.dv_arr_threshold,
            self.dv_mod_threshold,
            self.power_change_trigger,
            self.periodic_trigger,
        ]
        .iter()
        .all(|x| x.is_finite() && *x > 0.0)
            && self.psi_probe_dv.is_none_or(|d| d.is_finite() && d > 0.0);
        if ok {
            Ok(())
        } else {
            Err(crate::error::invalid("detector thresholds must be positive"))
        }
    }
}

/// Signed criterion values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Criteria {
    /// Normalized power slope at the reference voltage (1/V).
    pub psi: f64,
    /// `(V_local − V_mpp-arr)/V_mpp-arr`.
    pub dv_arr: f64,
    /// `(V_sample − V_mpp-mod)/V_mpp-mod` with the array at `V_mpp-arr`.
    pub dv_mod: f64,
}

impl Criteria {
    pub fn fired(&self, cfg: &DetectorConfig) -> [bool; 3] {
        [
            libm::fabs(self.psi) > cfg.psi_threshold,
            libm::fabs(self.dv_arr) > cfg.dv_arr_threshold,
            libm::fabs(self.dv_mod) > cfg.dv_mod_threshold,
        ]
    }

    pub fn is_psc(&self, cfg: &DetectorConfig) -> bool {
        self.fired(cfg).iter().any(|&f| f)
    }
}

/// `PSI = (p₊ − p₋) / ((v₊ − v₋)·p_mid)` with `p_mid` the mean probe power.
pub fn compute_psi(minus: (f64, f64), plus: (f64, f64)) -> Result<f64> {
    let (vm, pm) = minus;
    let (vp, pp) = plus;
    let p_mid = 0.5 * (pm + pp);
    if !(p_mid > 0.0) {
        return Err(Error::Degenerate("PSI probe power is not positive"));
    }
    if !(vp != vm) {
        return Err(Error::Degenerate("PSI probe points coincide"));
    }
    Ok((pp - pm) / ((vp - vm) * p_mid))
}

/// PSI of a current characteristic probed at `v ± h`.
pub fn psi_probe<F: Fn(f64) -> f64>(current: F, v: f64, h: f64) -> Result<f64> {
    let (a, b) = (v - h, v + h);
    compute_psi((a, a * current(a)), (b, b * current(b)))
}

/// True iff any of the three criteria exceeds its threshold.
pub fn detect_psc(psi: f64, v_local_err: f64, v_mod_err: f64, cfg: &DetectorConfig) -> bool {
    Criteria {
        psi,
        dv_arr: v_local_err,
        dv_mod: v_mod_err,
    }
    .is_psc(cfg)
}

/// Detector outcome on a static array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assessment {
    pub criteria: Criteria,
    pub psc: bool,
    pub v_mpp_arr: f64,
    pub v_mpp_mod: f64,
    pub v_local: f64,
    pub v_sample: f64,
}

/// Number of correction passes and their convergence tolerance, shared
/// with the closed-loop controller.
pub const MAX_RETARGET: usize = 3;
pub const RETARGET_TOL: f64 = 0.0025;

/// Evaluates the detector on a static array with ideal measurements:
/// references from the sample-module temperature (irradiance-corrected from
/// the current at the reference), PSI by central difference, local MPP by
/// hill climbing from the reference.
pub fn assess(spec: &ArraySpec, refs: &ReferenceModel, cfg: &DetectorConfig) -> Result<Assessment> {
    let t = spec.sample_condition().temperature_t;
    let (mut va, mut vm) = refs.update(t);
    for _ in 0..MAX_RETARGET {
        let (na, nm) = refs.corrected(t, spec.array_current(va));
        let moved = libm::fabs(na - va) / na;
        va = na;
        vm = nm;
        if moved <= RETARGET_TOL {
            break;
        }
    }
    let h = cfg.probe_dv(va);
    let psi = psi_probe(|v| spec.array_current(v), va, h)?;
    let v_local = local_mpp(spec, va);
    let v_sample = spec.sample_module_voltage(va);
    let criteria = Criteria {
        psi,
        dv_arr: (v_local - va) / va,
        dv_mod: (v_sample - vm) / vm,
    };
    Ok(Assessment {
        criteria,
        psc: criteria.is_psc(cfg),
        v_mpp_arr: va,
        v_mpp_mod: vm,
        v_local,
        v_sample,
    })
}

/// Local power maximum reached by climbing from `v0`.
pub fn local_mpp(spec: &ArraySpec, v0: f64) -> f64 {
    let p = |v: f64| v * spec.array_current(v.max(0.0));
    let h = 0.05;
    let dir = if p(v0 + h) > p(v0) { 1.0 } else { -1.0 };
    let mut v = v0;
    let mut pv = p(v);
    loop {
        let pn = p(v + dir * h);
        if pn <= pv || v + dir * h <= 0.0 {
            break;
        }
        v += dir * h;
        pv = pn;
    }
    golden_max(p, (v - h).max(0.0), v + h, 1e-6).0
}
