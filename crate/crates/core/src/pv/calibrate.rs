//! Datasheet → single-diode parameter extraction.
//!
//! With the ideality factor fixed, `i_pv` and `i_o` follow exactly from the
//! short-circuit and open-circuit points for any `(r_s, r_sh)`. The remaining
//! two unknowns are fitted by projected Levenberg-Marquardt on the power and
//! the power slope at the datasheet MPP. A datasheet need not be exactly
//! representable by the model, so the fit is least-squares and the
//! post-conditions below decide success.
//!
//! Afterwards the effective band gap is tuned so that the model's V_mpp
//! temperature coefficient equals the datasheet `rho_mod`.

use super::module::{ModuleCondition, ModuleCurve, ModuleDatasheet, ModuleParams};
use crate::error::{invalid, Error, Result};
use crate::solve::bisect;
use libm::{expm1, fabs, fmax, fmin, sqrt};

/// Ideality used for the canonical ND195R1S parameters.
pub const CANONICAL_IDEALITY: f64 = 1.2;

pub const R_SH_MIN: f64 = 10.0;
pub const R_SH_MAX: f64 = 1e4;

// Post-condition tolerances.
const TOL_ISC: f64 = 0.005;
const TOL_VOC: f64 = 0.005;
const TOL_PMAX: f64 = 0.02;
const TOL_SLOPE: f64 = 0.01;
const TOL_RHO: f64 = 1e-6;

/// Fits single-diode parameters to a datasheet with ideality `a_fixed`.
pub fn calibrate_module(ds: &ModuleDatasheet, a_fixed: f64) -> Result<ModuleParams> {
    ds.validate()?;
    if !(1.0..=2.0).contains(&a_fixed) {
        return Err(invalid("a_fixed must lie in [1, 2]"));
    }
    let mut base = ModuleParams {
        i_pv_ref: ds.i_sc,
        i_o_ref: 1e-9,
        ideality_a: a_fixed,
        r_s: 0.0,
        r_sh: R_SH_MAX,
        n_cells: ds.n_cells,
        v_bypass: -0.7,
        band_gap_ev: 1.12,
        k_i: 0.0,
        rho_mod: ds.rho_mod,
    };
    let a = base.thermal_voltage(25.0);
    let fit = Fit { ds, a };

    let rs_max = (ds.v_oc - ds.v_mpp) / ds.i_mpp;
    let mut best: Option<([f64; 2], f64)> = None;
    for rs0 in [0.05, 0.4, 0.8] {
        for g0 in [1e-3, 1e-2] {
            let x = fit.levenberg_marquardt([rs0 * rs_max, g0], rs_max);
            let c = fit.cost(x);
            if c.is_finite() && best.is_none_or(|(_, bc)| c < bc) {
                best = Some((x, c));
            }
        }
    }
    let (x, _) = best.ok_or(Error::Degenerate("no admissible (r_s, r_sh) start"))?;
    let (i_pv, i_o) = fit.eliminate(x[0], x[1]).ok_or(Error::Degenerate("i_o <= 0"))?;
    base.i_pv_ref = i_pv;
    base.i_o_ref = i_o;
    base.r_s = x[0];
    base.r_sh = 1.0 / x[1];

    let mut residuals = stc_residuals(&base, ds);
    let stc_ok = fabs(residuals[0]) <= TOL_ISC
        && fabs(residuals[1]) < TOL_VOC
        && fabs(residuals[2]) <= TOL_PMAX
        && fabs(residuals[3]) < TOL_SLOPE;
    if !stc_ok {
        return Err(Error::Calibration { residuals });
    }

    match fit_band_gap(&base, ds.rho_mod) {
        Ok(eg) => base.band_gap_ev = eg,
        Err(_) => {
            residuals[4] = vmpp_temp_coeff(&base) - ds.rho_mod;
            return Err(Error::Calibration { residuals });
        }
    }
    residuals[4] = vmpp_temp_coeff(&base) - ds.rho_mod;
    if fabs(residuals[4]) > TOL_RHO {
        return Err(Error::Calibration { residuals });
    }
    base.validate()?;
    Ok(base)
}

/// Canonical ND195R1S parameters.
pub fn nd195r1s() -> ModuleParams {
    calibrate_module(&ModuleDatasheet::ND195R1S, CANONICAL_IDEALITY)
        .expect("ND195R1S calibration is fixed and known to succeed")
}

/// STC residuals in the order documented on [`Error::Calibration`]; the
/// temperature entry is left at zero.
pub fn stc_residuals(p: &ModuleParams, ds: &ModuleDatasheet) -> [f64; 5] {
    let c = p.curve(ModuleCondition::STC);
    let i0 = c.current(0.0);
    let ioc = c.current(ds.v_oc);
    let im = c.current(ds.v_mpp);
    let slope = power_slope(&c, ds.v_mpp);
    [
        i0 / ds.i_sc - 1.0,
        ioc / ds.i_sc,
        ds.v_mpp * im / ds.p_max - 1.0,
        slope * ds.v_mpp / ds.p_max,
        0.0,
    ]
}

/// dP/dV at `v` from the analytic dI/dV.
fn power_slope(c: &ModuleCurve, v: f64) -> f64 {
    let i = c.current(v);
    let e = c.i_o * libm::exp((v + c.r_s * i) / c.a) / c.a + c.g_sh;
    let didv = -e / (1.0 + c.r_s * e);
    i + v * didv
}

/// V_mpp temperature coefficient (secant over 0..50 °C, relative to STC).
pub fn vmpp_temp_coeff(p: &ModuleParams) -> f64 {
    let vm = |t: f64| p.curve(ModuleCondition::new(1.0, t)).mpp().0;
    (vm(50.0) - vm(0.0)) / (50.0 * vm(25.0))
}

fn fit_band_gap(p: &ModuleParams, rho: f64) -> Result<f64> {
    let mut q = *p;
    bisect(
        |eg| {
            q.band_gap_ev = eg;
            vmpp_temp_coeff(&q) - rho
        },
        0.3,
        2.5,
        1e-9,
        200,
    )
}

struct Fit<'a> {
    ds: &'a ModuleDatasheet,
    a: f64,
}

impl Fit<'_> {
    /// Exact `(i_pv, i_o)` from the Isc and Voc equations.
    fn eliminate(&self, r_s: f64, g: f64) -> Option<(f64, f64)> {
        let ds = self.ds;
        let e_sc = expm1(r_s * ds.i_sc / self.a);
        let e_oc = expm1(ds.v_oc / self.a);
        let i_o = (ds.i_sc - g * (ds.v_oc - r_s * ds.i_sc)) / (e_oc - e_sc);
        if !(i_o > 0.0) || !i_o.is_finite() {
            return None;
        }
        // Written so that r_s = 0 yields i_pv = i_sc exactly.
        let i_pv = ds.i_sc + i_o * e_sc + r_s * ds.i_sc * g;
        Some((i_pv, i_o))
    }

    fn residuals(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        let (i_pv, i_o) = self.eliminate(x[0], x[1])?;
        let c = ModuleCurve {
            i_ph: i_pv,
            i_o,
            a: self.a,
            r_s: x[0],
            g_sh: x[1],
            v_bypass: -0.7,
        };
        let ds = self.ds;
        let p = ds.v_mpp * c.current(ds.v_mpp);
        let slope = power_slope(&c, ds.v_mpp);
        Some([
            (p / ds.p_max - 1.0) / TOL_PMAX,
            slope * ds.v_mpp / ds.p_max / TOL_SLOPE,
        ])
    }

    fn cost(&self, x: [f64; 2]) -> f64 {
        match self.residuals(x) {
            Some(r) => r[0] * r[0] + r[1] * r[1],
            None => f64::INFINITY,
        }
    }

    fn project(x: [f64; 2], rs_max: f64) -> [f64; 2] {
        [
            fmin(fmax(x[0], 0.0), rs_max),
            fmin(fmax(x[1], 1.0 / R_SH_MAX), 1.0 / R_SH_MIN),
        ]
    }

    fn levenberg_marquardt(&self, x0: [f64; 2], rs_max: f64) -> [f64; 2] {
        let mut x = Self::project(x0, rs_max);
        let mut cost = self.cost(x);
        if !cost.is_finite() {
            return x;
        }
        let mut lambda = 1e-3;
        for _ in 0..300 {
            let Some(r) = self.residuals(x) else { break };
            // Forward/backward difference Jacobian that respects the box.
            let mut jac = [[0.0; 2]; 2];
            for k in 0..2 {
                let h = 1e-7 * fmax(fabs(x[k]), if k == 0 { 1e-3 } else { 1e-4 });
                let mut xp = x;
                xp[k] += h;
                let (rp, hh) = match self.residuals(xp) {
                    Some(rp) => (rp, h),
                    None => {
                        xp[k] = x[k] - h;
                        match self.residuals(xp) {
                            Some(rp) => (rp, -h),
                            None => return x,
                        }
                    }
                };
                for m in 0..2 {
                    jac[m][k] = (rp[m] - r[m]) / hh;
                }
            }
            // Normal equations (JᵀJ + λ·diag(JᵀJ)) δ = -Jᵀr.
            let mut jtj = [[0.0; 2]; 2];
            let mut jtr = [0.0; 2];
            for a in 0..2 {
                for b in 0..2 {
                    jtj[a][b] = jac[0][a] * jac[0][b] + jac[1][a] * jac[1][b];
                }
                jtr[a] = jac[0][a] * r[0] + jac[1][a] * r[1];
            }
            let mut improved = false;
            for _ in 0..30 {
                let m00 = jtj[0][0] * (1.0 + lambda) + 1e-300;
                let m11 = jtj[1][1] * (1.0 + lambda) + 1e-300;
                let det = m00 * m11 - jtj[0][1] * jtj[1][0];
                if det == 0.0 || !det.is_finite() {
                    lambda *= 10.0;
                    continue;
                }
                let d0 = (-jtr[0] * m11 + jtr[1] * jtj[0][1]) / det;
                let d1 = (-jtr[1] * m00 + jtr[0] * jtj[1][0]) / det;
                let xn = Self::project([x[0] + d0, x[1] + d1], rs_max);
                let cn = self.cost(xn);
                if cn < cost {
                    let (e0, e1) = (xn[0] - x[0], (xn[1] - x[1]) * 1e3);
                    let step = sqrt(e0 * e0 + e1 * e1);
                    x = xn;
                    let old = cost;
                    cost = cn;
                    lambda = fmax(lambda / 3.0, 1e-12);
                    improved = true;
                    if cost < 1e-26 || step < 1e-15 || (old - cn) < 1e-16 * old {
                        return x;
                    }
                    break;
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        x
    }
}
