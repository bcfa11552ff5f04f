use crate::error::{invalid, Error, Result};
use crate::solve::{golden_max, newton_oriented};
use libm::{exp, expm1, log1p, pow};

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
pub const KELVIN_OFFSET: f64 = 273.15;
pub const T_REF_C: f64 = 25.0;
const T_REF_K: f64 = T_REF_C + KELVIN_OFFSET;

/// Manufacturer data at STC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleDatasheet {
    pub p_max: f64,
    pub v_oc: f64,
    pub i_sc: f64,
    pub v_mpp: f64,
    pub i_mpp: f64,
    /// Fraction per °C, negative.
    pub pmax_thermal_coeff: f64,
    /// V_mpp temperature coefficient, fraction per °C, negative.
    pub rho_mod: f64,
    pub n_cells: u32,
}

impl ModuleDatasheet {
    /// Sharp ND-195R1S, 48 poly-Si cells.
    pub const ND195R1S: ModuleDatasheet = ModuleDatasheet {
        p_max: 195.0,
        v_oc: 29.7,
        i_sc: 8.68,
        v_mpp: 23.6,
        i_mpp: 8.27,
        pmax_thermal_coeff: -0.0044,
        rho_mod: -0.00329,
        n_cells: 48,
    };

    pub fn validate(&self) -> Result<()> {
        let vals = [self.p_max, self.v_oc, self.i_sc, self.v_mpp, self.i_mpp];
        if vals.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(invalid("datasheet values must be positive and finite"));
        }
        if self.n_cells == 0 {
            return Err(invalid("datasheet n_cells must be positive"));
        }
        if self.v_mpp >= self.v_oc || self.i_mpp >= self.i_sc {
            return Err(invalid("datasheet needs v_mpp < v_oc and i_mpp < i_sc"));
        }
        let pm = self.v_mpp * self.i_mpp;
        if pm > 1.05 * self.p_max {
            return Err(invalid("datasheet infeasible: v_mpp·i_mpp exceeds 1.05·p_max"));
        }
        if (self.p_max - pm).abs() / self.p_max >= 0.02 {
            return Err(invalid(
                "datasheet p_max disagrees with v_mpp·i_mpp by 2% or more",
            ));
        }
        if !(self.rho_mod < 0.0) || !(self.pmax_thermal_coeff < 0.0) {
            return Err(invalid("datasheet thermal coefficients must be negative"));
        }
        Ok(())
    }
}

/// Irradiance (kW/m²) and cell temperature (°C) seen by one module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleCondition {
    pub irradiance_s: f64,
    pub temperature_t: f64,
}

impl ModuleCondition {
    pub const STC: ModuleCondition = ModuleCondition {
        irradiance_s: 1.0,
        temperature_t: T_REF_C,
    };

    pub const fn new(irradiance_s: f64, temperature_t: f64) -> Self {
        ModuleCondition {
            irradiance_s,
            temperature_t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.irradiance_s >= 0.0) || !self.irradiance_s.is_finite() {
            return Err(invalid("irradiance must be finite and >= 0"));
        }
        if !(-40.0..=90.0).contains(&self.temperature_t) {
            return Err(invalid("temperature must lie in [-40, 90] °C"));
        }
        Ok(())
    }
}

/// Single-diode parameters of one module plus its temperature laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleParams {
    /// Photocurrent at STC.
    pub i_pv_ref: f64,
    /// Diode saturation current at STC.
    pub i_o_ref: f64,
    pub ideality_a: f64,
    pub r_s: f64,
    pub r_sh: f64,
    pub n_cells: u32,
    /// Terminal voltage while the bypass diode conducts (negative).
    pub v_bypass: f64,
    /// Effective band gap in the saturation-current temperature law (eV).
    pub band_gap_ev: f64,
    /// Photocurrent temperature coefficient, fraction per °C.
    pub k_i: f64,
    pub rho_mod: f64,
}

impl ModuleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_s >= 0.0) || !(self.r_sh > 0.0) || !(self.i_o_ref > 0.0) {
            return Err(invalid("module needs r_s >= 0, r_sh > 0, i_o_ref > 0"));
        }
        if !(1.0..=2.0).contains(&self.ideality_a) {
            return Err(invalid("ideality must lie in [1, 2]"));
        }
        if !(-1.0..=-0.5).contains(&self.v_bypass) {
            return Err(invalid("v_bypass must lie in [-1.0, -0.5] V"));
        }
        if self.n_cells == 0 || !(self.i_pv_ref >= 0.0) || !self.band_gap_ev.is_finite() {
            return Err(invalid(
                "module needs n_cells > 0, i_pv_ref >= 0, finite band gap",
            ));
        }
        Ok(())
    }

    /// Modified thermal voltage `A·n_cells·k·T/q` at `temperature_t` °C.
    pub fn thermal_voltage(&self, temperature_t: f64) -> f64 {
        self.ideality_a * self.n_cells as f64 * BOLTZMANN * (temperature_t + KELVIN_OFFSET) / ELECTRON_CHARGE
    }

    /// Freezes the temperature and irradiance laws into a fast evaluator.
    pub fn curve(&self, c: ModuleCondition) -> ModuleCurve {
        let tk = c.temperature_t + KELVIN_OFFSET;
        let dt = c.temperature_t - T_REF_C;
        let i_o = self.i_o_ref
            * pow(tk / T_REF_K, 3.0)
            * exp(ELECTRON_CHARGE * self.band_gap_ev / (self.ideality_a * BOLTZMANN)
                * (1.0 / T_REF_K - 1.0 / tk));
        ModuleCurve {
            i_ph: self.i_pv_ref * c.irradiance_s * (1.0 + self.k_i * dt),
            i_o,
            a: self.thermal_voltage(c.temperature_t),
            r_s: self.r_s,
            g_sh: 1.0 / self.r_sh,
            v_bypass: self.v_bypass,
        }
    }

    /// Similarity transform: voltages scale by `kv`, currents by `ki`.
    /// Used to derive differently rated modules of the same technology.
    pub fn scaled(&self, kv: f64, ki: f64, n_cells: u32) -> ModuleParams {
        let cell_ratio = n_cells as f64 / self.n_cells as f64;
        ModuleParams {
            i_pv_ref: self.i_pv_ref * ki,
            i_o_ref: self.i_o_ref * ki,
            ideality_a: self.ideality_a * kv / cell_ratio,
            r_s: self.r_s * kv / ki,
            r_sh: self.r_sh * kv / ki,
            n_cells,
            ..*self
        }
    }
}

/// A module's I-V characteristic at fixed conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleCurve {
    pub i_ph: f64,
    pub i_o: f64,
    /// `A·V_T` in volts.
    pub a: f64,
    pub r_s: f64,
    pub g_sh: f64,
    pub v_bypass: f64,
}

const XTOL: f64 = 1e-14;
const MAX_ITER: usize = 200;

impl ModuleCurve {
    /// Residual of the diode equation at terminal point `(v, i)`.
    pub fn residual(&self, v: f64, i: f64) -> f64 {
        let x = v + self.r_s * i;
        self.i_ph - self.i_o * expm1(x / self.a) - x * self.g_sh - i
    }

    /// Diode-branch current at terminal voltage `v` (no bypass clamp).
    pub fn try_current(&self, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::Domain {
                what: "module voltage",
                value: v,
            });
        }
        if self.r_s == 0.0 {
            return Ok(self.i_ph - self.i_o * expm1(v / self.a) - v * self.g_sh);
        }
        let f = |i: f64| {
            let x = v + self.r_s * i;
            let e = self.i_o * exp(x / self.a);
            (
                self.i_ph - self.i_o * expm1(x / self.a) - x * self.g_sh - i,
                -e * self.r_s / self.a - self.r_s * self.g_sh - 1.0,
            )
        };
        // f is decreasing and concave in i: start on the right of the root.
        let hi = self.i_ph + self.i_o + libm::fmax(-v, 0.0) * self.g_sh + 1.0;
        let mut lo = -1.0;
        let mut n = 0;
        while f(lo).0 <= 0.0 {
            lo = 2.0 * lo - 1.0;
            n += 1;
            if n > 200 {
                return Err(Error::NoConvergence {
                    what: "module current bracket",
                    lo,
                    hi,
                    residual: f(lo).0,
                });
            }
        }
        newton_oriented(f, hi, lo, hi, XTOL, MAX_ITER)
    }

    /// Diode-branch current; infallible for finite `v`.
    pub fn current(&self, v: f64) -> f64 {
        self.try_current(v).unwrap_or(f64::NAN)
    }

    /// Terminal voltage carrying current `i`, clamped at `v_bypass`.
    pub fn voltage(&self, i: f64) -> f64 {
        self.voltage_slope(i).0
    }

    /// Terminal voltage and `dV/dI` at current `i`. The slope is zero while
    /// the bypass diode conducts.
    pub fn voltage_slope(&self, i: f64) -> (f64, f64) {
        let rhs = self.i_ph - i;
        let h = |x: f64| {
            (
                self.i_o * expm1(x / self.a) + x * self.g_sh - rhs,
                self.i_o * exp(x / self.a) / self.a + self.g_sh,
            )
        };
        let x_b = self.v_bypass + self.r_s * i;
        if h(x_b).0 >= 0.0 {
            return (self.v_bypass, 0.0);
        }
        // Junction voltage ignoring the shunt bounds the root from above.
        let x_hi = if rhs > 0.0 {
            self.a * log1p(rhs / self.i_o)
        } else {
            0.0
        };
        let x_hi = libm::fmax(x_hi, x_b);
        let x = newton_oriented(h, x_b, x_hi, x_hi, XTOL, MAX_ITER).unwrap_or(x_hi);
        let v = x - self.r_s * i;
        let e = self.i_o * exp(x / self.a) / self.a + self.g_sh;
        if v <= self.v_bypass {
            (self.v_bypass, 0.0)
        } else {
            (v, -(1.0 + self.r_s * e) / e)
        }
    }

    pub fn v_oc(&self) -> f64 {
        libm::fmax(self.voltage(0.0), 0.0)
    }

    pub fn i_sc(&self) -> f64 {
        self.current(0.0)
    }

    /// Maximum power point `(v, i, p)` by golden-section search.
    pub fn mpp(&self) -> (f64, f64, f64) {
        let voc = self.v_oc();
        if voc <= 0.0 {
            return (0.0, self.i_sc().max(0.0), 0.0);
        }
        let (v, p) = golden_max(|v| v * self.current(v), 0.0, voc, 1e-9 * voc);
        (v, p / v, p)
    }
}

/// Module current at terminal voltage `v` (`v >= v_bypass`).
pub fn module_current(p: &ModuleParams, c: ModuleCondition, v: f64) -> Result<f64> {
    if !(v >= p.v_bypass) {
        return Err(Error::Domain {
            what: "module voltage below bypass clamp",
            value: v,
        });
    }
    p.curve(c).try_current(v)
}

/// Module terminal voltage at current `i >= 0`, clamped by the bypass diode.
pub fn module_voltage(p: &ModuleParams, c: ModuleCondition, i: f64) -> Result<f64> {
    if !(i >= 0.0) || !i.is_finite() {
        return Err(Error::Domain {
            what: "module current",
            value: i,
        });
    }
    Ok(p.curve(c).voltage(i))
}
