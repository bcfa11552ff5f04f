use crate::error::{invalid, Result};
use crate::pv::{ModuleCondition, ModuleDatasheet, ModuleParams};
use alloc::vec::Vec;

/// Rated quantities the controller knows about its array.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    pub v_mpp_arr_sc: f64,
    pub v_mpp_mod_sc: f64,
    pub rho_arr: f64,
    pub rho_mod: f64,
    pub v_oc_arr_rated: f64,
    /// Array short-circuit current at STC.
    pub i_sc_rated: f64,
    /// Array MPP current at STC.
    pub i_mpp_arr_rated: f64,
    /// Optional irradiance correction of the temperature-updated references.
    pub correction: Option<IrradianceCorrection>,
}

impl ReferenceModel {
    /// References of a homogeneous `n_series × n_parallel` array.
    pub fn from_datasheet(ds: &ModuleDatasheet, n_series: usize, n_parallel: usize) -> Self {
        let (ns, np) = (n_series as f64, n_parallel as f64);
        ReferenceModel {
            v_mpp_arr_sc: ns * ds.v_mpp,
            v_mpp_mod_sc: ds.v_mpp,
            rho_arr: ds.rho_mod,
            rho_mod: ds.rho_mod,
            v_oc_arr_rated: ns * ds.v_oc,
            i_sc_rated: np * ds.i_sc,
            i_mpp_arr_rated: np * ds.i_mpp,
            correction: None,
        }
    }

    pub fn with_correction(mut self, c: IrradianceCorrection) -> Self {
        self.correction = Some(c);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.v_mpp_arr_sc,
            self.v_mpp_mod_sc,
            self.v_oc_arr_rated,
            self.i_sc_rated,
            self.i_mpp_arr_rated,
        ];
        if pos.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(invalid("reference voltages/currents must be positive"));
        }
        if !(self.rho_arr <= 0.0 && self.rho_mod <= 0.0) {
            return Err(invalid("rho values must be negative (or zero)"));
        }
        Ok(())
    }

    /// Temperature update of `(V_mpp-arr, V_mpp-mod)`. Both fall as the
    /// sample module heats up, whatever sign convention ρ is quoted in.
    pub fn update(&self, t_sample: f64) -> (f64, f64) {
        let dt = t_sample - 25.0;
        (
            self.v_mpp_arr_sc * (1.0 - libm::fabs(self.rho_arr) * dt),
            self.v_mpp_mod_sc * (1.0 - libm::fabs(self.rho_mod) * dt),
        )
    }

    /// Temperature update followed by the irradiance correction, given the
    /// array current measured at (or near) the reference voltage.
    pub fn corrected(&self, t_sample: f64, i_arr: f64) -> (f64, f64) {
        let (va, vm) = self.update(t_sample);
        match &self.correction {
            Some(c) => {
                let k = c.factor(i_arr / self.i_mpp_arr_rated, t_sample);
                (va * k, vm * k)
            }
            None => (va, vm),
        }
    }
}

/// Free-function form of [`ReferenceModel::update`].
pub fn update_references(r: &ReferenceModel, t_sample: f64) -> (f64, f64) {
    r.update(t_sample)
}

/// `V_mpp(S, T) / V_mpp-ref(T)` tabulated against the normalized MPP
/// current `I_mpp(S, T)`, one row per temperature.
///
/// Under uniform irradiance the current near the MPP is a monotone proxy
/// for irradiance. Indexing by the MPP current makes the true MPP a fixed
/// point: re-measuring at the corrected reference and correcting again
/// converges on it (each pass shrinks the error ~15×) without an irradiance
/// sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct IrradianceCorrection {
    temps: Vec<f64>,
    rows: Vec<Vec<(f64, f64)>>,
}

pub const CORRECTION_TEMPS: [f64; 9] = [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0];
pub const CORRECTION_IRRADIANCES: [f64; 14] = [
    0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2,
];

impl IrradianceCorrection {
    /// Builds the table from the module model the array is made of.
    pub fn characterize(module: &ModuleParams, refs: &ReferenceModel, n_parallel: usize) -> Self {
        let i_mpp_mod = refs.i_mpp_arr_rated / n_parallel as f64;
        let rows = CORRECTION_TEMPS
            .iter()
            .map(|&t| {
                let (_, v_ref) = refs.update(t);
                CORRECTION_IRRADIANCES
                    .iter()
                    .map(|&s| {
                        let (v, i, _) = module.curve(ModuleCondition::new(s, t)).mpp();
                        (i / i_mpp_mod, v / v_ref)
                    })
                    .collect()
            })
            .collect();
        IrradianceCorrection {
            temps: CORRECTION_TEMPS.to_vec(),
            rows,
        }
    }

    pub fn factor(&self, x: f64, t: f64) -> f64 {
        let n = self.temps.len();
        let t = t.clamp(self.temps[0], self.temps[n - 1]);
        let j = self.temps.partition_point(|&tt| tt <= t).clamp(1, n - 1) - 1;
        let w = (t - self.temps[j]) / (self.temps[j + 1] - self.temps[j]);
        (1.0 - w) * interp(&self.rows[j], x) + w * interp(&self.rows[j + 1], x)
    }
}

fn interp(row: &[(f64, f64)], x: f64) -> f64 {
    let n = row.len();
    if x <= row[0].0 {
        return row[0].1;
    }
    if x >= row[n - 1].0 {
        return row[n - 1].1;
    }
    let k = row.partition_point(|p| p.0 <= x).clamp(1, n - 1);
    let (a, b) = (row[k - 1], row[k]);
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pv::nd195r1s;

    fn refs() -> ReferenceModel {
        ReferenceModel::from_datasheet(&ModuleDatasheet::ND195R1S, 5, 3)
    }

    #[test]
    fn stc_reference_is_rated() {
        let (va, vm) = refs().update(25.0);
        assert!((va - 118.0).abs() < 1e-12);
        assert!((vm - 23.6).abs() < 1e-12);
    }

    #[test]
    fn hotter_means_lower_reference() {
        let (_, vm) = refs().update(35.0);
        assert!((vm - 23.6 * (1.0 - 0.0329)).abs() < 1e-9);
        assert!((vm - 22.82).abs() < 0.01);
    }

    #[test]
    fn zero_rho_is_temperature_independent() {
        let mut r = refs();
        r.rho_arr = 0.0;
        r.rho_mod = 0.0;
        assert_eq!(r.update(70.0), r.update(-10.0));
    }

    #[test]
    fn correction_recovers_true_mpp_voltage() {
        let p = nd195r1s();
        let r = refs();
        let c = IrradianceCorrection::characterize(&p, &r, 3);
        let r = r.with_correction(c);
        for (s, t) in [(0.1, 60.0), (0.35, 12.0), (0.8, 47.0), (1.0, 25.0)] {
            let m = p.curve(ModuleCondition::new(s, t));
            let (_, mut vm) = r.update(t);
            for _ in 0..3 {
                vm = r.corrected(t, 3.0 * m.current(vm)).1;
            }
            assert!((vm - m.mpp().0).abs() < 0.003 * vm, "{s} {t}");
        }
    }
}
