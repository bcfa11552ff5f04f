use super::pattern::ShadingPattern;
use crate::control::{ControllerConfig, IrradianceCorrection, ReferenceModel};
use crate::converter::{ConverterParams, DEFAULT_DT, MAX_DT};
use crate::error::{invalid, Result};
use crate::pv::{ArraySpec, ModuleDatasheet, ModuleIndex, ModuleParams};
use alloc::format;
use alloc::vec::Vec;

/// Zero-mean uniform measurement noise (half-widths).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseConfig {
    pub v_amplitude: f64,
    pub i_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEvent {
    pub t: f64,
    pub pattern: ShadingPattern,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Rated values the controller knows.
    pub datasheet: ModuleDatasheet,
    /// Model of the modules actually installed.
    pub module: ModuleParams,
    pub n_series: usize,
    pub n_parallel: usize,
    pub sample_module: ModuleIndex,
    pub converter: ConverterParams,
    pub controller: ControllerConfig,
    pub irradiance_correction: bool,
    pub timeline: Vec<TimelineEvent>,
    pub horizon: f64,
    pub noise: NoiseConfig,
    pub seed: u64,
    /// Initial command; defaults to the temperature-updated array reference.
    pub initial_v_ref: Option<f64>,
    /// Plant integration step.
    pub dt: f64,
    /// Voltage resolution of the per-event I-V table and oracle sweep.
    pub sweep_step: f64,
}

impl Scenario {
    /// A scenario with default converter/controller settings.
    pub fn new(
        datasheet: ModuleDatasheet,
        module: ModuleParams,
        n_series: usize,
        n_parallel: usize,
        sample_module: ModuleIndex,
        timeline: Vec<TimelineEvent>,
        horizon: f64,
    ) -> Self {
        Scenario {
            datasheet,
            module,
            n_series,
            n_parallel,
            sample_module,
            converter: ConverterParams::REFERENCE,
            controller: ControllerConfig::default(),
            irradiance_correction: true,
            timeline,
            horizon,
            noise: NoiseConfig::default(),
            seed: 0,
            initial_v_ref: None,
            dt: DEFAULT_DT,
            sweep_step: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.datasheet.validate()?;
        self.module.validate()?;
        self.converter.validate()?;
        self.controller.validate()?;
        if self.n_series == 0 || self.n_parallel == 0 {
            return Err(invalid("array needs n_series > 0 and n_parallel > 0"));
        }
        if self.sample_module.string >= self.n_parallel || self.sample_module.position >= self.n_series {
            return Err(invalid("sample module index outside the array"));
        }
        let first = self
            .timeline
            .first()
            .ok_or_else(|| invalid("timeline is empty"))?;
        if first.t != 0.0 {
            return Err(invalid("first timeline event must be at t = 0"));
        }
        for w in self.timeline.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(invalid("timeline events must be strictly time-sorted"));
            }
        }
        let last = self.timeline.last().map_or(0.0, |e| e.t);
        if !(self.horizon.is_finite() && self.horizon > last) {
            return Err(invalid("horizon must be finite and after the last event"));
        }
        for (k, e) in self.timeline.iter().enumerate() {
            e.pattern
                .validate(self.n_series, self.n_parallel)
                .map_err(|err| invalid(format!("timeline[{k}]: {err}")))?;
        }
        let n = [self.noise.v_amplitude, self.noise.i_amplitude];
        if n.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("noise amplitudes must be finite and non-negative"));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT && self.dt <= self.controller.adc_period) {
            return Err(invalid(
                "integration step must be in (0, 20 µs] and below the ADC period",
            ));
        }
        if !(self.sweep_step > 0.0 && self.sweep_step <= 0.05) {
            return Err(invalid("sweep step must be in (0, 0.05] V"));
        }
        if let Some(v) = self.initial_v_ref {
            if !(v >= 0.0 && v <= self.converter.v_out) {
                return Err(invalid("initial command outside [0, v_out]"));
            }
        }
        Ok(())
    }

    /// The controller's reference model, with the irradiance correction
    /// characterized from the installed module if enabled.
    pub fn references(&self) -> ReferenceModel {
        let r = ReferenceModel::from_datasheet(&self.datasheet, self.n_series, self.n_parallel);
        if self.irradiance_correction {
            let c = IrradianceCorrection::characterize(&self.module, &r, self.n_parallel);
            r.with_correction(c)
        } else {
            r
        }
    }

    pub fn array_at(&self, event: usize) -> Result<ArraySpec> {
        let e = &self.timeline[event];
        ArraySpec::new(
            self.module,
            self.n_series,
            self.n_parallel,
            e.pattern.expand(self.n_series)?,
            self.sample_module,
        )
    }
}
