//! JSON scenario files. Field names carry their units.

use pvscan_core::control::{ControllerConfig, ControllerKind, DetectorConfig};
use pvscan_core::converter::{ConverterParams, DEFAULT_DT};
use pvscan_core::pv::{
    calibrate_module, nd195r1s, ModuleCondition, ModuleDatasheet, ModuleIndex, ModuleParams,
};
use pvscan_core::sim::{NoiseConfig, Scenario, ShadingPattern, TimelineEvent};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: schema error at `{field}`: {message}")]
    Schema {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        source: pvscan_core::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub array: ArrayDto,
    #[serde(default)]
    pub converter: Option<ConverterDto>,
    #[serde(default)]
    pub controller: Option<ControllerDto>,
    #[serde(default = "yes")]
    pub irradiance_correction: bool,
    /// Default `(S, T)` levels for every timeline pattern.
    #[serde(default)]
    pub levels: Vec<LevelDto>,
    pub timeline: Vec<EventDto>,
    pub horizon_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: Option<NoiseDto>,
    #[serde(default)]
    pub initial_v_ref_v: Option<f64>,
    #[serde(default)]
    pub dt_s: Option<f64>,
    #[serde(default)]
    pub sweep_step_v: Option<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayDto {
    pub module: ModuleDto,
    pub n_series: usize,
    pub n_parallel: usize,
    pub sample_module: IndexDto,
}

/// `"ND195R1S"` or a full datasheet (calibrated on load).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModuleDto {
    Named(String),
    Datasheet(DatasheetDto),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasheetDto {
    pub p_max_w: f64,
    pub v_oc_v: f64,
    pub i_sc_a: f64,
    pub v_mpp_v: f64,
    pub i_mpp_a: f64,
    pub pmax_coeff_per_c: f64,
    pub rho_per_c: f64,
    pub n_cells: u32,
    #[serde(default)]
    pub ideality: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexDto {
    pub string: usize,
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterDto {
    pub r_l_ohm: f64,
    pub l_h: f64,
    pub c_pv_f: f64,
    pub v_out_v: f64,
    pub f_sw_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindDto {
    #[default]
    Ramp,
    Po,
}

impl From<KindDto> for ControllerKind {
    fn from(k: KindDto) -> Self {
        match k {
            KindDto::Ramp => ControllerKind::Ramp,
            KindDto::Po => ControllerKind::PerturbObserve,
        }
    }
}

/// Every field optional; missing ones take the controller defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerDto {
    pub kind: Option<KindDto>,
    pub adc_period_s: Option<f64>,
    pub po_period_s: Option<f64>,
    pub po_step_v: Option<f64>,
    pub settle_time_s: Option<f64>,
    pub ramp_rate_v_per_s: Option<f64>,
    pub psi_threshold_per_v: Option<f64>,
    pub dv_arr_threshold: Option<f64>,
    pub dv_mod_threshold: Option<f64>,
    pub power_change_trigger: Option<f64>,
    pub periodic_trigger_s: Option<f64>,
    pub psi_probe_v: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelDto {
    pub irradiance_kw_m2: f64,
    pub temperature_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventDto {
    pub t_s: f64,
    /// Per-string counts over the levels, e.g. `"2-2-1/1-3-1/3-2-0"`.
    pub pattern: String,
    #[serde(default)]
    pub levels: Option<Vec<LevelDto>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDto {
    #[serde(default)]
    pub v_amplitude_v: f64,
    #[serde(default)]
    pub i_amplitude_a: f64,
}

impl From<LevelDto> for ModuleCondition {
    fn from(l: LevelDto) -> Self {
        ModuleCondition::new(l.irradiance_kw_m2, l.temperature_c)
    }
}

pub fn resolve_module(m: &ModuleDto) -> pvscan_core::Result<(ModuleDatasheet, ModuleParams)> {
    match m {
        ModuleDto::Named(name) if name.eq_ignore_ascii_case("ND195R1S") => {
            Ok((ModuleDatasheet::ND195R1S, nd195r1s()))
        }
        ModuleDto::Named(name) => Err(pvscan_core::Error::Validation(format!(
            "unknown module {name:?} (known: ND195R1S)"
        ))),
        ModuleDto::Datasheet(d) => {
            let ds = ModuleDatasheet {
                p_max: d.p_max_w,
                v_oc: d.v_oc_v,
                i_sc: d.i_sc_a,
                v_mpp: d.v_mpp_v,
                i_mpp: d.i_mpp_a,
                pmax_thermal_coeff: d.pmax_coeff_per_c,
                rho_mod: d.rho_per_c,
                n_cells: d.n_cells,
            };
            let a = d.ideality.unwrap_or(pvscan_core::pv::CANONICAL_IDEALITY);
            Ok((ds, calibrate_module(&ds, a)?))
        }
    }
}

impl ScenarioFile {
    /// Resolves into a validated core scenario.
    pub fn into_scenario(self) -> pvscan_core::Result<Scenario> {
        let (datasheet, module) = resolve_module(&self.array.module)?;
        let timeline = self
            .timeline
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let levels: Vec<ModuleCondition> = e
                    .levels
                    .as_ref()
                    .unwrap_or(&self.levels)
                    .iter()
                    .map(|&l| l.into())
                    .collect();
                let pattern = ShadingPattern::parse(&e.pattern, levels)
                    .map_err(|err| pvscan_core::Error::Validation(format!("timeline[{k}].pattern: {err}")))?;
                Ok(TimelineEvent { t: e.t_s, pattern })
            })
            .collect::<pvscan_core::Result<Vec<_>>>()?;
        let mut s = Scenario::new(
            datasheet,
            module,
            self.array.n_series,
            self.array.n_parallel,
            ModuleIndex::new(self.array.sample_module.string, self.array.sample_module.position),
            timeline,
            self.horizon_s,
        );
        if let Some(c) = self.converter {
            s.converter = ConverterParams {
                r_l: c.r_l_ohm,
                l: c.l_h,
                c_pv: c.c_pv_f,
                v_out: c.v_out_v,
                f_sw: c.f_sw_hz,
            };
        }
        s.controller = controller_config(&self.controller.unwrap_or_default());
        s.irradiance_correction = self.irradiance_correction;
        s.seed = self.seed;
        if let Some(n) = self.noise {
            s.noise = NoiseConfig {
                v_amplitude: n.v_amplitude_v,
                i_amplitude: n.i_amplitude_a,
            };
        }
        s.initial_v_ref = self.initial_v_ref_v;
        s.dt = self.dt_s.unwrap_or(DEFAULT_DT);
        if let Some(v) = self.sweep_step_v {
            s.sweep_step = v;
        }
        s.validate()?;
        Ok(s)
    }
}

pub fn controller_config(c: &ControllerDto) -> ControllerConfig {
    let d = ControllerConfig::default();
    let dd = DetectorConfig::default();
    ControllerConfig {
        kind: c.kind.map_or(d.kind, Into::into),
        adc_period: c.adc_period_s.unwrap_or(d.adc_period),
        po_period: c.po_period_s.unwrap_or(d.po_period),
        po_step: c.po_step_v.unwrap_or(d.po_step),
        settle_time: c.settle_time_s.unwrap_or(d.settle_time),
        ramp_rate: c.ramp_rate_v_per_s.unwrap_or(d.ramp_rate),
        detector: DetectorConfig {
            psi_threshold: c.psi_threshold_per_v.unwrap_or(dd.psi_threshold),
            dv_arr_threshold: c.dv_arr_threshold.unwrap_or(dd.dv_arr_threshold),
            dv_mod_threshold: c.dv_mod_threshold.unwrap_or(dd.dv_mod_threshold),
            power_change_trigger: c.power_change_trigger.unwrap_or(dd.power_change_trigger),
            periodic_trigger: c.periodic_trigger_s.unwrap_or(dd.periodic_trigger),
            psi_probe_dv: c.psi_probe_v.or(dd.psi_probe_dv),
        },
        ..d
    }
}

/// Parses scenario JSON; `origin` only labels diagnostics.
pub fn parse_scenario(json: &str, origin: &Path) -> Result<Scenario, LoadError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| LoadError::Schema {
        path: origin.to_path_buf(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    file.into_scenario().map_err(|source| LoadError::Invalid {
        path: origin.to_path_buf(),
        source,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PSC1: &str = r#"{
        "array": {"module": "ND195R1S", "n_series": 5, "n_parallel": 3,
                  "sample_module": {"string": 0, "position": 3}},
        "levels": [{"irradiance_kw_m2": 0.9, "temperature_c": 35},
                   {"irradiance_kw_m2": 0.6, "temperature_c": 30},
                   {"irradiance_kw_m2": 0.3, "temperature_c": 25}],
        "timeline": [{"t_s": 0, "pattern": "2-2-1/1-3-1/3-2-0"}],
        "horizon_s": 0.5
    }"#;

    fn parse(s: &str) -> Result<Scenario, LoadError> {
        parse_scenario(s, Path::new("test.json"))
    }

    #[test]
    fn reference_scenario_file_resolves() {
        let s = parse(PSC1).unwrap();
        assert_eq!((s.n_series, s.n_parallel), (5, 3));
        assert_eq!(s.timeline[0].pattern.notation(), "2-2-1/1-3-1/3-2-0");
        assert_eq!(s.controller, ControllerConfig::default());
        assert_eq!(s.converter, ConverterParams::REFERENCE);
    }

    #[test]
    fn empty_timeline_rejected() {
        let j = PSC1.replace(r#"[{"t_s": 0, "pattern": "2-2-1/1-3-1/3-2-0"}]"#, "[]");
        assert!(matches!(parse(&j), Err(LoadError::Invalid { .. })));
    }

    #[test]
    fn bad_counts_rejected() {
        let j = PSC1.replace("2-2-1/1-3-1", "2-2-2/1-3-1");
        let e = parse(&j).unwrap_err().to_string();
        assert!(e.contains("string 0"), "{e}");
    }

    #[test]
    fn schema_error_names_the_field() {
        let j = PSC1.replace(r#""n_series": 5"#, r#""n_series": "five""#);
        match parse(&j) {
            Err(LoadError::Schema { field, .. }) => assert_eq!(field, "array.n_series"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_module_rejected() {
        let j = PSC1.replace("ND195R1S", "XYZ");
        assert!(matches!(parse(&j), Err(LoadError::Invalid { .. })));
    }
}
