//! Single-diode PV modules composed into series strings (bypass diode per
//! module) and parallel arrays (blocking diode per string).

mod array;
pub mod calibrate;
mod curve;
mod module;

pub use array::{ArraySpec, ModuleIndex, StringModel};
pub use calibrate::{calibrate_module, nd195r1s, CANONICAL_IDEALITY};
pub use curve::{oracle_gmpp, refine_gmpp, sweep_curve, PvCurve, PvSample, TabulatedArray};
pub use module::{
    module_current, module_voltage, ModuleCondition, ModuleCurve, ModuleDatasheet, ModuleParams, BOLTZMANN,
    ELECTRON_CHARGE, KELVIN_OFFSET, T_REF_C,
};
