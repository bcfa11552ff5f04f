//! Controller side: references, shading detector, P&O and ramp scan.

mod controller;
pub mod detector;
mod po;
pub mod reference;
pub mod scan;

pub use controller::{
    Command, Controller, ControllerConfig, ControllerEvent, ControllerKind, DetectionOutcome, Measurement,
    Trigger,
};
pub use detector::{assess, compute_psi, detect_psc, psi_probe, Assessment, Criteria, DetectorConfig};
pub use po::PerturbObserve;
pub use reference::{update_references, IrradianceCorrection, ReferenceModel};
pub use scan::{Best, PhaseEnd, Scan, ScanPhase, ScanStep};
