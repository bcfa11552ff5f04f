//! Closed-loop simulation: shading patterns, scenarios and the runner.

mod pattern;
mod runner;
mod scenario;

pub use pattern::ShadingPattern;
pub use runner::{
    mode_ticks, run_closed_loop, EventPlant, EventReport, PruneCheck, RunOutput, RunReport,
    SampleModuleTable, FINAL_POWER_WINDOW, SAMPLE_TABLE_STEP,
};
pub use scenario::{NoiseConfig, Scenario, TimelineEvent};
