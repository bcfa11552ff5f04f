//! File formats, presets, corpus batches and the CLI plumbing around
//! `pvscan-core`.

pub mod corpus;
pub mod output;
pub mod presets;
pub mod scenario_file;

pub use scenario_file::{load_scenario, parse_scenario, LoadError};
