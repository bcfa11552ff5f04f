//! The 3×5 ND195R1S test array with its three shading levels and five
//! named patterns.

use pvscan_core::control::{ControllerKind, IrradianceCorrection, ReferenceModel};
use pvscan_core::pv::{nd195r1s, ArraySpec, ModuleCondition, ModuleDatasheet, ModuleIndex};
use pvscan_core::sim::{Scenario, ShadingPattern, TimelineEvent};

pub const N_SERIES: usize = 5;
pub const N_PARALLEL: usize = 3;
pub const SAMPLE_MODULE: ModuleIndex = ModuleIndex::new(0, 3);

pub const PATTERNS: [(&str, &str); 5] = [
    ("PSC1", "2-2-1/1-3-1/3-2-0"),
    ("PSC2", "5-0-0/3-1-1/3-2-0"),
    ("PSC3", "0-1-4/0-0-5/1-1-3"),
    ("PSC4", "1-1-3/1-1-3/1-0-4"),
    ("PSC5", "1-1-3/5-0-0/4-0-1"),
];

pub fn levels() -> Vec<ModuleCondition> {
    vec![
        ModuleCondition::new(0.9, 35.0),
        ModuleCondition::new(0.6, 30.0),
        ModuleCondition::new(0.3, 25.0),
    ]
}

/// Looks up `PSC1`..`PSC5` by name, or parses a pattern string.
pub fn pattern(name_or_notation: &str) -> pvscan_core::Result<ShadingPattern> {
    let notation = PATTERNS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name_or_notation))
        .map_or(name_or_notation, |(_, p)| p);
    ShadingPattern::parse(notation, levels())
}

pub fn array(p: &ShadingPattern) -> pvscan_core::Result<ArraySpec> {
    ArraySpec::new(
        nd195r1s(),
        N_SERIES,
        N_PARALLEL,
        p.expand(N_SERIES)?,
        SAMPLE_MODULE,
    )
}

pub fn references(irradiance_correction: bool) -> ReferenceModel {
    let r = ReferenceModel::from_datasheet(&ModuleDatasheet::ND195R1S, N_SERIES, N_PARALLEL);
    if irradiance_correction {
        let c = IrradianceCorrection::characterize(&nd195r1s(), &r, N_PARALLEL);
        r.with_correction(c)
    } else {
        r
    }
}

/// Uniform (0.9 kW/m², 35 °C) until `t_onset`, then `p`.
pub fn onset_scenario(p: ShadingPattern, t_onset: f64, horizon: f64, kind: ControllerKind) -> Scenario {
    let mut s = Scenario::new(
        ModuleDatasheet::ND195R1S,
        nd195r1s(),
        N_SERIES,
        N_PARALLEL,
        SAMPLE_MODULE,
        vec![
            TimelineEvent {
                t: 0.0,
                pattern: ShadingPattern::uniform(levels()[0], N_SERIES, N_PARALLEL),
            },
            TimelineEvent {
                t: t_onset,
                pattern: p,
            },
        ],
        horizon,
    );
    s.controller.kind = kind;
    s
}
