use super::module::{ModuleCondition, ModuleCurve, ModuleParams};
use crate::error::{invalid, Result};
use crate::solve::newton_oriented;
use alloc::format;
use alloc::vec::Vec;

/// Grid position of one module: `string` in `0..n_parallel`,
/// `position` in `0..n_series`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ModuleIndex {
    pub string: usize,
    pub position: usize,
}

impl ModuleIndex {
    pub const fn new(string: usize, position: usize) -> Self {
        ModuleIndex { string, position }
    }
}

/// One series string, with identical modules grouped.
#[derive(Debug, Clone)]
pub struct StringModel {
    groups: Vec<(ModuleCurve, u32)>,
    v_oc: f64,
    i_max: f64,
}

impl StringModel {
    pub fn new(curves: impl IntoIterator<Item = ModuleCurve>) -> Self {
        let mut groups: Vec<(ModuleCurve, u32)> = Vec::new();
        for c in curves {
            match groups.iter_mut().find(|(g, _)| *g == c) {
                Some((_, n)) => *n += 1,
                None => groups.push((c, 1)),
            }
        }
        let v_oc = groups.iter().map(|(c, n)| *n as f64 * c.v_oc()).sum::<f64>();
        let i_max = groups.iter().map(|(c, _)| c.i_sc()).fold(0.0, f64::max);
        StringModel {
            groups,
            v_oc: v_oc.max(0.0),
            i_max: i_max * (1.0 + 1e-12) + 1e-12,
        }
    }

    /// Sum of module voltages at string current `i`, and its slope.
    pub fn voltage_slope(&self, i: f64) -> (f64, f64) {
        self.groups.iter().fold((0.0, 0.0), |(v, d), (c, n)| {
            let (mv, md) = c.voltage_slope(i);
            (v + *n as f64 * mv, d + *n as f64 * md)
        })
    }

    pub fn v_oc(&self) -> f64 {
        self.v_oc
    }

    pub fn current(&self, v: f64) -> f64 {
        self.current_from(v, f64::NAN)
    }

    /// String current at voltage `v >= 0`, warm-started from `guess`.
    ///
    /// The blocking diode forces zero current at and above the string's
    /// open-circuit voltage.
    pub fn current_from(&self, v: f64, guess: f64) -> f64 {
        if v >= self.v_oc || self.i_max <= 1e-12 {
            return 0.0;
        }
        let v = v.max(0.0);
        // Sum of module voltages is non-increasing in i; at i_max every module
        // sits at or below zero volts, so [0, i_max] brackets the root.
        let r = newton_oriented(
            |i| {
                let (sv, sd) = self.voltage_slope(i);
                (sv - v, sd)
            },
            self.i_max,
            0.0,
            if guess.is_finite() {
                guess
            } else {
                0.5 * self.i_max
            },
            1e-14,
            400,
        );
        match r {
            Ok(i) => i.clamp(0.0, self.i_max),
            // Only reachable for degenerate flat stretches; fall back to a
            // bracketed midpoint search which cannot fail.
            Err(_) => crate::solve::bisect(|i| self.voltage_slope(i).0 - v, 0.0, self.i_max, 1e-13, 400)
                .unwrap_or(0.0),
        }
    }
}

/// `n_parallel` strings of `n_series` modules with per-module conditions.
#[derive(Debug, Clone)]
pub struct ArraySpec {
    n_series: usize,
    n_parallel: usize,
    module: ModuleParams,
    conditions: Vec<ModuleCondition>,
    overrides: Vec<(ModuleIndex, ModuleParams)>,
    sample_module: ModuleIndex,
    strings: Vec<StringModel>,
}

impl ArraySpec {
    /// `conditions` is string-major: entry `s·n_series + k` is string `s`,
    /// position `k`.
    pub fn new(
        module: ModuleParams,
        n_series: usize,
        n_parallel: usize,
        conditions: Vec<ModuleCondition>,
        sample_module: ModuleIndex,
    ) -> Result<Self> {
        Self::with_overrides(
            module,
            n_series,
            n_parallel,
            conditions,
            sample_module,
            Vec::new(),
        )
    }

    /// Like [`ArraySpec::new`] with some positions using different modules
    /// (aged or mixed types).
    pub fn with_overrides(
        module: ModuleParams,
        n_series: usize,
        n_parallel: usize,
        conditions: Vec<ModuleCondition>,
        sample_module: ModuleIndex,
        overrides: Vec<(ModuleIndex, ModuleParams)>,
    ) -> Result<Self> {
        if n_series == 0 || n_parallel == 0 {
            return Err(invalid("array needs n_series > 0 and n_parallel > 0"));
        }
        if conditions.len() != n_series * n_parallel {
            return Err(invalid(format!(
                "conditions grid has {} entries, expected {}",
                conditions.len(),
                n_series * n_parallel
            )));
        }
        let in_grid = |ix: &ModuleIndex| ix.string < n_parallel && ix.position < n_series;
        if !in_grid(&sample_module) {
            return Err(invalid("sample module index outside the array"));
        }
        module.validate()?;
        for (ix, p) in &overrides {
            if !in_grid(ix) {
                return Err(invalid("override index outside the array"));
            }
            p.validate()?;
        }
        for c in &conditions {
            c.validate()?;
        }
        let mut spec = ArraySpec {
            n_series,
            n_parallel,
            module,
            conditions,
            overrides,
            sample_module,
            strings: Vec::new(),
        };
        spec.strings = (0..n_parallel)
            .map(|s| StringModel::new((0..n_series).map(|k| spec.module_curve(ModuleIndex::new(s, k)))))
            .collect();
        Ok(spec)
    }

    pub fn uniform(
        module: ModuleParams,
        n_series: usize,
        n_parallel: usize,
        condition: ModuleCondition,
    ) -> Result<Self> {
        Self::new(
            module,
            n_series,
            n_parallel,
            alloc::vec![condition; n_series * n_parallel],
            ModuleIndex::default(),
        )
    }

    pub fn n_series(&self) -> usize {
        self.n_series
    }
    pub fn n_parallel(&self) -> usize {
        self.n_parallel
    }
    pub fn module(&self) -> &ModuleParams {
        &self.module
    }
    pub fn conditions(&self) -> &[ModuleCondition] {
        &self.conditions
    }
    pub fn sample_module(&self) -> ModuleIndex {
        self.sample_module
    }
    pub fn strings(&self) -> &[StringModel] {
        &self.strings
    }

    pub fn condition(&self, ix: ModuleIndex) -> ModuleCondition {
        self.conditions[ix.string * self.n_series + ix.position]
    }

    pub fn params_at(&self, ix: ModuleIndex) -> &ModuleParams {
        self.overrides
            .iter()
            .find(|(o, _)| *o == ix)
            .map(|(_, p)| p)
            .unwrap_or(&self.module)
    }

    pub fn module_curve(&self, ix: ModuleIndex) -> ModuleCurve {
        self.params_at(ix).curve(self.condition(ix))
    }

    pub fn sample_condition(&self) -> ModuleCondition {
        self.condition(self.sample_module)
    }

    pub fn string_current(&self, string_idx: usize, v: f64) -> f64 {
        self.strings[string_idx].current(v)
    }

    pub fn array_current(&self, v: f64) -> f64 {
        self.strings.iter().map(|s| s.current(v)).sum()
    }

    /// Array current with per-string warm starts (updated in place).
    pub fn array_current_from(&self, v: f64, guesses: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for (s, g) in self.strings.iter().zip(guesses.iter_mut()) {
            *g = s.current_from(v, *g);
            total += *g;
        }
        total
    }

    pub fn string_open_circuit_voltage(&self, string_idx: usize) -> f64 {
        self.strings[string_idx].v_oc()
    }

    pub fn open_circuit_voltage(&self) -> f64 {
        self.strings.iter().map(|s| s.v_oc()).fold(0.0, f64::max)
    }

    /// Terminal voltage of module `ix` while the array sits at `v`.
    pub fn module_voltage_at(&self, ix: ModuleIndex, v: f64) -> f64 {
        let i = self.string_current(ix.string, v);
        self.module_curve(ix).voltage(i)
    }

    pub fn sample_module_voltage(&self, v: f64) -> f64 {
        self.module_voltage_at(self.sample_module, v)
    }
}
