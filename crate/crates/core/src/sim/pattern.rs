use crate::error::{invalid, Result};
use crate::pv::ModuleCondition;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Per-string module counts over a list of `(S, T)` levels, written like
/// `2-2-1/1-3-1/3-2-0` (strings separated by `/`, counts by `-`).
#[derive(Debug, Clone, PartialEq)]
pub struct ShadingPattern {
    pub levels: Vec<ModuleCondition>,
    /// `counts[string][level]`.
    pub counts: Vec<Vec<u32>>,
}

impl ShadingPattern {
    pub fn new(levels: Vec<ModuleCondition>, counts: Vec<Vec<u32>>) -> Result<Self> {
        let p = ShadingPattern { levels, counts };
        p.check_shape()?;
        Ok(p)
    }

    pub fn parse(notation: &str, levels: Vec<ModuleCondition>) -> Result<Self> {
        let counts = notation
            .trim()
            .split('/')
            .map(|s| {
                s.trim()
                    .split('-')
                    .map(|c| {
                        c.trim()
                            .parse::<u32>()
                            .map_err(|_| invalid(format!("bad count {c:?} in pattern {notation:?}")))
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels, counts)
    }

    /// Every module at the same condition.
    pub fn uniform(c: ModuleCondition, n_series: usize, n_parallel: usize) -> Self {
        ShadingPattern {
            levels: alloc::vec![c],
            counts: alloc::vec![alloc::vec![n_series as u32]; n_parallel],
        }
    }

    fn check_shape(&self) -> Result<()> {
        if self.levels.is_empty() || self.counts.is_empty() {
            return Err(invalid("pattern needs at least one level and one string"));
        }
        for c in &self.levels {
            c.validate()?;
        }
        if self.counts.iter().any(|s| s.len() != self.levels.len()) {
            return Err(invalid(format!(
                "every string needs one count per level ({} levels)",
                self.levels.len()
            )));
        }
        Ok(())
    }

    pub fn n_parallel(&self) -> usize {
        self.counts.len()
    }

    /// Checks the pattern fits an `n_series × n_parallel` array.
    pub fn validate(&self, n_series: usize, n_parallel: usize) -> Result<()> {
        self.check_shape()?;
        if self.counts.len() != n_parallel {
            return Err(invalid(format!(
                "pattern has {} strings, array has {n_parallel}",
                self.counts.len()
            )));
        }
        for (k, s) in self.counts.iter().enumerate() {
            let total: u32 = s.iter().sum();
            if total as usize != n_series {
                return Err(invalid(format!(
                    "string {k} counts sum to {total}, expected {n_series}"
                )));
            }
        }
        Ok(())
    }

    /// String-major module conditions; within a string the levels fill
    /// positions front to back in declared order.
    pub fn expand(&self, n_series: usize) -> Result<Vec<ModuleCondition>> {
        self.validate(n_series, self.counts.len())?;
        let mut out = Vec::with_capacity(n_series * self.counts.len());
        for s in &self.counts {
            for (lvl, &n) in self.levels.iter().zip(s) {
                out.extend(core::iter::repeat_n(*lvl, n as usize));
            }
        }
        Ok(out)
    }

    pub fn notation(&self) -> String {
        let strings: Vec<String> = self
            .counts
            .iter()
            .map(|s| s.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join("-"))
            .collect();
        strings.join("/")
    }
}
