//! Ramp scan of the P-V characteristic with upper/lower pruning bounds.

/// Best sample of a scan episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Best {
    pub v_e: f64,
    pub p_e: f64,
    /// Current at the best sample.
    pub i_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanPhase {
    Up,
    Down,
}

/// Why a phase ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseEnd {
    /// Reached the voltage limit of the phase.
    Limit,
    /// Stopped early because the rest of the phase cannot beat `p_e`.
    Pruned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanStep {
    Continue,
    /// Up phase over, reverse the ramp.
    Reverse(PhaseEnd),
    /// Down phase over, go to the best point.
    Done(PhaseEnd),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scan {
    pub phase: ScanPhase,
    pub best: Best,
    /// Top of the search region (rated array open-circuit voltage).
    pub v_top: f64,
    /// Bottom of the search region (updated module MPP voltage).
    pub v_floor: f64,
    /// Upper bound on array current used by the down-phase bound.
    pub i_sc_bound: f64,
}

impl Scan {
    /// Starts an episode at the sample `(v, i)`.
    pub fn begin(v: f64, i: f64, v_top: f64, v_floor: f64, i_sc_bound: f64) -> Self {
        Scan {
            phase: ScanPhase::Up,
            best: Best {
                v_e: v,
                p_e: v * i,
                i_e: i,
            },
            v_top,
            v_floor,
            i_sc_bound,
        }
    }

    pub fn direction(&self) -> f64 {
        match self.phase {
            ScanPhase::Up => 1.0,
            ScanPhase::Down => -1.0,
        }
    }

    /// Feeds one ADC sample.
    pub fn observe(&mut self, v: f64, i: f64) -> ScanStep {
        let p = v * i;
        if p > self.best.p_e {
            self.best = Best {
                v_e: v,
                p_e: p,
                i_e: i,
            };
        }
        match self.phase {
            ScanPhase::Up => {
                // Current only falls with voltage, so nothing above v can
                // deliver more than v_top·i.
                let end = if v >= self.v_top {
                    Some(PhaseEnd::Limit)
                } else if self.v_top * i < self.best.p_e {
                    Some(PhaseEnd::Pruned)
                } else {
                    None
                };
                match end {
                    Some(e) => {
                        self.phase = ScanPhase::Down;
                        ScanStep::Reverse(e)
                    }
                    None => ScanStep::Continue,
                }
            }
            ScanPhase::Down => {
                if v <= self.v_floor {
                    ScanStep::Done(PhaseEnd::Limit)
                } else if v * self.i_sc_bound < self.best.p_e {
                    ScanStep::Done(PhaseEnd::Pruned)
                } else {
                    ScanStep::Continue
                }
            }
        }
    }
}
