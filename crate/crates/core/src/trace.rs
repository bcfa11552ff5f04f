use core::fmt;

/// Controller mode recorded in each trace row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Plain command playback, no controller in the loop.
    OpenLoop,
    PerturbObserve,
    DetectSettle,
    DetectProbe,
    ScanUp,
    ScanDown,
    SettleToBest,
}

impl Mode {
    pub const fn as_str(self) -> &'static str {
        match self {
            Mode::OpenLoop => "OPEN_LOOP",
            Mode::PerturbObserve => "PO",
            Mode::DetectSettle => "DETECT_SETTLE",
            Mode::DetectProbe => "DETECT_PROBE",
            Mode::ScanUp => "SCAN_UP",
            Mode::ScanDown => "SCAN_DOWN",
            Mode::SettleToBest => "SETTLE_TO_BEST",
        }
    }

    pub fn is_scan(self) -> bool {
        matches!(self, Mode::ScanUp | Mode::ScanDown)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sampling instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub v_ref: f64,
    pub duty: f64,
    pub v_pv: f64,
    pub i_pv: f64,
    pub p: f64,
    pub mode: Mode,
    /// Best power of the current scan episode (0 outside scans).
    pub p_e: f64,
    pub v_e: f64,
}
