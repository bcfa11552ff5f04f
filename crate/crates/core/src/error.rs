use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    Domain { what: &'static str, value: f64 },
    /// A root finder ran out of iterations or lost its bracket.
    NoConvergence {
        what: &'static str,
        lo: f64,
        hi: f64,
        residual: f64,
    },
    /// The datasheet fit finished but misses its post-conditions.
    ///
    /// Residuals, in order: `I(0)/Isc - 1`, `I(Voc)/Isc`, `P(Vmpp)/Pmax - 1`,
    /// `dP/dV(Vmpp)·Vmpp/Pmax`, Vmpp temperature coefficient error (1/°C).
    Calibration { residuals: [f64; 5] },
    /// Structurally invalid input (bad datasheet, pattern, scenario...).
    Validation(String),
    /// Input is valid but carries no information (e.g. a dark array).
    Degenerate(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::NoConvergence {
                what,
                lo,
                hi,
                residual,
            } => write!(
                f,
                "{what} did not converge in [{lo}, {hi}] (residual {residual:e})"
            ),
            Error::Calibration { residuals } => {
                write!(f, "calibration missed its targets, residuals {residuals:?}")
            }
            Error::Validation(msg) => write!(f, "invalid input: {msg}"),
            Error::Degenerate(what) => write!(f, "degenerate input: {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
