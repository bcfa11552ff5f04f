//! PV array model, averaged boost converter and a partial-shading aware
//! ramp-scan MPPT controller.
//!
//! Everything here is `no_std` (with `alloc`) and pure: no IO, no clocks,
//! no global state. The `pvscan` crate adds scenario files, traces and a CLI.
//!
//! Layout:
//! - [`pv`]: single-diode modules, series strings with bypass diodes,
//!   parallel arrays with blocking diodes, P-V sweeps and the brute-force
//!   GMPP oracle.
//! - [`converter`]: averaged boost converter plant integrated with RK4.
//! - [`control`]: reference update, shading detector, P&O, ramp scan and
//!   the sampled-time controller that ties them together.
//! - [`sim`]: closed-loop runner coupling controller, converter and array.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod control;
pub mod converter;
pub mod error;
pub mod pv;
pub mod sim;
pub mod solve;
pub mod trace;

pub use error::{Error, Result};
