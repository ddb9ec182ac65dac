//! Passivity analysis of power-system elements under the dissipating energy
//! flow (DEF) transformation, together with a forced-oscillation infinite-bus
//! simulator and the time-domain DEF integrals used to check it.
//!
//! The crate is organised bottom-up:
//!
//! - [`element`]: impedance, constant-power and classical-generator models and
//!   their 2×2 rectangular frequency response functions (FRFs).
//! - [`passivity`]: the DEF passivity transform, the Hermitian matrix `K(Ω)`,
//!   closed-form eigenanalysis and element classification.
//! - [`def`]: numerical differentiation and cumulative dissipating-energy traces
//!   from sampled voltages and currents.
//! - [`sim`]: the oscillating infinite bus driving a generator, an impedance
//!   load and a constant-power load.
//! - [`config`] and [`cli`]: scenario files, CSV formats and the `deflab`
//!   subcommands.
//!
//! Sign convention: current is positive flowing *into* an element and a
//! passive (non-source) element accumulates positive dissipating energy.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod def;
pub mod element;
mod error;
pub mod mat2;
pub mod passivity;
pub mod sim;

pub use error::{Error, Result};
pub use mat2::Mat2;
pub use num_complex::Complex64;

/// Converts a frequency in Hz to rad/s.
pub fn hz_to_rad(f_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_hz
}

/// Converts a frequency in rad/s to Hz.
pub fn rad_to_hz(omega: f64) -> f64 {
    omega / (2.0 * std::f64::consts::PI)
}
