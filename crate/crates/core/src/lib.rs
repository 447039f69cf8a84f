//! Simulation and statistics for silicon-microring time-bin entangled photon-pair sources.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the whole physics and statistics
//! chain: the resonance comb and drop-port spectra ([`resonator`]), SFWM channel pairs
//! and pair rates under single- and double-port pumping ([`pairgen`]), the time-bin
//! state and its 2x4 AMZI measurement ([`timebin`]), lossy jittered detection with
//! coincidence histograms ([`detection`]), sinusoidal fringe fitting ([`analysis`]),
//! and the analytic chain used to calibrate source parameters ([`calibration`]).
//!
//! Scenario descriptions and the per-trial pipeline live in [`scenario`] and
//! [`experiment`]; file formats and the command-line front end are in the companion
//! `ringpair` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod calibration;
pub mod detection;
pub mod diag;
pub mod error;
pub mod experiment;
pub mod pairgen;
pub mod resonator;
pub mod sampling;
pub mod scenario;
pub mod timebin;

pub use error::{Error, FitError, Result};

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;

/// Power transmission of a loss given in dB.
#[inline]
pub fn db_to_transmission(loss_db: f64) -> f64 {
    libm::pow(10.0, -loss_db / 10.0)
}
