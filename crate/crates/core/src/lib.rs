//! Steady-state nuclear polarisation under a periodically reset electron spin.
//!
//! The electron is driven into a two-level dressed frame, evolves jointly with
//! up to three nuclear spins for one reset period, and is then re-initialised.
//! Iterating that cycle defines a quantum channel on the nuclei whose fixed
//! point carries sharp polarisation reversals near `ωₙ = 2πk/t_reset`.
//!
//! Modules, bottom-up:
//! - [`numerics`]: dense complex matrices, exponentials, partial trace.
//! - [`model`]: system and drive specifications, Hamiltonian.
//! - [`channel`]: one-cycle channel (unitary and Lindblad variants).
//! - [`steady`]: fixed point, spectral gap, observables.
//! - [`analytics`]: closed-form predictions and a second-order channel.
//! - [`sweep`]: parameter sweeps and spectral feature extraction.
//! - [`experiments`]: packaged scenarios.
//! - [`estimator`]: coupling recovery from a spectrum.
//! - [`io`]: configuration, CSV and SVG.

pub mod analytics;
pub mod channel;
pub mod estimator;
pub mod experiments;
pub mod io;
pub mod model;
pub mod numerics;
pub mod steady;
pub mod sweep;

/// 2π, for converting linear frequencies (Hz) to angular (rad/s).
pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Angular frequency (rad/s) from a linear one (Hz).
pub fn hz(f: f64) -> f64 {
    TWO_PI * f
}

/// Linear frequency (Hz) from an angular one (rad/s).
pub fn to_hz(w: f64) -> f64 {
    w / TWO_PI
}
