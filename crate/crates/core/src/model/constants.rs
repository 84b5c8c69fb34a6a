//! Fixed constants of the built-in oscillator model (version 1).
//!
//! Changing any value here changes every downstream result; bump
//! [`OSCILLATOR_VERSION`] when doing so.

pub const OSCILLATOR_VERSION: u32 = 1;

/// Samples per trajectory (`T + 1`).
pub const SAMPLES: usize = 256;
/// Seconds per sample.
pub const DT: f64 = 1.0 / 30.0;

pub const DIM_A: usize = 2;
pub const DIM_E: usize = 4;
pub const DIM_THETA: usize = 9;
pub const N_REQUIREMENTS: usize = 3;

pub const A_LO: [f64; DIM_A] = [0.0, 0.0];
pub const A_HI: [f64; DIM_A] = [1.0, 1.0];
pub const E_LO: [f64; DIM_E] = [0.0, 0.0, 0.0, 0.0];
pub const E_HI: [f64; DIM_E] = [2.0, 2.0, 2.0, 2.0];

/// Largest possible `|y(t)|`: `max e1 + (0.3 + max a2) * max e3`.
pub const AMPLITUDE_BOUND: f64 = 2.0 + 1.3 * 2.0;

pub const THETA_BASELINE: [f64; DIM_THETA] = [1.2, 1.0, 1.4, 0.5, 2.0, 0.6, 1.0, 0.5, 2.5];
