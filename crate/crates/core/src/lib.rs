//! Shaped microwave control pulses for inhomogeneous ensembles of two-level
//! defects with hyperfine structure.
//!
//! The crate is `no_std` (it needs `alloc`) and purely numerical. File formats,
//! configuration and the command line live in the companion `nvpulse-tools`
//! package (library and binary `nvpulse`).
//!
//! # Units
//!
//! Every quantity in this crate uses one consistent unit system:
//!
//! * time in microseconds (µs),
//! * cyclic frequencies (detunings, hyperfine splitting, Rabi frequencies and
//!   the control amplitudes `a_jk`) in MHz,
//! * angular frequencies (envelopes `I(t)`, `Q(t)`, Floquet frequency) in
//!   rad/µs, i.e. `2π × MHz`,
//! * photophysical rates in 1/µs.
//!
//! The only exception is [`analysis::SensitivityInputs`], which takes SI values
//! because the shot-noise formula is conventionally written in them.
//!
//! # Layout
//!
//! * [`spin`], [`pulse`], [`hamiltonian`]: the rotating-frame model.
//! * [`floquet`]: truncated Floquet-matrix propagators and their exact gradient.
//! * [`oracle`]: an independent time-stepping propagator used for verification
//!   and for multi-tone flat drives.
//! * [`magnus`]: a fourth-order Magnus integrator with an adjoint gradient, the
//!   fast engine for large ensemble sweeps.
//! * [`fidelity`], [`ensemble`], [`optimize`]: the weighted-ensemble objective
//!   and the penalized gradient-ascent loop.
//! * [`analysis`]: fidelity maps, flat-pulse baselines, ODMR curves, sensitivity.
//! * [`photophysics`]: five-level optical pumping model under a Gaussian beam.
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod fidelity;
pub mod floquet;
pub mod hamiltonian;
pub mod linalg;
pub mod magnus;
pub mod optimize;
pub mod oracle;
pub mod photophysics;
pub mod pulse;
pub mod spin;

pub use error::{Error, Result};

/// `2π`, used to convert MHz to rad/µs.
pub const TWO_PI: f64 = core::f64::consts::TAU;
