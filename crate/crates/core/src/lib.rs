//! Desk-scale simulation and analysis of rare-earth atomic frequency comb
//! (AFC) memories.
//!
//! Units used throughout the crate:
//!
//! * frequencies and detunings in MHz (cyclic),
//! * times in µs,
//! * Rabi frequencies and decay rates in rad/µs,
//! * optical depths are dimensionless (field attenuation `exp(-OD/2)`).
//!
//! Complex field envelopes follow the `exp(-iωt)` convention: a spectral
//! component at detuning `ν` evolves as `exp(-2πiνt)` and is resonant with
//! ions whose transition sits `ν` MHz above the carrier.
//!
//! Module map:
//!
//! * [`spectro`]: level scheme, grids, spectral profiles, class populations,
//!   pulses and traces.
//! * [`pumping`]: rate-equation hole burning over the nine ion classes.
//! * [`linear`]: weak-pulse propagation with causal dispersion.
//! * [`bloch`]: Maxwell–Bloch ensemble integration (two-level and Λ).
//! * [`beam`]: Gaussian beam and waveguide mode geometry.
//! * [`analysis`]: decay fits, nutation Rabi extraction, efficiency algebra.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod beam;
pub mod bloch;
pub mod error;
pub mod linear;
mod numeric;
pub mod pumping;
pub mod spectro;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
