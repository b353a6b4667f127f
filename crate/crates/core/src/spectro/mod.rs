//! Domain types: level scheme, detuning grids, spectral profiles, ion-class
//! populations, pulse envelopes and traces.

pub mod csv;
mod populations;
mod profile;
mod pulse;
mod scheme;
mod trace;

pub use populations::{ClassPopulations, PreparationHistory};
pub use profile::{CombShape, DetuningGrid, PitShape, SpectralProfile};
pub use pulse::{build_pulse, PulseEnvelope, PulseKind, PulseSpec, GAUSSIAN_SUPPORT_FWHM};
pub use scheme::{
    class_offsets, transition_table, GroundRoles, IonClass, LevelScheme, REFERENCE_CLASS,
};
pub use trace::Trace;

/// Default sampling period of time grids (µs).
pub const DEFAULT_SAMPLE_PERIOD_US: f64 = 0.002;
