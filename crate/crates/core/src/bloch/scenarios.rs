//! Canned pulse protocols on top of [`evolve_ensemble`](super::evolve_ensemble).

use std::f64::consts::{LN_2, PI};

use super::{
    evolve_ensemble, footprint, EnsembleSpec, Integration, Mode, PulseRole, PulseSequence, SecondTransition,
};
use crate::error::{Error, Result};
use crate::spectro::{build_pulse, PulseEnvelope, PulseSpec, Trace};
use crate::C64;

/// Pulse pair for a two-pulse photon echo.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoPulses {
    pub input: PulseSpec,
    pub refocus: PulseSpec,
    pub dt_us: f64,
    /// Integration continues this long after the echo window.
    pub tail_us: f64,
}

/// Peak Rabi frequency giving a Gaussian pulse of intensity FWHM `fwhm_us`
/// the area `area`.
pub fn gaussian_peak_for_area(fwhm_us: f64, area: f64) -> f64 {
    area / (fwhm_us * (PI / (2.0 * LN_2)).sqrt())
}

impl EchoPulses {
    /// π/2 then π Gaussian pulses of equal width.
    pub fn gaussian(fwhm_us: f64, dt_us: f64) -> Self {
        EchoPulses {
            input: PulseSpec::gaussian(fwhm_us, gaussian_peak_for_area(fwhm_us, 0.5 * PI)).with_sample_period(dt_us),
            refocus: PulseSpec::gaussian(fwhm_us, gaussian_peak_for_area(fwhm_us, PI)).with_sample_period(dt_us),
            dt_us,
            tail_us: 0.5,
        }
    }

    pub fn with_refocus_area(mut self, area: f64) -> Self {
        self.refocus.peak_rabi = gaussian_peak_for_area(self.refocus.width_us, area);
        self
    }

    /// The sequence and integration span used by [`two_pulse_echo`].
    pub fn sequence(&self, tau_us: f64) -> Result<(PulseSequence, Integration)> {
        if !(tau_us > 0.0) {
            return Err(Error::invalid("tau_us", "must be positive"));
        }
        let input = build_pulse(&self.input)?;
        let refocus = build_pulse(&self.refocus)?;
        let half = footprint(&input).1;
        let mut seq = PulseSequence::new();
        seq.push_centred(0.0, input, PulseRole::Input)?;
        seq.push_centred(tau_us, refocus, PulseRole::Refocus)?;
        Ok((seq, Integration::until(2.0 * tau_us + half + self.tail_us, self.dt_us)))
    }
}

/// Input pulse centred at zero and refocusing pulse centred at `tau_us`;
/// the echo forms near `2τ`.
pub fn two_pulse_echo(spec: &EnsembleSpec, tau_us: f64, pulses: &EchoPulses) -> Result<Trace> {
    let (seq, integ) = pulses.sequence(tau_us)?;
    evolve_ensemble(spec, &seq, Mode::TwoLevel, &integ)
}

/// Square-pulse nutation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NutationParams {
    pub duration_us: f64,
    pub dt_us: f64,
    /// Probe detuning from the second transition, the ground splitting (MHz).
    pub beat_offset_mhz: f64,
    /// Population left in the second ground state by imperfect pumping.
    pub beat_population: f64,
    pub beat_relative_dipole: f64,
}

impl Default for NutationParams {
    fn default() -> Self {
        NutationParams {
            duration_us: 2.0,
            dt_us: 0.002,
            beat_offset_mhz: 10.2,
            beat_population: 0.1,
            beat_relative_dipole: 1.0,
        }
    }
}

/// Transmitted intensity of a square pulse of Rabi frequency `rabi` through
/// the ensemble's feature rescaled to peak OD `feature_od`. With
/// `include_beat` the feature ions keep some population in a second ground
/// state whose transition to the same excited state the probe also drives.
pub fn optical_nutation(
    spec: &EnsembleSpec,
    rabi: f64,
    feature_od: f64,
    include_beat: bool,
    params: &NutationParams,
) -> Result<Trace> {
    spec.validate()?;
    if !(feature_od >= 0.0) {
        return Err(Error::invalid("feature_od", "must be >= 0"));
    }
    if !(params.duration_us > 0.0) {
        return Err(Error::invalid("duration_us", "must be positive"));
    }
    let mut spec = spec.clone();
    let w_max = spec.optical_weights.iter().copied().fold(0.0, f64::max);
    spec.od_sum = if w_max > 0.0 { feature_od / w_max } else { 0.0 };
    let mode = if include_beat {
        spec.second_transition = Some(SecondTransition {
            offset_mhz: params.beat_offset_mhz,
            relative_dipole: params.beat_relative_dipole,
            population: params.beat_population,
        });
        Mode::Lambda
    } else {
        spec.second_transition = None;
        Mode::TwoLevel
    };
    let pulse = build_pulse(&PulseSpec::square(params.duration_us, rabi).with_sample_period(params.dt_us))?;
    let mut seq = PulseSequence::new();
    seq.push(0.0, pulse, PulseRole::Probe)?;
    let integ = Integration::until(params.duration_us, params.dt_us);
    evolve_ensemble(&spec, &seq, mode, &integ)
}

/// Control-pulse timing for spin-wave storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinWaveProtocol {
    /// AFC storage time `1/Δ` (µs).
    pub afc_delay_us: f64,
    pub control: PulseEnvelope,
    /// Centre of the first control pulse (µs after the input centre).
    pub first_control_us: f64,
    /// Spin storage time between the two control pulses.
    pub t_s_us: f64,
    pub dt_us: f64,
    pub tail_us: f64,
}

impl SpinWaveProtocol {
    /// Expected spin-wave echo time relative to the input centre.
    pub fn echo_time_us(&self) -> f64 {
        self.afc_delay_us + self.t_s_us
    }

    /// The sequence and integration span used by [`spin_wave_storage`].
    /// Controls may not overlap the input or the AFC echo window.
    pub fn sequence(&self, input: &PulseEnvelope) -> Result<(PulseSequence, Integration)> {
        if !(self.t_s_us > 0.0 && self.afc_delay_us > 0.0) {
            return Err(Error::invalid("t_s_us", "storage times must be positive"));
        }
        let (ia, ib) = footprint(input);
        let (ca, cb) = footprint(&self.control);
        let c1 = (self.first_control_us + ca, self.first_control_us + cb);
        let c2 = (c1.0 + self.t_s_us, c1.1 + self.t_s_us);
        let afc = (self.afc_delay_us + ia, self.afc_delay_us + ib);
        let overlap = |a: (f64, f64), b: (f64, f64)| a.0 < b.1 && b.0 < a.1;
        if c1.0 < ib {
            return Err(Error::Overlap { what: "first control".into(), other: "input window".into() });
        }
        if c1.1 > afc.0 {
            return Err(Error::Overlap { what: "first control".into(), other: "AFC echo window".into() });
        }
        if overlap(c2, afc) {
            return Err(Error::Overlap { what: "second control".into(), other: "AFC echo window".into() });
        }
        let mut seq = PulseSequence::new();
        seq.push_centred(0.0, input.clone(), PulseRole::Input)?;
        seq.push_centred(self.first_control_us, self.control.clone(), PulseRole::Control)?;
        seq.push_centred(self.first_control_us + self.t_s_us, self.control.clone(), PulseRole::Control)?;
        Ok((seq, Integration::until(self.echo_time_us() + ib + self.tail_us, self.dt_us)))
    }
}

/// Input centred at zero, then two identical control pulses `T_s` apart.
/// The spin-wave echo forms at `1/Δ + T_s`.
pub fn spin_wave_storage(spec: &EnsembleSpec, input: &PulseEnvelope, proto: &SpinWaveProtocol) -> Result<Trace> {
    let (seq, integ) = proto.sequence(input)?;
    evolve_ensemble(spec, &seq, Mode::Lambda, &integ)
}

/// The free input field sampled on the time grid of `like`.
pub fn input_reference(input: &PulseEnvelope, centre_us: f64, like: &Trace) -> Trace {
    let (a, b) = footprint(input);
    let start = centre_us - 0.5 * (a + b);
    let field: Vec<C64> = like.times().map(|t| input.at(t - start)).collect();
    Trace::from_field(like.t_start_us, like.dt_us, field)
}
