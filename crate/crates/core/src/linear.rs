//! Weak-pulse propagation through an absorption profile treated as a linear
//! spectral filter `H(ν) = exp(−d(ν)/2 + iφ(ν))` with the causal phase `φ`.
//!
//! With the `exp(−2πiνt)` convention, causality makes `ln H` analytic in the
//! upper half plane, so `φ = −𝓗[d/2]` where `𝓗` is the Hilbert transform
//! `𝓗[u](ν) = (1/π) P∫ u(ν')/(ν − ν') dν'`.

use crate::error::{Error, Result};
use crate::numeric::{fft_forward, fft_inverse, interp_uniform, signed_index};
use crate::spectro::{DetuningGrid, PulseEnvelope, SpectralProfile, Trace};
use crate::C64;

pub const PAD_FACTOR: usize = 4;
/// Fraction of the grid, on each side, blended to the edge baseline.
pub const TAPER_FRACTION: f64 = 0.05;
/// Largest tolerated spectral energy fraction of a pulse outside the grid.
pub const MAX_OUT_OF_BAND: f64 = 1e-6;
/// Echo and reference windows span this many input FWHMs.
pub const WINDOW_FWHMS: f64 = 3.0;

/// Causal phase on the profile's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KkPhase {
    pub grid: DetuningGrid,
    pub phase: Vec<f64>,
    /// Non-fatal conditions, e.g. a profile that is not flat near the edges.
    pub warnings: Vec<String>,
}

impl KkPhase {
    /// Phase at `f`, zero off the grid.
    pub fn at(&self, f: f64) -> f64 {
        if !self.grid.contains(f) {
            return 0.0;
        }
        interp_uniform(&self.phase, self.grid.start_mhz, self.grid.step_mhz, f)
    }
}

fn edge_warnings(profile: &SpectralProfile) -> Vec<String> {
    let n = profile.len();
    let m = ((n as f64 * TAPER_FRACTION) as usize).max(1);
    let scale = profile.max_od().max(1.0);
    let mut out = Vec::new();
    for (side, range, edge) in [("lower", 0..m, profile.od[0]), ("upper", n - m..n, profile.od[n - 1])] {
        let dev = profile.od[range].iter().map(|v| (v - edge).abs()).fold(0.0, f64::max);
        if dev > 1e-2 * scale {
            out.push(format!(
                "profile varies by {dev:.3} OD within the {side} {:.0}% of the grid; phase may wrap",
                100.0 * TAPER_FRACTION
            ));
        }
    }
    out
}

/// Kramers–Kronig phase of a profile, via an FFT Hilbert transform on a
/// zero-padded, edge-tapered copy.
pub fn kk_phase(profile: &SpectralProfile) -> KkPhase {
    let n = profile.len();
    let warnings = edge_warnings(profile);
    let baseline = 0.5 * (profile.od[0] + profile.od[n - 1]);
    let m = (n as f64 * TAPER_FRACTION) as usize;
    let taper = |i: usize| -> f64 {
        let j = i.min(n - 1 - i);
        if j >= m {
            1.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * j as f64 / m as f64).cos())
        }
    };
    let len = PAD_FACTOR * n;
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for (i, od) in profile.od.iter().enumerate() {
        buf[i] = C64::new(0.5 * (od - baseline) * taper(i), 0.0);
    }
    fft_forward(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let s = signed_index(k, len);
        *v *= if s > 0 && 2 * k != len {
            C64::new(0.0, -1.0)
        } else if s < 0 {
            C64::new(0.0, 1.0)
        } else {
            C64::new(0.0, 0.0)
        };
    }
    fft_inverse(&mut buf);
    let phase = buf[..n].iter().map(|v| -v.re / len as f64).collect();
    KkPhase {
        grid: profile.grid.clone(),
        phase,
        warnings,
    }
}

/// Time-domain layout of a propagation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub t_start_us: f64,
    pub dt_us: f64,
    pub len: usize,
    /// Index of the first input sample.
    pub pulse_offset: usize,
}

impl Window {
    /// Window of length `1/step` (so transform bins line up with the
    /// profile grid), at least ten pulse durations, with 5% pre-roll.
    pub fn for_pulse(pulse: &PulseEnvelope, grid: &DetuningGrid) -> Window {
        let dt = pulse.sample_period_us;
        let duration = pulse.samples.len() as f64 * dt;
        let span = (1.0 / grid.step_mhz).max(10.0 * duration);
        let len = (span / dt).round() as usize;
        let pulse_offset = (0.05 * len as f64).round() as usize;
        Window {
            t_start_us: pulse.t_first_us - pulse_offset as f64 * dt,
            dt_us: dt,
            len: len.max(pulse_offset + pulse.samples.len()),
            pulse_offset,
        }
    }

    pub fn frequency(&self, k: usize) -> f64 {
        signed_index(k, self.len) as f64 / (self.len as f64 * self.dt_us)
    }
}

/// Spectrum `Ẽ(ν_k)` with `E(t) = Σ_k Ẽ_k exp(−2πiν_k t)` over the window.
pub fn input_spectrum(pulse: &PulseEnvelope, window: &Window) -> Vec<C64> {
    let mut buf = vec![C64::new(0.0, 0.0); window.len];
    buf[window.pulse_offset..window.pulse_offset + pulse.samples.len()].copy_from_slice(&pulse.samples);
    fft_inverse(&mut buf);
    let norm = 1.0 / window.len as f64;
    buf.iter_mut().for_each(|v| *v *= norm);
    buf
}

/// Fraction of a pulse's spectral energy outside the grid.
pub fn out_of_band_fraction(spectrum: &[C64], window: &Window, grid: &DetuningGrid) -> f64 {
    let (mut inside, mut outside) = (0.0, 0.0);
    for (k, v) in spectrum.iter().enumerate() {
        if grid.contains(window.frequency(k)) {
            inside += v.norm_sqr();
        } else {
            outside += v.norm_sqr();
        }
    }
    let total = inside + outside;
    if total == 0.0 {
        0.0
    } else {
        outside / total
    }
}

/// Propagate a weak pulse through `profile`; returns the complex output
/// field (Rabi units) on the run window.
pub fn propagate_linear(pulse: &PulseEnvelope, profile: &SpectralProfile) -> Result<Trace> {
    if pulse.samples.is_empty() {
        return Err(Error::invalid("pulse", "no samples"));
    }
    let window = Window::for_pulse(pulse, &profile.grid);
    let mut spec = input_spectrum(pulse, &window);
    let outside = out_of_band_fraction(&spec, &window, &profile.grid);
    if outside > MAX_OUT_OF_BAND {
        return Err(Error::BandwidthExceedsGrid {
            outside_fraction: outside,
            half_span_mhz: profile.grid.half_span_mhz(),
        });
    }
    let phase = kk_phase(profile);
    let g = &profile.grid;
    for (k, v) in spec.iter_mut().enumerate() {
        let f = window.frequency(k);
        let d = interp_uniform(&profile.od, g.start_mhz, g.step_mhz, f);
        *v *= C64::from_polar((-0.5 * d).exp(), phase.at(f));
    }
    fft_forward(&mut spec);
    Ok(Trace::from_field(window.t_start_us, window.dt_us, spec))
}

/// Efficiency figures of an AFC echo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoMetrics {
    /// Echo-window energy over the reference pulse-window energy.
    pub eta_afc: f64,
    /// Intensity centroid of the echo window (µs); `None` if dark.
    pub echo_time_us: Option<f64>,
    /// Intensity centroid of the transmitted pulse (µs).
    pub transmitted_time_us: Option<f64>,
    /// Pulse-window energy of the output over that of the reference.
    pub transmitted_fraction: f64,
    /// The echo window holds no interior local maximum.
    pub no_echo: bool,
}

/// Compare an AFC output with the same input sent through the bare window.
pub fn echo_metrics(output: &Trace, reference: &Trace, expected_time_us: f64, input_fwhm_us: f64) -> Result<EchoMetrics> {
    if output.len() != reference.len()
        || (output.t_start_us - reference.t_start_us).abs() > 1e-9 * output.dt_us.max(1.0)
        || (output.dt_us - reference.dt_us).abs() > 1e-12 * output.dt_us
    {
        return Err(Error::invalid("reference", "traces must share the time grid"));
    }
    if !(input_fwhm_us > 0.0) {
        return Err(Error::invalid("input_fwhm_us", "must be positive"));
    }
    let width = WINDOW_FWHMS * input_fwhm_us;
    let reference_energy = reference.energy_in(0.0, width);
    if reference_energy <= 0.0 {
        return Err(Error::invalid("reference", "dark reference window"));
    }
    let r = output.window(expected_time_us, width);
    let no_echo = r.len() < 3 || {
        let seg = &output.intensity[r.clone()];
        let imax = seg
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        imax == 0 || imax == seg.len() - 1 || seg[imax] <= 0.0
    };
    Ok(EchoMetrics {
        eta_afc: output.energy_in(expected_time_us, width) / reference_energy,
        echo_time_us: output.centroid_in(expected_time_us, width),
        transmitted_time_us: output.centroid_in(0.0, width),
        transmitted_fraction: output.energy_in(0.0, width) / reference_energy,
        no_echo,
    })
}

impl EchoMetrics {
    /// Echo centroid measured from the transmitted pulse centroid.
    pub fn storage_time_us(&self) -> Option<f64> {
        Some(self.echo_time_us? - self.transmitted_time_us?)
    }
}
