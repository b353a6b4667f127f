use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::C64;

/// Minimum samples per cycle of the instantaneous frequency.
pub const MIN_SAMPLES_PER_CYCLE: f64 = 8.0;

/// Gaussian envelopes are sampled over ±this many FWHM around the centre.
pub const GAUSSIAN_SUPPORT_FWHM: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    Gaussian,
    Square,
    ChirpedGaussian,
}

impl PulseKind {
    pub fn name(self) -> &'static str {
        match self {
            PulseKind::Gaussian => "gaussian",
            PulseKind::Square => "square",
            PulseKind::ChirpedGaussian => "chirped-gaussian",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(PulseKind::Gaussian),
            "square" => Some(PulseKind::Square),
            "chirped-gaussian" | "chirped" => Some(PulseKind::ChirpedGaussian),
            _ => None,
        }
    }
}

/// Parameters for [`build_pulse`].
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub kind: PulseKind,
    /// Intensity FWHM for Gaussian shapes, duration for square pulses (µs).
    pub width_us: f64,
    /// Peak Rabi frequency (rad/µs).
    pub peak_rabi: f64,
    pub carrier_mhz: f64,
    /// Total instantaneous-frequency sweep between the half-maximum points.
    pub chirp_mhz: f64,
    pub sample_period_us: f64,
}

impl PulseSpec {
    pub fn gaussian(fwhm_us: f64, peak_rabi: f64) -> Self {
        PulseSpec {
            kind: PulseKind::Gaussian,
            width_us: fwhm_us,
            peak_rabi,
            carrier_mhz: 0.0,
            chirp_mhz: 0.0,
            sample_period_us: 0.002,
        }
    }

    pub fn square(duration_us: f64, peak_rabi: f64) -> Self {
        PulseSpec {
            kind: PulseKind::Square,
            ..Self::gaussian(duration_us, peak_rabi)
        }
    }

    pub fn chirped(fwhm_us: f64, peak_rabi: f64, chirp_mhz: f64) -> Self {
        PulseSpec {
            kind: PulseKind::ChirpedGaussian,
            chirp_mhz,
            ..Self::gaussian(fwhm_us, peak_rabi)
        }
    }

    pub fn with_sample_period(mut self, dt_us: f64) -> Self {
        self.sample_period_us = dt_us;
        self
    }

    pub fn with_carrier(mut self, carrier_mhz: f64) -> Self {
        self.carrier_mhz = carrier_mhz;
        self
    }
}

/// Sampled complex Rabi envelope.
///
/// Sample `k` sits at local time `t_first_us + k·dt`. Local time zero is the
/// pulse centre for Gaussian shapes and the leading edge for square pulses.
/// Carrier detuning and chirp are already folded into the sample phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseEnvelope {
    pub kind: PulseKind,
    pub sample_period_us: f64,
    pub t_first_us: f64,
    pub samples: Vec<C64>,
    pub carrier_mhz: f64,
    /// Intensity FWHM (Gaussian) or duration (square).
    pub width_us: f64,
    pub chirp_mhz: f64,
    pub peak_rabi: f64,
}

impl PulseEnvelope {
    /// Local time window `[start, end)` covered by the envelope.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            PulseKind::Square => (0.0, self.width_us),
            _ => (
                self.t_first_us,
                self.t_first_us + (self.samples.len() - 1) as f64 * self.sample_period_us,
            ),
        }
    }

    /// Field at local time `t`: sample-and-hold for square pulses, linear
    /// interpolation otherwise; zero outside the support.
    pub fn at(&self, t: f64) -> C64 {
        let (a, b) = self.support();
        match self.kind {
            PulseKind::Square => {
                if t < a || t >= b {
                    return C64::new(0.0, 0.0);
                }
                let k = ((t / self.sample_period_us).floor() as usize).min(self.samples.len() - 1);
                self.samples[k]
            }
            _ => {
                if t < a || t > b {
                    return C64::new(0.0, 0.0);
                }
                let u = (t - self.t_first_us) / self.sample_period_us;
                let k = (u.floor() as usize).min(self.samples.len() - 1);
                let frac = u - k as f64;
                if k + 1 >= self.samples.len() || frac == 0.0 {
                    self.samples[k]
                } else {
                    self.samples[k] * (1.0 - frac) + self.samples[k + 1] * frac
                }
            }
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_first_us + k as f64 * self.sample_period_us
    }

    /// `Σ|Ω|²·dt` in rad²/µs.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * self.sample_period_us
    }

    /// Pulse area `∫|Ω| dt` (rad). Exact for square pulses.
    pub fn area(&self) -> f64 {
        match self.kind {
            PulseKind::Square => {
                let dt = self.sample_period_us;
                let n = self.samples.len();
                self.samples
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let seg = if k + 1 == n {
                            self.width_us - k as f64 * dt
                        } else {
                            dt
                        };
                        s.norm() * seg
                    })
                    .sum()
            }
            _ => self.samples.iter().map(|s| s.norm()).sum::<f64>() * self.sample_period_us,
        }
    }

    /// FWHM of `|Ω|²` measured from the samples with linear interpolation of
    /// the half-maximum crossings.
    pub fn measured_fwhm_us(&self) -> f64 {
        let inten: Vec<f64> = self.samples.iter().map(|s| s.norm_sqr()).collect();
        let peak = inten.iter().copied().fold(0.0, f64::max);
        let half = 0.5 * peak;
        let first = inten.iter().position(|&v| v >= half).unwrap_or(0);
        let last = inten.iter().rposition(|&v| v >= half).unwrap_or(0);
        let cross = |i0: usize, i1: usize| {
            let (a, b) = (inten[i0], inten[i1]);
            let frac = if a == b { 0.0 } else { (half - a) / (b - a) };
            self.time(i0) + frac * (self.time(i1) - self.time(i0))
        };
        let left = if first == 0 { self.time(0) } else { cross(first - 1, first) };
        let right = if last + 1 >= inten.len() {
            self.time(last)
        } else {
            cross(last, last + 1)
        };
        right - left
    }

    /// Discrete instantaneous frequency (MHz) between consecutive samples,
    /// `-(arg s[k+1] - arg s[k]) / (2π dt)`, located at the midpoints.
    pub fn instantaneous_frequency(&self) -> Vec<(f64, f64)> {
        self.samples
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let dphi = (w[1] * w[0].conj()).arg();
                (
                    self.time(k) + 0.5 * self.sample_period_us,
                    -dphi / (2.0 * PI * self.sample_period_us),
                )
            })
            .collect()
    }
}

/// Build a sampled pulse envelope.
pub fn build_pulse(spec: &PulseSpec) -> Result<PulseEnvelope> {
    let dt = spec.sample_period_us;
    if !(spec.width_us > 0.0 && spec.width_us.is_finite()) {
        return Err(Error::invalid("width_us", "pulse duration must be positive"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("sample_period_us", "must be positive"));
    }
    if !spec.peak_rabi.is_finite() || spec.peak_rabi < 0.0 {
        return Err(Error::invalid("peak_rabi", "must be finite and >= 0"));
    }
    let chirp = if spec.kind == PulseKind::ChirpedGaussian {
        spec.chirp_mhz
    } else {
        0.0
    };
    // Linear sweep: f(t) = carrier + rate·t, spanning `chirp` across the FWHM.
    let rate = chirp / spec.width_us;
    let half_support = match spec.kind {
        PulseKind::Square => spec.width_us,
        _ => GAUSSIAN_SUPPORT_FWHM * spec.width_us,
    };
    let max_freq = spec.carrier_mhz.abs() + rate.abs() * half_support;
    if max_freq > 0.0 && dt > 1.0 / (MIN_SAMPLES_PER_CYCLE * max_freq) * (1.0 + 1e-12) {
        let max_period = 1.0 / (MIN_SAMPLES_PER_CYCLE * max_freq);
        return Err(Error::UndersampledChirp {
            max_freq_mhz: max_freq,
            max_period_ns: max_period * 1e3,
            required_rate_msps: MIN_SAMPLES_PER_CYCLE * max_freq,
        });
    }
    let phase = |t: f64| -2.0 * PI * (spec.carrier_mhz * t + 0.5 * rate * t * t);

    let (t_first, samples) = match spec.kind {
        PulseKind::Square => {
            let n = ((spec.width_us / dt).ceil() as usize).max(1);
            let s = (0..n)
                .map(|k| C64::from_polar(spec.peak_rabi, phase(k as f64 * dt)))
                .collect();
            (0.0, s)
        }
        PulseKind::Gaussian | PulseKind::ChirpedGaussian => {
            let k_max = (half_support / dt).ceil() as i64;
            let a = 2.0 * LN_2 / (spec.width_us * spec.width_us);
            let s = (-k_max..=k_max)
                .map(|k| {
                    let t = k as f64 * dt;
                    C64::from_polar(spec.peak_rabi * (-a * t * t).exp(), phase(t))
                })
                .collect();
            (-(k_max as f64) * dt, s)
        }
    };
    Ok(PulseEnvelope {
        kind: spec.kind,
        sample_period_us: dt,
        t_first_us: t_first,
        samples,
        carrier_mhz: spec.carrier_mhz,
        width_us: spec.width_us,
        chirp_mhz: chirp,
        peak_rabi: spec.peak_rabi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PI: f64 = 2.0 * PI;

    #[test]
    fn gaussian_fwhm_matches_within_one_sample() {
        let p = build_pulse(&PulseSpec::gaussian(0.345, TWO_PI)).unwrap();
        assert!((p.measured_fwhm_us() - 0.345).abs() <= p.sample_period_us);
        let peak = p.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        assert!((peak - TWO_PI).abs() < 1e-12);
    }

    #[test]
    fn square_area_is_rabi_times_duration() {
        for (dur, om) in [(0.5, 3.0), (0.3333, 7.1), (1.0, PI)] {
            let p = build_pulse(&PulseSpec::square(dur, om)).unwrap();
            assert!((p.area() - om * dur).abs() < 1e-12, "{dur} {om}");
        }
    }

    #[test]
    fn chirp_spans_requested_band_between_half_maxima() {
        let p = build_pulse(&PulseSpec::chirped(0.5, 4.0, 1.5)).unwrap();
        let f = p.instantaneous_frequency();
        let near = |t0: f64| {
            f.iter()
                .min_by(|a, b| (a.0 - t0).abs().total_cmp(&(b.0 - t0).abs()))
                .unwrap()
                .1
        };
        let span = near(0.25) - near(-0.25);
        assert!((span - 1.5).abs() <= 0.02 * 1.5, "span {span}");
    }

    #[test]
    fn undersampled_chirp_reports_required_rate() {
        let spec = PulseSpec::chirped(0.5, 4.0, 1.5).with_sample_period(0.05);
        match build_pulse(&spec) {
            Err(Error::UndersampledChirp {
                required_rate_msps, ..
            }) => assert!((required_rate_msps - 8.0 * 4.5).abs() < 1e-9),
            other => panic!("expected undersampling error, got {other:?}"),
        }
    }

    #[test]
    fn energy_scales_with_square_of_rabi() {
        let e: Vec<f64> = [1.0, 2.0, 5.0]
            .iter()
            .map(|&om| build_pulse(&PulseSpec::gaussian(0.26, om)).unwrap().energy())
            .collect();
        assert!((e[1] / e[0] - 4.0).abs() < 1e-12);
        assert!((e[2] / e[0] - 25.0).abs() < 1e-12);
    }

    #[test]
    fn square_pulse_holds_value_and_stops() {
        let p = build_pulse(&PulseSpec::square(0.1, 2.0)).unwrap();
        assert_eq!(p.at(0.05).re, 2.0);
        assert_eq!(p.at(0.1).norm(), 0.0);
        assert_eq!(p.at(-1e-9).norm(), 0.0);
    }
}
