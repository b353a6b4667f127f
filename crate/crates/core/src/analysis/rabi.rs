//! Optical-nutation analysis.

use super::{lm, sigmas, FitResult, Param};
use crate::error::{Error, Result};
use crate::numeric::{fft_forward, fft_inverse, first_local_min, median3, parabolic_offset, signed_index};
use crate::spectro::Trace;
use crate::C64;

/// `Ω·t_π` used to convert the first extremum time into a Rabi frequency.
pub const T_PI_CONSTANT: f64 = 5.1;
/// First extremum of `J₁(x)/x` (first zero of `J₂`).
pub const T_PI_EXACT: f64 = 5.135_622_301_840_683;

/// Which way the first nutation extremum points in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// The trace dips at `t_π` (absorption-like signal).
    Absorption,
    /// The trace peaks at `t_π` (transmitted probe intensity).
    Transmission,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiOptions {
    /// Beat frequency to remove before locating `t_π` (MHz).
    pub notch_mhz: Option<f64>,
    pub polarity: Polarity,
    pub constant: f64,
}

impl Default for RabiOptions {
    fn default() -> Self {
        RabiOptions { notch_mhz: None, polarity: Polarity::Absorption, constant: T_PI_CONSTANT }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RabiEstimate {
    /// `Ω_R = constant/t_π`; parameters `omega_r` (rad/µs) and `t_pi_us`.
    pub t_pi: FitResult,
    /// `a + b·J₁(Ωt)/(Ωt)` over the whole trace; parameters `omega_r`,
    /// `offset`, `scale`.
    pub full_curve: FitResult,
}

impl RabiEstimate {
    /// The full-curve model does not describe the trace.
    pub fn wrong_model(&self) -> bool {
        !self.full_curve.converged
    }
}

/// Band-stop around `±f_notch` on a mirror-extended copy of `x`. The stop
/// band is `±20%` of the notch frequency, with a raised-cosine shoulder out
/// to `±35%`.
pub fn notch_filter(x: &[f64], dt_us: f64, f_notch_mhz: f64) -> Vec<f64> {
    let n = x.len();
    if n < 2 || !(f_notch_mhz > 0.0) {
        return x.to_vec();
    }
    let len = 2 * n;
    let mut buf: Vec<C64> = x.iter().chain(x.iter().rev()).map(|v| C64::new(*v, 0.0)).collect();
    fft_forward(&mut buf);
    let (stop, pass) = (0.2 * f_notch_mhz, 0.35 * f_notch_mhz);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = signed_index(k, len) as f64 / (len as f64 * dt_us);
        let d = (f.abs() - f_notch_mhz).abs();
        let g = if d <= stop {
            0.0
        } else if d >= pass {
            1.0
        } else {
            0.5 - 0.5 * (std::f64::consts::PI * (d - stop) / (pass - stop)).cos()
        };
        *v *= g;
    }
    fft_inverse(&mut buf);
    buf[..n].iter().map(|v| v.re / len as f64).collect()
}

/// Frequency (MHz) of the strongest spectral peak of the intensity in
/// `[lo, hi]`, from a Hann-windowed, zero-padded transform. Only interior
/// local maxima count; `None` when the band holds none.
pub fn dominant_frequency(trace: &Trace, lo_mhz: f64, hi_mhz: f64) -> Option<f64> {
    let n = trace.len();
    if n < 4 {
        return None;
    }
    let mean = trace.intensity.iter().sum::<f64>() / n as f64;
    let len = (8 * n).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for (i, v) in trace.intensity.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
        buf[i] = C64::new((v - mean) * w, 0.0);
    }
    fft_forward(&mut buf);
    let df = 1.0 / (len as f64 * trace.dt_us);
    let mag: Vec<f64> = buf[..len / 2].iter().map(|v| v.norm()).collect();
    let k_lo = ((lo_mhz / df).ceil() as usize).max(1);
    let k_hi = ((hi_mhz / df).floor() as usize).min(len / 2 - 2);
    let k = (k_lo..=k_hi)
        .filter(|&k| mag[k] >= mag[k - 1] && mag[k] > mag[k + 1])
        .max_by(|a, b| mag[*a].total_cmp(&mag[*b]))?;
    Some((k as f64 + parabolic_offset(mag[k - 1], mag[k], mag[k + 1])) * df)
}

fn j1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        0.5
    } else {
        libm::j1(x) / x
    }
}

/// Normalised RMS misfit above which the `J₁` model is rejected.
const FULL_CURVE_TOLERANCE: f64 = 0.03;

/// Rabi frequency from a nutation trace starting at pulse turn-on.
pub fn extract_rabi(trace: &Trace, opts: &RabiOptions) -> Result<RabiEstimate> {
    if trace.len() < 5 {
        return Err(Error::invalid("trace", "need at least 5 samples"));
    }
    if !(opts.constant > 0.0) {
        return Err(Error::invalid("constant", "must be positive"));
    }
    let dt = trace.dt_us;
    let raw = match opts.notch_mhz {
        Some(f) => notch_filter(&trace.intensity, dt, f),
        None => trace.intensity.clone(),
    };
    let oriented: Vec<f64> = match opts.polarity {
        Polarity::Absorption => raw.clone(),
        Polarity::Transmission => raw.iter().map(|v| -v).collect(),
    };
    let smooth = median3(&oriented);
    let t_pi = first_local_min(&smooth, 1).map(|i| {
        let off = if i + 1 < smooth.len() { parabolic_offset(smooth[i - 1], smooth[i], smooth[i + 1]) } else { 0.0 };
        (i as f64 + off) * dt
    });
    let t_pi_fit = match t_pi {
        Some(t) if t > 0.0 => FitResult {
            model: "t_pi",
            params: vec![
                Param { name: "omega_r", value: opts.constant / t, sigma: opts.constant * dt / (t * t) },
                Param { name: "t_pi_us", value: t, sigma: dt },
            ],
            residual_rms: 0.0,
            converged: true,
            note: None,
        },
        _ => FitResult {
            model: "t_pi",
            params: vec![
                Param { name: "omega_r", value: f64::NAN, sigma: f64::INFINITY },
                Param { name: "t_pi_us", value: f64::NAN, sigma: f64::INFINITY },
            ],
            residual_rms: f64::NAN,
            converged: false,
            note: Some("no local extremum after turn-on".to_string()),
        },
    };

    let times: Vec<f64> = (0..raw.len()).map(|i| i as f64 * dt).collect();
    let tail = &raw[raw.len() * 7 / 10..];
    let a0 = tail.iter().sum::<f64>() / tail.len() as f64;
    let b0 = 2.0 * (raw[0] - a0);
    let span = times[times.len() - 1];
    let w0 = match t_pi {
        Some(t) if t > 0.0 => T_PI_EXACT / t,
        _ => 10.0 / span,
    };
    let model = |t: f64, p: &[f64]| p[1] + p[2] * j1_over_x(p[0] * t);
    let out = lm::fit(&times, &raw, &[w0, a0, b0], &model);
    let s = sigmas(&out, times.len());
    let rms = (out.ssr / times.len() as f64).sqrt();
    let range = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let fits = out.converged && range > 0.0 && rms <= FULL_CURVE_TOLERANCE * range && out.params[0] > 0.0;
    let full_curve = FitResult {
        model: "j1_nutation",
        params: vec![
            Param { name: "omega_r", value: out.params[0].abs(), sigma: s[0] },
            Param { name: "offset", value: out.params[1], sigma: s[1] },
            Param { name: "scale", value: out.params[2], sigma: s[2] },
        ],
        residual_rms: rms,
        converged: fits,
        note: (!fits).then(|| format!("J1 model misfit: rms {rms:.3e} vs range {range:.3e}")),
    };
    Ok(RabiEstimate { t_pi: t_pi_fit, full_curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn nutation(omega: f64, beat: f64) -> Trace {
        let dt = 0.002;
        let v = (0..2000)
            .map(|i| {
                let t = i as f64 * dt;
                0.5 + j1_over_x(omega * t) + beat * (2.0 * PI * 10.2 * t).cos()
            })
            .collect();
        Trace::from_intensity(0.0, dt, v).unwrap()
    }

    #[test]
    fn recovers_rabi_from_j1_trace() {
        let omega = 2.0 * PI * 1.6;
        let est = extract_rabi(&nutation(omega, 0.0), &RabiOptions::default()).unwrap();
        let w = est.t_pi.get("omega_r").unwrap();
        assert!((w / omega - 1.0).abs() < 0.02, "{w}");
        let t = est.t_pi.get("t_pi_us").unwrap();
        assert!((omega * t / T_PI_EXACT - 1.0).abs() < 1e-3);
        assert!(!est.wrong_model());
        assert!((est.full_curve.get("omega_r").unwrap() / omega - 1.0).abs() < 1e-6);
    }

    #[test]
    fn notch_removes_beat() {
        let omega = 2.0 * PI * 1.6;
        let opts = RabiOptions { notch_mhz: Some(10.2), ..RabiOptions::default() };
        let est = extract_rabi(&nutation(omega, 0.05), &opts).unwrap();
        let w = est.t_pi.get("omega_r").unwrap();
        let clean = T_PI_CONSTANT / (T_PI_EXACT / omega);
        assert!((w / clean - 1.0).abs() < 0.03, "{w} vs {clean}");
    }

    #[test]
    fn rabi_flopping_is_flagged() {
        let omega = 2.0 * PI * 1.6;
        let dt = 0.002;
        let v = (0..2000).map(|i| (0.5 * omega * i as f64 * dt).cos().powi(2)).collect();
        let est = extract_rabi(&Trace::from_intensity(0.0, dt, v).unwrap(), &RabiOptions::default()).unwrap();
        assert!(est.t_pi.get("omega_r").unwrap() > 1.5 * omega);
        assert!(est.wrong_model());
    }

    #[test]
    fn transmission_polarity_uses_peak() {
        let omega = 2.0 * PI * 1.6;
        let t = nutation(omega, 0.0);
        let inverted = Trace::from_intensity(0.0, t.dt_us, t.intensity.iter().map(|v| 2.0 - v).collect()).unwrap();
        let opts = RabiOptions { polarity: Polarity::Transmission, ..RabiOptions::default() };
        let a = extract_rabi(&t, &RabiOptions::default()).unwrap().t_pi.get("t_pi_us").unwrap();
        let b = extract_rabi(&inverted, &opts).unwrap().t_pi.get("t_pi_us").unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn no_extremum_is_not_converged() {
        let v: Vec<f64> = (0..100).map(|i| -(i as f64)).collect();
        let est = extract_rabi(&Trace::from_intensity(0.0, 0.01, v.iter().map(|x| x + 200.0).collect()).unwrap(), &RabiOptions::default()).unwrap();
        assert!(!est.t_pi.converged);
    }

    #[test]
    fn scale_invariant() {
        let t = nutation(2.0 * PI * 1.2, 0.0);
        let scaled = Trace::from_intensity(0.0, t.dt_us, t.intensity.iter().map(|v| 7.5 * v).collect()).unwrap();
        let a = extract_rabi(&t, &RabiOptions::default()).unwrap().t_pi.get("t_pi_us").unwrap();
        let b = extract_rabi(&scaled, &RabiOptions::default()).unwrap().t_pi.get("t_pi_us").unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn finds_beat_frequency() {
        let t = nutation(2.0 * PI * 1.6, 0.05);
        let f = dominant_frequency(&t, 3.0, 50.0).unwrap();
        assert!((f / 10.2 - 1.0).abs() < 0.02, "{f}");
    }
}
