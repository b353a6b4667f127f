//! Decay fits, nutation Rabi extraction and efficiency algebra.

mod lm;
mod rabi;

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;

pub use rabi::{dominant_frequency, extract_rabi, notch_filter, Polarity, RabiEstimate, RabiOptions, T_PI_CONSTANT, T_PI_EXACT};

use crate::error::{Error, Result};

/// One fitted parameter with its 1σ uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: &'static str,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: &'static str,
    pub params: Vec<Param>,
    pub residual_rms: f64,
    pub converged: bool,
    /// Why the fit is flagged, when it is.
    pub note: Option<String>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.sigma)
    }

    /// Flat `key = value` listing, prefixed by `prefix`.
    pub fn to_text(&self, prefix: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{prefix}model = {}", self.model);
        let _ = writeln!(s, "{prefix}converged = {}", self.converged);
        for p in &self.params {
            let _ = writeln!(s, "{prefix}{} = {}", p.name, p.value);
            let _ = writeln!(s, "{prefix}{}_sigma = {}", p.name, p.sigma);
        }
        let _ = writeln!(s, "{prefix}residual_rms = {}", self.residual_rms);
        if let Some(n) = &self.note {
            let _ = writeln!(s, "{prefix}note = {n}");
        }
        s
    }
}

fn check_points(points: &[(f64, f64)], min: usize) -> Result<()> {
    if points.len() < min {
        return Err(Error::invalid("points", format!("need at least {min} points, got {}", points.len())));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("points", "non-finite value"));
    }
    Ok(())
}

/// Standard errors from the LM curvature, scaled by the residual variance.
fn sigmas(out: &lm::LmOutcome, n: usize) -> Vec<f64> {
    let dof = n.saturating_sub(out.params.len()).max(1) as f64;
    let s2 = out.ssr / dof;
    match &out.inverse_hessian {
        Some(c) => (0..out.params.len()).map(|k| (c[(k, k)].max(0.0) * s2).sqrt()).collect(),
        None => vec![f64::INFINITY; out.params.len()],
    }
}

/// Fit `A·exp(−2x/T₂)` to `(x = 2τ µs, efficiency)` points.
pub fn fit_exponential_decay(points: &[(f64, f64)]) -> Result<FitResult> {
    check_points(points, 3)?;
    if points.iter().any(|(_, y)| *y <= 0.0) {
        return Err(Error::invalid("points", "efficiencies must be positive"));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    // Log-linear start: ln y = ln A − k x.
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("points", "all delays identical"));
    }
    let slope = x.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx;
    let k0 = (-slope).max(1e-12);
    let a0 = (my + k0 * mx).exp();
    let model = |x: f64, p: &[f64]| p[0] * (-p[1] * x).exp();
    let out = lm::fit(&x, &y, &[a0, k0], &model);
    let s = sigmas(&out, x.len());
    let (a, k) = (out.params[0], out.params[1]);
    let span = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
    let decaying = k.is_finite() && k * span > 1e-9;
    let t2 = if decaying { 2.0 / k } else { f64::INFINITY };
    Ok(FitResult {
        model: "exponential",
        params: vec![
            Param { name: "t2_us", value: t2, sigma: if decaying { 2.0 * s[1] / (k * k) } else { f64::INFINITY } },
            Param { name: "amplitude", value: a, sigma: s[0] },
        ],
        residual_rms: (out.ssr / x.len() as f64).sqrt(),
        converged: out.converged && decaying,
        note: (!decaying).then(|| "data do not decay".to_string()),
    })
}

/// `π² / (2 ln 2)`: Gaussian spin-dephasing coefficient for a FWHM width.
const GAUSS_COEFF: f64 = PI * PI / (2.0 * LN_2);

/// Spin-coherence survival `exp(−π²γ²T²/(2 ln 2))` for FWHM `γ` (kHz) after
/// `T` (µs).
pub fn spin_decay(gamma_inh_khz: f64, t_us: f64) -> f64 {
    let g = gamma_inh_khz * 1e-3;
    (-GAUSS_COEFF * g * g * t_us * t_us).exp()
}

/// Fit `exp(−π²γ²T²/(2 ln 2))` to `(T_s µs, normalised efficiency)` points.
pub fn fit_gaussian_decay(points: &[(f64, f64)]) -> Result<FitResult> {
    check_points(points, 3)?;
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    // Moment start: least squares of ln η = −c·s·T² through the origin.
    let (num, den) = points
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .fold((0.0, 0.0), |(n, d), (t, y)| (n - t * t * y.ln(), d + GAUSS_COEFF * t.powi(4)));
    let s0 = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
    let model = |t: f64, p: &[f64]| (-GAUSS_COEFF * p[0] * t * t).exp();
    let out = lm::fit(&x, &y, &[s0], &model);
    let s = out.params[0];
    let sig_s = sigmas(&out, x.len())[0];
    let decaying = s >= -1e-12;
    let gamma_mhz = s.max(0.0).sqrt();
    let sigma_mhz = if gamma_mhz > 0.0 { sig_s / (2.0 * gamma_mhz) } else { sig_s.sqrt() };
    Ok(FitResult {
        model: "gaussian",
        params: vec![Param { name: "gamma_inh_khz", value: gamma_mhz * 1e3, sigma: sigma_mhz * 1e3 }],
        residual_rms: (out.ssr / x.len() as f64).sqrt(),
        converged: out.converged && decaying,
        note: (!decaying).then(|| "data grow with storage time".to_string()),
    })
}

fn fraction(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value: v, range: "[0, 1]" })
    }
}

/// Spin-wave efficiency budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyDecomposition {
    /// Spin-coherence survival over the spin storage time.
    pub eta_c: f64,
    pub eta_sw: f64,
}

/// `η_SW = η_AFC · η_T² · η_C` with Gaussian spin dephasing `η_C`.
pub fn efficiency_decomposition(eta_afc: f64, eta_transfer: f64, gamma_inh_khz: f64, t_s_us: f64) -> Result<EfficiencyDecomposition> {
    fraction("eta_afc", eta_afc)?;
    fraction("eta_transfer", eta_transfer)?;
    if !(gamma_inh_khz >= 0.0 && gamma_inh_khz.is_finite()) {
        return Err(Error::OutOfRange { name: "gamma_inh_khz", value: gamma_inh_khz, range: "[0, ∞)" });
    }
    if !(t_s_us >= 0.0 && t_s_us.is_finite()) {
        return Err(Error::OutOfRange { name: "t_s_us", value: t_s_us, range: "[0, ∞)" });
    }
    let eta_c = spin_decay(gamma_inh_khz, t_s_us);
    Ok(EfficiencyDecomposition { eta_c, eta_sw: eta_afc * eta_transfer * eta_transfer * eta_c })
}

/// `η_d = η_AFC · η_wg · exp(−OD_B)`.
pub fn device_efficiency(eta_afc: f64, waveguide_transmission: f64, od_background: f64) -> Result<f64> {
    fraction("eta_afc", eta_afc)?;
    fraction("waveguide_transmission", waveguide_transmission)?;
    if !(od_background >= 0.0 && od_background.is_finite()) {
        return Err(Error::OutOfRange { name: "od_background", value: od_background, range: "[0, ∞)" });
    }
    Ok(eta_afc * waveguide_transmission * (-od_background).exp())
}

/// Phenomenological instantaneous-spectral-diffusion trend
/// `T₂ = 1/(1/T₂⁰ + β·x)` with `x = P_p·OD/t_p`.
pub fn isd_trend(t2_0_us: f64, beta: f64, excitation: f64) -> Result<f64> {
    if !(t2_0_us > 0.0) {
        return Err(Error::invalid("t2_0_us", "must be positive"));
    }
    if !(beta >= 0.0 && excitation >= 0.0) {
        return Err(Error::invalid("beta", "beta and excitation must be >= 0"));
    }
    Ok(1.0 / (1.0 / t2_0_us + beta * excitation))
}
