//! Gaussian-beam geometry, waveguide coupling and the waveguide/bulk
//! interaction enhancement.
//!
//! Radii are e⁻² intensity radii in µm, lengths along the crystal in mm.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Beam radius at the waveguide input facet (half the 28.3 µm diameter).
pub const FACET_RADIUS_UM: f64 = 14.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    pub waist_um: f64,
    pub wavelength_nm: f64,
    pub index: f64,
    pub length_mm: f64,
    /// Focus position from the input facet.
    pub focus_mm: f64,
}

impl Default for BeamGeometry {
    /// Bulk beam with the measured 14 µm waist at the input facet.
    fn default() -> Self {
        BeamGeometry {
            waist_um: 14.0,
            wavelength_nm: 606.0,
            index: 1.8,
            length_mm: 10.0,
            focus_mm: 0.0,
        }
    }
}

impl BeamGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("waist_um", self.waist_um),
            ("wavelength_nm", self.wavelength_nm),
            ("index", self.index),
            ("length_mm", self.length_mm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if !self.focus_mm.is_finite() {
            return Err(Error::invalid("focus_mm", "must be finite"));
        }
        Ok(())
    }

    /// `z_R = π w₀² n / λ` in mm.
    pub fn rayleigh_range_mm(&self) -> f64 {
        std::f64::consts::PI * self.waist_um.powi(2) * self.index / (self.wavelength_nm * 1e-3) * 1e-3
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideMode {
    pub wx_um: f64,
    pub wy_um: f64,
    /// Overall transmission, coupling mismatch included.
    pub transmission: f64,
}

impl Default for WaveguideMode {
    fn default() -> Self {
        WaveguideMode {
            wx_um: 9.25,
            wy_um: 7.9,
            transmission: 0.5,
        }
    }
}

impl WaveguideMode {
    pub fn validate(&self) -> Result<()> {
        if !(self.wx_um > 0.0 && self.wy_um > 0.0) {
            return Err(Error::invalid("mode radii", "must be positive"));
        }
        if !(self.transmission > 0.0 && self.transmission <= 1.0) {
            return Err(Error::OutOfRange {
                name: "transmission",
                value: self.transmission,
                range: "(0, 1]",
            });
        }
        Ok(())
    }
}

/// `w(z) = w₀ √(1 + ((z − z_f)/z_R)²)`.
pub fn beam_radius(geom: &BeamGeometry, z_mm: f64) -> Result<f64> {
    geom.validate()?;
    if !(0.0..=geom.length_mm).contains(&z_mm) {
        return Err(Error::OutOfRange {
            name: "z_mm",
            value: z_mm,
            range: "[0, crystal length]",
        });
    }
    Ok(radius_unchecked(geom, z_mm))
}

fn radius_unchecked(geom: &BeamGeometry, z_mm: f64) -> f64 {
    let u = (z_mm - geom.focus_mm) / geom.rayleigh_range_mm();
    geom.waist_um * (1.0 + u * u).sqrt()
}

/// Power coupling between a round input beam and a separable elliptical
/// Gaussian mode, both centred with flat phase.
pub fn mode_overlap(input_radius_um: f64, mode: &WaveguideMode) -> Result<f64> {
    if !(input_radius_um > 0.0) {
        return Err(Error::invalid("input_radius_um", "must be positive"));
    }
    mode.validate()?;
    let axis = |w: f64| 2.0 * input_radius_um * w / (input_radius_um * input_radius_um + w * w);
    Ok(axis(mode.wx_um) * axis(mode.wy_um))
}

/// How the bulk Rabi frequency is averaged along the crystal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Mean of the on-axis field, `⟨1/w⟩`.
    Field,
    /// Root of the mean on-axis intensity, `√⟨1/w²⟩`.
    Intensity,
}

impl Averaging {
    pub fn name(self) -> &'static str {
        match self {
            Averaging::Field => "field-average",
            Averaging::Intensity => "intensity-average",
        }
    }
}

const QUADRATURE_INTERVALS: usize = 2000;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = QUADRATURE_INTERVALS;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Longitudinally averaged bulk on-axis field figure (µm⁻¹).
pub fn bulk_figure(geom: &BeamGeometry, averaging: Averaging) -> Result<f64> {
    geom.validate()?;
    let l = geom.length_mm;
    Ok(match averaging {
        Averaging::Field => simpson(|z| 1.0 / radius_unchecked(geom, z), 0.0, l) / l,
        Averaging::Intensity => (simpson(|z| radius_unchecked(geom, z).powi(-2), 0.0, l) / l).sqrt(),
    })
}

/// Waveguide on-axis field figure `√η_T / √(w_x w_y)` (µm⁻¹).
pub fn waveguide_figure(mode: &WaveguideMode) -> Result<f64> {
    mode.validate()?;
    Ok(mode.transmission.sqrt() / (mode.wx_um * mode.wy_um).sqrt())
}

/// Waveguide over bulk Rabi-frequency ratio at equal input power.
pub fn enhancement_factor(geom: &BeamGeometry, mode: &WaveguideMode, averaging: Averaging) -> Result<f64> {
    Ok(waveguide_figure(mode)? / bulk_figure(geom, averaging)?)
}

/// A measured (power, Rabi frequency) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiCalibration {
    pub power_mw: f64,
    /// rad/µs
    pub rabi: f64,
}

impl RabiCalibration {
    /// Waveguide operating point: 2 mW gives 2π·1.6 MHz.
    pub fn waveguide() -> Self {
        RabiCalibration {
            power_mw: 2.0,
            rabi: 2.0 * std::f64::consts::PI * 1.6,
        }
    }

    /// Bulk reference: 15 mW gives 2π·0.69 MHz.
    pub fn bulk() -> Self {
        RabiCalibration {
            power_mw: 15.0,
            rabi: 2.0 * std::f64::consts::PI * 0.69,
        }
    }

    /// Rabi frequency per square-root power.
    pub fn slope(&self) -> f64 {
        self.rabi / self.power_mw.sqrt()
    }
}

/// `Ω = Ω_ref √(P/P_ref)`.
pub fn power_to_rabi(power_mw: f64, cal: &RabiCalibration) -> Result<f64> {
    if !(cal.power_mw > 0.0) {
        return Err(Error::invalid("calibration power", "must be positive"));
    }
    if !(power_mw >= 0.0) {
        return Err(Error::OutOfRange {
            name: "power_mw",
            value: power_mw,
            range: "[0, ∞)",
        });
    }
    Ok(cal.rabi * (power_mw / cal.power_mw).sqrt())
}

/// Power-normalised ratio of two measured Rabi slopes.
pub fn measured_enhancement(waveguide: &RabiCalibration, bulk: &RabiCalibration) -> Result<f64> {
    if !(waveguide.power_mw > 0.0 && bulk.power_mw > 0.0 && bulk.rabi > 0.0) {
        return Err(Error::invalid("calibration", "powers and bulk Rabi frequency must be positive"));
    }
    Ok(waveguide.slope() / bulk.slope())
}

/// Everything the enhancement report lists.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementReport {
    pub rayleigh_range_mm: f64,
    pub facet_radius_um: f64,
    pub overlap: f64,
    /// `η_T / overlap`: what is left for propagation loss.
    pub implied_propagation_transmission: f64,
    pub field_average: f64,
    pub intensity_average: f64,
    pub measured_slope: f64,
}

impl EnhancementReport {
    pub fn compute(
        geom: &BeamGeometry,
        mode: &WaveguideMode,
        facet_radius_um: f64,
        waveguide: &RabiCalibration,
        bulk: &RabiCalibration,
    ) -> Result<Self> {
        let overlap = mode_overlap(facet_radius_um, mode)?;
        Ok(EnhancementReport {
            rayleigh_range_mm: geom.rayleigh_range_mm(),
            facet_radius_um,
            overlap,
            implied_propagation_transmission: mode.transmission / overlap,
            field_average: enhancement_factor(geom, mode, Averaging::Field)?,
            intensity_average: enhancement_factor(geom, mode, Averaging::Intensity)?,
            measured_slope: measured_enhancement(waveguide, bulk)?,
        })
    }

    /// Flat `key = value` listing.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rayleigh_range_mm = {:.6}", self.rayleigh_range_mm);
        let _ = writeln!(s, "facet_radius_um = {}", self.facet_radius_um);
        let _ = writeln!(s, "mode_overlap = {:.6}", self.overlap);
        let _ = writeln!(s, "implied_propagation_transmission = {:.6}", self.implied_propagation_transmission);
        let _ = writeln!(s, "enhancement_field_average = {:.6}", self.field_average);
        let _ = writeln!(s, "enhancement_intensity_average = {:.6}", self.intensity_average);
        let _ = writeln!(s, "enhancement_measured_slope = {:.6}", self.measured_slope);
        let _ = writeln!(s, "# theoretical 5.7 depends on the averaging convention; both are listed");
        s
    }
}
