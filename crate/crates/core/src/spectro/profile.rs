use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

/// Uniform detuning grid in MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningGrid {
    pub start_mhz: f64,
    pub step_mhz: f64,
    pub len: usize,
}

impl DetuningGrid {
    pub fn new(start_mhz: f64, step_mhz: f64, len: usize) -> Result<Self> {
        if !(step_mhz > 0.0 && step_mhz.is_finite()) {
            return Err(Error::invalid("step_mhz", "grid spacing must be positive"));
        }
        if len < 2 {
            return Err(Error::invalid("len", "grid needs at least two bins"));
        }
        Ok(DetuningGrid {
            start_mhz,
            step_mhz,
            len,
        })
    }

    /// Grid symmetric about zero detuning: `[-half_span, +half_span]`.
    pub fn symmetric(half_span_mhz: f64, step_mhz: f64) -> Result<Self> {
        if !(half_span_mhz > 0.0) {
            return Err(Error::invalid("half_span_mhz", "must be positive"));
        }
        let half = (half_span_mhz / step_mhz).round() as usize;
        Self::new(-(half as f64) * step_mhz, step_mhz, 2 * half + 1)
    }

    /// ±25 MHz at 10 kHz.
    pub fn default_optical() -> Self {
        Self::symmetric(25.0, 0.01).expect("static grid")
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start_mhz + i as f64 * self.step_mhz
    }

    pub fn end_mhz(&self) -> f64 {
        self.value(self.len - 1)
    }

    pub fn half_span_mhz(&self) -> f64 {
        0.5 * (self.end_mhz() - self.start_mhz)
    }

    pub fn center_mhz(&self) -> f64 {
        0.5 * (self.end_mhz() + self.start_mhz)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.value(i))
    }

    /// Nearest bin, clamped to the grid.
    pub fn nearest(&self, f_mhz: f64) -> usize {
        let u = ((f_mhz - self.start_mhz) / self.step_mhz).round();
        u.clamp(0.0, (self.len - 1) as f64) as usize
    }

    pub fn contains(&self, f_mhz: f64) -> bool {
        f_mhz >= self.start_mhz - 1e-9 && f_mhz <= self.end_mhz() + 1e-9
    }
}

/// Optical depth versus detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    pub grid: DetuningGrid,
    pub od: Vec<f64>,
}

impl SpectralProfile {
    pub fn new(grid: DetuningGrid, od: Vec<f64>) -> Result<Self> {
        if od.len() != grid.len {
            return Err(Error::invalid(
                "od",
                format!("{} values for a {}-bin grid", od.len(), grid.len),
            ));
        }
        if let Some((i, v)) = od.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "od",
                format!("bin {i} has optical depth {v}, must be finite and >= 0"),
            ));
        }
        Ok(SpectralProfile { grid, od })
    }

    pub fn flat(grid: DetuningGrid, od: f64) -> Result<Self> {
        let n = grid.len;
        Self::new(grid, vec![od; n])
    }

    /// Evaluate an analytic shape on the grid.
    pub fn from_fn(grid: DetuningGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let od = grid.values().map(f).collect();
        Self::new(grid, od)
    }

    pub fn len(&self) -> usize {
        self.od.len()
    }

    pub fn is_empty(&self) -> bool {
        self.od.is_empty()
    }

    pub fn max_od(&self) -> f64 {
        self.od.iter().copied().fold(0.0, f64::max)
    }

    /// OD at `f_mhz` by linear interpolation; clamped outside the grid.
    pub fn at(&self, f_mhz: f64) -> f64 {
        crate::numeric::interp_uniform(&self.od, self.grid.start_mhz, self.grid.step_mhz, f_mhz)
    }

    /// Mean OD over bins with `lo <= δ <= hi`.
    pub fn mean_in(&self, lo: f64, hi: f64) -> f64 {
        let (s, n) = self
            .grid
            .values()
            .zip(&self.od)
            .filter(|(f, _)| *f >= lo && *f <= hi)
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    /// Integral of OD over the grid (MHz).
    pub fn integral(&self) -> f64 {
        self.od.iter().sum::<f64>() * self.grid.step_mhz
    }
}

/// Smooth-edged transparency window.
#[derive(Debug, Clone, PartialEq)]
pub struct PitShape {
    pub width_mhz: f64,
    pub background_od: f64,
    pub outside_od: f64,
    /// Width of the raised-cosine transition at each window edge.
    pub edge_mhz: f64,
}

impl Default for PitShape {
    fn default() -> Self {
        PitShape {
            width_mhz: 18.0,
            background_od: 1.0,
            outside_od: 6.0,
            edge_mhz: 1.0,
        }
    }
}

impl PitShape {
    /// Fraction of the way from inside (0) to outside (1) the window.
    fn outside_weight(&self, f: f64) -> f64 {
        let half = 0.5 * self.width_mhz;
        let e = self.edge_mhz.max(0.0);
        let a = f.abs();
        if a <= half - 0.5 * e {
            0.0
        } else if e == 0.0 || a >= half + 0.5 * e {
            1.0
        } else {
            let u = (a - (half - 0.5 * e)) / e;
            0.5 - 0.5 * (PI * u).cos()
        }
    }

    pub fn od_at(&self, f: f64) -> f64 {
        let w = self.outside_weight(f);
        self.background_od * (1.0 - w) + self.outside_od * w
    }

    pub fn render(&self, grid: &DetuningGrid) -> Result<SpectralProfile> {
        SpectralProfile::from_fn(grid.clone(), |f| self.od_at(f))
    }
}

/// Analytic comb of Gaussian teeth inside a transparency window.
#[derive(Debug, Clone, PartialEq)]
pub struct CombShape {
    pub delta_mhz: f64,
    pub finesse: f64,
    /// Peak tooth OD above the window background.
    pub tooth_od: f64,
    /// Teeth are placed at `m·Δ` for `|m·Δ| <= bandwidth/2`.
    pub bandwidth_mhz: f64,
    /// Extra tooth width added in quadrature to `Δ/F` (pump-linewidth
    /// limited teeth). Zero for an ideal comb.
    pub broadening_mhz: f64,
    pub pit: PitShape,
}

impl CombShape {
    /// Tooth FWHM in MHz.
    pub fn tooth_fwhm_mhz(&self) -> f64 {
        let ideal = self.delta_mhz / self.finesse;
        (ideal * ideal + self.broadening_mhz * self.broadening_mhz).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_mhz > 0.0) {
            return Err(Error::invalid("delta", "comb period must be positive"));
        }
        if !(self.finesse > 1.0) {
            return Err(Error::invalid("finesse", "must exceed 1"));
        }
        if self.tooth_od < 0.0 || self.broadening_mhz < 0.0 || self.bandwidth_mhz < 0.0 {
            return Err(Error::invalid("comb", "OD, broadening and bandwidth must be >= 0"));
        }
        Ok(())
    }

    pub fn od_at(&self, f: f64) -> f64 {
        let w = self.tooth_fwhm_mhz();
        let k = 4.0 * LN_2 / (w * w);
        let m_max = (0.5 * self.bandwidth_mhz / self.delta_mhz + 1e-9).floor() as i64;
        let mut teeth = 0.0;
        for m in -m_max..=m_max {
            let x = f - m as f64 * self.delta_mhz;
            if x.abs() < 8.0 * w {
                teeth += (-k * x * x).exp();
            }
        }
        self.pit.od_at(f) + self.tooth_od * teeth
    }

    pub fn render(&self, grid: &DetuningGrid) -> Result<SpectralProfile> {
        self.validate()?;
        SpectralProfile::from_fn(grid.clone(), |f| self.od_at(f))
    }
}
