use crate::error::{Error, Result};
use crate::C64;

/// Uniformly sampled output of an engine.
///
/// Intensities are `|Ω|²` in (rad/µs)², i.e. in the Rabi units of the
/// incident pulse, so echo and reference energies compare directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub t_start_us: f64,
    pub dt_us: f64,
    pub intensity: Vec<f64>,
    pub field: Option<Vec<C64>>,
}

impl Trace {
    pub fn from_field(t_start_us: f64, dt_us: f64, field: Vec<C64>) -> Self {
        let intensity = field.iter().map(|e| e.norm_sqr()).collect();
        Trace {
            t_start_us,
            dt_us,
            intensity,
            field: Some(field),
        }
    }

    pub fn from_intensity(t_start_us: f64, dt_us: f64, intensity: Vec<f64>) -> Result<Self> {
        if !(dt_us > 0.0) {
            return Err(Error::invalid("dt_us", "time step must be positive"));
        }
        if intensity.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("intensity", "must be non-negative"));
        }
        Ok(Trace {
            t_start_us,
            dt_us,
            intensity,
            field: None,
        })
    }

    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start_us + i as f64 * self.dt_us
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }

    pub fn end_us(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn peak(&self) -> f64 {
        self.intensity.iter().copied().fold(0.0, f64::max)
    }

    /// Sample indices inside `[center - width/2, center + width/2]`.
    pub fn window(&self, center_us: f64, width_us: f64) -> std::ops::Range<usize> {
        let lo = ((center_us - 0.5 * width_us - self.t_start_us) / self.dt_us).ceil();
        let hi = ((center_us + 0.5 * width_us - self.t_start_us) / self.dt_us).floor();
        let lo = lo.max(0.0) as usize;
        let hi = (hi + 1.0).clamp(0.0, self.len() as f64) as usize;
        lo.min(hi)..hi
    }

    /// `Σ I·dt` over a window.
    pub fn energy_in(&self, center_us: f64, width_us: f64) -> f64 {
        self.intensity[self.window(center_us, width_us)].iter().sum::<f64>() * self.dt_us
    }

    pub fn total_energy(&self) -> f64 {
        self.intensity.iter().sum::<f64>() * self.dt_us
    }

    /// Intensity-weighted mean time over a window; `None` for a dark window.
    pub fn centroid_in(&self, center_us: f64, width_us: f64) -> Option<f64> {
        let r = self.window(center_us, width_us);
        let (mut s, mut st) = (0.0, 0.0);
        for i in r {
            s += self.intensity[i];
            st += self.intensity[i] * self.time(i);
        }
        (s > 0.0).then(|| st / s)
    }

    /// Linear interpolation of the intensity at time `t` (zero outside).
    pub fn intensity_at(&self, t: f64) -> f64 {
        if self.is_empty() || t < self.t_start_us || t > self.end_us() {
            return 0.0;
        }
        crate::numeric::interp_uniform(&self.intensity, self.t_start_us, self.dt_us, t)
    }

    /// Restrict to samples with time in `[t0, t1]`.
    pub fn slice(&self, t0: f64, t1: f64) -> Trace {
        let r = self.window(0.5 * (t0 + t1), t1 - t0);
        Trace {
            t_start_us: self.time(r.start),
            dt_us: self.dt_us,
            intensity: self.intensity[r.clone()].to_vec(),
            field: self.field.as_ref().map(|f| f[r].to_vec()),
        }
    }

    /// Multiply the field by `a` (intensity by `|a|²`).
    pub fn scaled(&self, a: f64) -> Trace {
        Trace {
            t_start_us: self.t_start_us,
            dt_us: self.dt_us,
            intensity: self.intensity.iter().map(|v| v * a * a).collect(),
            field: self
                .field
                .as_ref()
                .map(|f| f.iter().map(|e| e * a).collect()),
        }
    }
}
