//! Maxwell–Bloch ensemble integration.
//!
//! The medium is cut into `N` thin slabs along the propagation axis and into
//! transverse annuli. Every (slab, annulus, spin bin, optical bin) cell holds
//! a density matrix; each slab radiates `iκ·Σ w·ρ_eg` into the field it
//! passes on. Cells are driven by the field at the slab midpoint, which makes
//! the slab chain a second-order (Padé) approximation of `exp(−OD/2)`.

mod model;
mod scenarios;

pub use scenarios::{
    gaussian_peak_for_area, input_reference, optical_nutation, spin_wave_storage, two_pulse_echo,
    EchoPulses, NutationParams, SpinWaveProtocol,
};

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::REDUCE_CHUNK;
use crate::spectro::{DetuningGrid, PulseEnvelope, PulseKind, SpectralProfile, Trace};
use crate::C64;
use model::{Lambda, Model, TwoLevel};

pub const DEFAULT_SLABS: usize = 10;
pub const DEFAULT_ANNULI: usize = 8;
/// Spin grid: this many points spanning `±SPIN_GRID_SPAN·γ_inh`.
pub const SPIN_GRID_POINTS: usize = 21;
pub const SPIN_GRID_SPAN: f64 = 2.5;
/// Minimum integration steps per cycle of the fastest frequency.
pub const STEPS_PER_CYCLE: f64 = 10.0;
/// Pulses occupy `centre ± FOOTPRINT_FWHMS/2 · FWHM` for overlap checks.
pub const FOOTPRINT_FWHMS: f64 = 3.0;

const WEIGHT_TOLERANCE: f64 = 1e-9;
const DIAGNOSTIC_EVERY: usize = 64;
const DIAGNOSTIC_CELLS: usize = 2048;

/// One transverse zone of the beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    /// Rabi frequency relative to the beam axis.
    pub relative_rabi: f64,
    /// Fraction of the beam power.
    pub weight: f64,
}

/// Ensemble discretisation and decoherence parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub optical_grid: DetuningGrid,
    pub optical_weights: Vec<f64>,
    /// `Σ OD` over the optical bins.
    pub od_sum: f64,
    pub spin_offsets_mhz: Vec<f64>,
    pub spin_weights: Vec<f64>,
    pub t1_us: f64,
    /// Optical coherence time (coherence decays as `exp(−t/T₂)`).
    pub t2_us: f64,
    pub annuli: Vec<Annulus>,
    pub slabs: usize,
    /// Probe also drives `s–e` of the same ions (Λ mode only).
    pub second_transition: Option<SecondTransition>,
}

/// A second ground state coupled to the excited state by the probe itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondTransition {
    /// Probe detuning from the `s–e` line of ions resonant on `g–e` (MHz).
    pub offset_mhz: f64,
    /// `s–e` dipole relative to `g–e`.
    pub relative_dipole: f64,
    /// Initial population left in `s`.
    pub population: f64,
}

impl EnsembleSpec {
    /// Ensemble reproducing `profile`, on axis only, without spin
    /// inhomogeneity.
    pub fn from_profile(profile: &SpectralProfile) -> Self {
        let od_sum: f64 = profile.od.iter().sum();
        let optical_weights = if od_sum > 0.0 {
            profile.od.iter().map(|d| d / od_sum).collect()
        } else {
            vec![1.0 / profile.len() as f64; profile.len()]
        };
        EnsembleSpec {
            optical_grid: profile.grid.clone(),
            optical_weights,
            od_sum,
            spin_offsets_mhz: vec![0.0],
            spin_weights: vec![1.0],
            t1_us: 164.0,
            t2_us: 49.9,
            annuli: vec![Annulus { relative_rabi: 1.0, weight: 1.0 }],
            slabs: DEFAULT_SLABS,
            second_transition: None,
        }
    }

    pub fn with_coherence(mut self, t1_us: f64, t2_us: f64) -> Self {
        self.t1_us = t1_us;
        self.t2_us = t2_us;
        self
    }

    pub fn with_slabs(mut self, slabs: usize) -> Self {
        self.slabs = slabs;
        self
    }

    /// Gaussian beam cut into `n` equal-power annuli; each annulus is driven
    /// at the intensity of its median radius.
    pub fn with_gaussian_beam(mut self, n: usize) -> Self {
        self.annuli = (0..n)
            .map(|k| Annulus {
                relative_rabi: (1.0 - (k as f64 + 0.5) / n as f64).sqrt(),
                weight: 1.0 / n as f64,
            })
            .collect();
        self
    }

    /// Gaussian spin-transition distribution of FWHM `gamma_inh_khz`.
    pub fn with_spin_inhomogeneity(mut self, gamma_inh_khz: f64) -> Self {
        if gamma_inh_khz <= 0.0 {
            self.spin_offsets_mhz = vec![0.0];
            self.spin_weights = vec![1.0];
            return self;
        }
        let g = gamma_inh_khz * 1e-3;
        let sigma = g / (8.0 * std::f64::consts::LN_2).sqrt();
        let h = 2.0 * SPIN_GRID_SPAN * g / (SPIN_GRID_POINTS - 1) as f64;
        let offsets: Vec<f64> = (0..SPIN_GRID_POINTS)
            .map(|k| -SPIN_GRID_SPAN * g + k as f64 * h)
            .collect();
        let raw: Vec<f64> = offsets
            .iter()
            .map(|s| (-0.5 * (s / sigma).powi(2)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        self.spin_weights = raw.iter().map(|w| w / total).collect();
        self.spin_offsets_mhz = offsets;
        self
    }

    /// Shorten `T₂` by instantaneous spectral diffusion at `excitation`.
    pub fn with_isd(mut self, beta: f64, excitation: f64) -> Result<Self> {
        self.t2_us = crate::analysis::isd_trend(self.t2_us, beta, excitation)?;
        Ok(self)
    }

    /// Slab coupling: a weak field is attenuated by `exp(−OD/2)`.
    pub fn coupling(&self) -> f64 {
        2.0 * self.optical_grid.step_mhz * self.od_sum / self.slabs as f64
    }

    /// OD profile represented by the optical weights.
    pub fn profile(&self) -> Result<SpectralProfile> {
        SpectralProfile::new(
            self.optical_grid.clone(),
            self.optical_weights.iter().map(|w| w * self.od_sum).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.optical_weights.len() != self.optical_grid.len {
            return Err(Error::invalid("optical_weights", "one weight per optical bin required"));
        }
        if self.spin_weights.len() != self.spin_offsets_mhz.len() || self.spin_weights.is_empty() {
            return Err(Error::invalid("spin_weights", "one weight per spin bin required"));
        }
        check_weights("optical", self.optical_weights.iter().copied())?;
        check_weights("spin", self.spin_weights.iter().copied())?;
        check_weights("annulus", self.annuli.iter().map(|a| a.weight))?;
        if self.annuli.iter().any(|a| !(a.relative_rabi > 0.0 && a.relative_rabi <= 1.0)) {
            return Err(Error::invalid("annuli", "relative Rabi must lie in (0, 1]"));
        }
        if self.slabs == 0 {
            return Err(Error::invalid("slabs", "at least one slab required"));
        }
        if !(self.od_sum >= 0.0 && self.od_sum.is_finite()) {
            return Err(Error::invalid("od_sum", "must be finite and >= 0"));
        }
        if !(self.t1_us > 0.0 && self.t2_us > 0.0) {
            return Err(Error::invalid("t2_us", "T1 and T2 must be positive"));
        }
        if self.t2_us > 2.0 * self.t1_us * (1.0 + 1e-12) {
            return Err(Error::invalid("t2_us", "T2 cannot exceed 2·T1"));
        }
        if let Some(x) = &self.second_transition {
            if !(0.0..=1.0).contains(&x.population) || !x.offset_mhz.is_finite() || !(x.relative_dipole >= 0.0) {
                return Err(Error::invalid("second_transition", "population must lie in [0, 1], dipole >= 0"));
            }
        }
        Ok(())
    }
}

fn check_weights(what: &'static str, w: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    for v in w {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid("weights", format!("{what} weight {v} is negative")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::WeightsNotNormalized { what, sum });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseRole {
    Input,
    Refocus,
    /// Drives the auxiliary (storage-state) transition; Λ mode only.
    Control,
    Probe,
}

impl PulseRole {
    pub fn name(self) -> &'static str {
        match self {
            PulseRole::Input => "input",
            PulseRole::Refocus => "refocus",
            PulseRole::Control => "control",
            PulseRole::Probe => "probe",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedPulse {
    /// Absolute time of the envelope's local zero (µs).
    pub start_us: f64,
    pub envelope: PulseEnvelope,
    pub role: PulseRole,
}

impl TimedPulse {
    /// Occupied interval used for overlap checks.
    pub fn footprint(&self) -> (f64, f64) {
        let (a, b) = footprint(&self.envelope);
        (self.start_us + a, self.start_us + b)
    }

    /// Absolute time of the pulse centre.
    pub fn centre_us(&self) -> f64 {
        let (a, b) = self.footprint();
        0.5 * (a + b)
    }

    fn field(&self, t: f64) -> C64 {
        self.envelope.at(t - self.start_us)
    }

    fn max_frequency(&self) -> f64 {
        let e = &self.envelope;
        let (a, b) = e.support();
        let rate = if e.kind == PulseKind::ChirpedGaussian { e.chirp_mhz / e.width_us } else { 0.0 };
        e.carrier_mhz.abs() + rate.abs() * a.abs().max(b.abs())
    }
}

/// Local-time interval a pulse occupies.
pub fn footprint(env: &PulseEnvelope) -> (f64, f64) {
    match env.kind {
        PulseKind::Square => (0.0, env.width_us),
        _ => {
            let h = 0.5 * FOOTPRINT_FWHMS * env.width_us;
            (-h, h)
        }
    }
}

/// Time-ordered pulses acting on the ensemble.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSequence {
    pulses: Vec<TimedPulse>,
    allow_overlap: bool,
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sequence whose footprints may overlap (e.g. a probe on top of a drive).
    pub fn overlapping() -> Self {
        PulseSequence { pulses: Vec::new(), allow_overlap: true }
    }

    /// Append a pulse whose local zero sits at `start_us`.
    pub fn push(&mut self, start_us: f64, envelope: PulseEnvelope, role: PulseRole) -> Result<()> {
        if !start_us.is_finite() {
            return Err(Error::invalid("start_us", "must be finite"));
        }
        if let Some(last) = self.pulses.last() {
            if start_us < last.start_us {
                return Err(Error::invalid("start_us", "pulse times must be ascending"));
            }
        }
        let p = TimedPulse { start_us, envelope, role };
        if !self.allow_overlap {
            let (a, b) = p.footprint();
            for q in &self.pulses {
                let (c, d) = q.footprint();
                if a < d && c < b {
                    return Err(Error::Overlap {
                        what: format!("{} pulse at {start_us} µs", role.name()),
                        other: format!("{} pulse at {} µs", q.role.name(), q.start_us),
                    });
                }
            }
        }
        self.pulses.push(p);
        Ok(())
    }

    /// Append a pulse centred on `centre_us`.
    pub fn push_centred(&mut self, centre_us: f64, envelope: PulseEnvelope, role: PulseRole) -> Result<()> {
        let (a, b) = footprint(&envelope);
        self.push(centre_us - 0.5 * (a + b), envelope, role)
    }

    pub fn pulses(&self) -> &[TimedPulse] {
        &self.pulses
    }

    /// Earliest sampled instant of any pulse.
    pub fn first_sample_us(&self) -> Option<f64> {
        self.pulses
            .iter()
            .map(|p| p.start_us + p.envelope.support().0)
            .reduce(f64::min)
    }

    fn probe_field(&self, t: f64) -> C64 {
        self.pulses
            .iter()
            .filter(|p| p.role != PulseRole::Control)
            .map(|p| p.field(t))
            .sum()
    }

    fn control_field(&self, t: f64) -> C64 {
        self.pulses
            .iter()
            .filter(|p| p.role == PulseRole::Control)
            .map(|p| p.field(t))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    TwoLevel,
    /// `g–e` probe transition plus a control on `s–e`.
    Lambda,
}

/// Fixed-step integration window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integration {
    pub dt_us: f64,
    /// Start time; defaults to the first pulse sample.
    pub t_start_us: Option<f64>,
    pub t_end_us: f64,
}

impl Integration {
    pub fn until(t_end_us: f64, dt_us: f64) -> Self {
        Integration { dt_us, t_start_us: None, t_end_us }
    }
}

/// Physicality checks gathered on sampled steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub max_trace_error: f64,
    pub min_population: f64,
    pub max_population: f64,
    pub min_eigenvalue: f64,
    /// Weighted excited-state population of the first slab at the end.
    pub final_excited: f64,
    pub steps: usize,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            max_trace_error: 0.0,
            min_population: f64::INFINITY,
            max_population: f64::NEG_INFINITY,
            min_eigenvalue: f64::INFINITY,
            final_excited: 0.0,
            steps: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub trace: Trace,
    pub diagnostics: Diagnostics,
}

/// Integrate the ensemble under `seq`; returns the field after the last slab.
pub fn evolve_ensemble(spec: &EnsembleSpec, seq: &PulseSequence, mode: Mode, integ: &Integration) -> Result<Trace> {
    evolve_with_diagnostics(spec, seq, mode, integ).map(|e| e.trace)
}

pub fn evolve_with_diagnostics(
    spec: &EnsembleSpec,
    seq: &PulseSequence,
    mode: Mode,
    integ: &Integration,
) -> Result<Evolution> {
    spec.validate()?;
    let g1 = 1.0 / spec.t1_us;
    let g2 = 1.0 / spec.t2_us;
    match mode {
        Mode::TwoLevel => {
            if seq.pulses.iter().any(|p| p.role == PulseRole::Control) {
                return Err(Error::invalid("mode", "control pulses need the Λ mode"));
            }
            if spec.second_transition.is_some() {
                return Err(Error::invalid("mode", "a second transition needs the Λ mode"));
            }
            Solver::new(spec, seq, integ, TwoLevel { gamma1: g1, gamma2: g2 })?.run()
        }
        Mode::Lambda => {
            let s0 = spec.second_transition.map_or(0.0, |x| x.population);
            Solver::new(spec, seq, integ, Lambda { gamma1: g1, gamma2: g2, initial_s: s0 })?.run()
        }
    }
}

fn active_bins(spec: &EnsembleSpec) -> Vec<usize> {
    let active: Vec<usize> = (0..spec.optical_grid.len)
        .filter(|&j| spec.optical_weights[j] > 0.0)
        .collect();
    if active.is_empty() {
        vec![spec.optical_grid.len / 2]
    } else {
        active
    }
}

/// Largest step resolving every detuning, Rabi frequency and chirp with
/// `STEPS_PER_CYCLE` steps per cycle; `None` when nothing oscillates.
pub fn required_step_us(spec: &EnsembleSpec, seq: &PulseSequence) -> Option<f64> {
    let max_delta = active_bins(spec)
        .iter()
        .map(|&j| spec.optical_grid.value(j).abs())
        .fold(0.0, f64::max);
    let max_sigma = spec.spin_offsets_mhz.iter().map(|s| s.abs()).fold(0.0, f64::max);
    let max_rel = spec.annuli.iter().map(|a| a.relative_rabi).fold(0.0, f64::max);
    let max_delta = max_delta + spec.second_transition.map_or(0.0, |x| x.offset_mhz.abs());
    let f_max = seq.pulses.iter().fold(max_delta + max_sigma, |f, p| {
        f.max(p.envelope.peak_rabi * max_rel / (2.0 * PI))
            .max(p.max_frequency() + max_delta + max_sigma)
    });
    (f_max > 0.0).then(|| 1.0 / (STEPS_PER_CYCLE * f_max))
}

pub fn check_step(spec: &EnsembleSpec, seq: &PulseSequence, dt_us: f64) -> Result<()> {
    match required_step_us(spec, seq) {
        Some(required) if dt_us > required * (1.0 + 1e-12) => {
            Err(Error::StepTooLarge { dt_ns: dt_us * 1e3, required_ns: required * 1e3 })
        }
        _ => Ok(()),
    }
}

struct Solver<'a, M> {
    model: M,
    seq: &'a PulseSequence,
    annuli: Vec<Annulus>,
    slabs: usize,
    kappa: f64,
    second: Option<SecondTransition>,
    /// Angular optical detuning per active bin.
    delta: Vec<f64>,
    sigma: Vec<f64>,
    /// Emission weight per cell within a group (spin-major).
    weight: Vec<f64>,
    per_group: usize,
    t0: f64,
    dt: f64,
    steps: usize,
}

struct Fields {
    probe: Vec<C64>,
    control: Vec<C64>,
    out: Vec<C64>,
}

impl<'a, M: Model> Solver<'a, M> {
    fn new(spec: &EnsembleSpec, seq: &'a PulseSequence, integ: &Integration, model: M) -> Result<Self> {
        let dt = integ.dt_us;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt_us", "must be positive"));
        }
        let t0 = match integ.t_start_us {
            Some(t) => t,
            None => seq.first_sample_us().unwrap_or(0.0),
        };
        if !(integ.t_end_us > t0) {
            return Err(Error::invalid("t_end_us", "must lie after the start"));
        }
        check_step(spec, seq, dt)?;
        let active = active_bins(spec);
        let delta: Vec<f64> = active.iter().map(|&j| 2.0 * PI * spec.optical_grid.value(j)).collect();
        let sigma: Vec<f64> = spec.spin_offsets_mhz.iter().map(|s| 2.0 * PI * s).collect();
        let weight: Vec<f64> = spec
            .spin_weights
            .iter()
            .flat_map(|ws| active.iter().map(move |&j| ws * spec.optical_weights[j]))
            .collect();
        let steps = ((integ.t_end_us - t0) / dt).round().max(1.0) as usize;
        Ok(Solver {
            model,
            seq,
            annuli: spec.annuli.clone(),
            slabs: spec.slabs,
            kappa: spec.coupling(),
            second: spec.second_transition,
            per_group: weight.len(),
            delta,
            sigma,
            weight,
            t0,
            dt,
            steps,
        })
    }

    fn cell_params(&self, i: usize) -> (usize, f64, f64) {
        let g = i / self.per_group;
        let w = i % self.per_group;
        let n_opt = self.delta.len();
        (g, self.delta[w % n_opt], self.sigma[w / n_opt])
    }

    /// Field at every slab midpoint and after the last slab, per annulus.
    /// With a second transition the probe also drives `s–e`, seen in that
    /// transition's frame, and `ρ_es` radiates back into the probe mode.
    fn fields(&self, state: &[M::State], t: f64) -> Fields {
        let input = self.seq.probe_field(t);
        let ctl = self.seq.control_field(t);
        let groups = self.annuli.len() * self.slabs;
        let mut probe = Vec::with_capacity(groups);
        let mut control = Vec::with_capacity(groups);
        let mut out = Vec::with_capacity(self.annuli.len());
        let ik = C64::new(0.0, self.kappa);
        let arm = self
            .second
            .map(|x| (x.relative_dipole, C64::from_polar(1.0, -2.0 * PI * x.offset_mhz * t)));
        for (a, ann) in self.annuli.iter().enumerate() {
            let mut e = input * ann.relative_rabi;
            for s in 0..self.slabs {
                let g = a * self.slabs + s;
                let cells = &state[g * self.per_group..(g + 1) * self.per_group];
                let mut p = self.group_sum(cells, M::coherence);
                if let Some((r, rot)) = arm {
                    p += self.group_sum(cells, M::second_coherence) * rot.conj() * r;
                }
                let mid = e + ik * p * 0.5;
                probe.push(mid);
                let c = ctl * ann.relative_rabi;
                control.push(match arm {
                    Some((r, rot)) => c + mid * rot * r,
                    None => c,
                });
                e += ik * p;
            }
            out.push(e);
        }
        Fields { probe, control, out }
    }

    /// `Σ w·coh(cell)` over one group, reduced in fixed chunks.
    fn group_sum(&self, cells: &[M::State], coh: fn(&M::State) -> C64) -> C64 {
        let partial: Vec<C64> = cells
            .par_chunks(REDUCE_CHUNK)
            .zip(self.weight.par_chunks(REDUCE_CHUNK))
            .map(|(c, w)| c.iter().zip(w).map(|(s, w)| coh(s) * *w).sum::<C64>())
            .collect();
        partial.into_iter().sum()
    }

    /// Detected intensity and mode-averaged field. Annulus weights are
    /// power fractions, so each annulus is normalised by its own input
    /// intensity.
    fn output(&self, f: &Fields) -> (f64, C64) {
        let mut inten = 0.0;
        let mut field = C64::new(0.0, 0.0);
        for (a, e) in self.annuli.iter().zip(&f.out) {
            inten += a.weight * e.norm_sqr() / (a.relative_rabi * a.relative_rabi);
            field += e * (a.weight / a.relative_rabi);
        }
        (inten, field)
    }

    fn stage(&self, stage: u8, f: &Fields, y: &mut [M::State], acc: &mut [M::State], tmp: &mut [M::State]) {
        let dt = self.dt;
        y.par_iter_mut()
            .zip(acc.par_iter_mut())
            .zip(tmp.par_iter_mut())
            .enumerate()
            .with_min_len(256)
            .for_each(|(i, ((y, acc), tmp))| {
                let (g, d, s) = self.cell_params(i);
                let src = if stage == 0 { *y } else { *tmp };
                let k = self.model.deriv(&src, d, s, f.probe[g], f.control[g]);
                match stage {
                    0 => {
                        *acc = M::axpy(y, dt / 6.0, &k);
                        *tmp = M::axpy(y, 0.5 * dt, &k);
                    }
                    1 => {
                        *acc = M::axpy(acc, dt / 3.0, &k);
                        *tmp = M::axpy(y, 0.5 * dt, &k);
                    }
                    2 => {
                        *acc = M::axpy(acc, dt / 3.0, &k);
                        *tmp = M::axpy(y, dt, &k);
                    }
                    _ => *y = M::axpy(acc, dt / 6.0, &k),
                }
            });
    }

    fn check(&self, y: &[M::State], d: &mut Diagnostics) {
        let stride = (y.len() / DIAGNOSTIC_CELLS).max(1);
        for s in y.iter().step_by(stride) {
            let c = self.model.check(s);
            d.max_trace_error = d.max_trace_error.max(c.trace_error);
            d.min_population = d.min_population.min(c.min_population);
            d.max_population = d.max_population.max(c.max_population);
            d.min_eigenvalue = d.min_eigenvalue.min(c.min_eigenvalue);
        }
    }

    fn run(&self) -> Result<Evolution> {
        let n = self.per_group * self.annuli.len() * self.slabs;
        let mut y = vec![self.model.ground(); n];
        let mut acc = y.clone();
        let mut tmp = y.clone();
        let mut diag = Diagnostics::default();
        let mut field = Vec::with_capacity(self.steps + 1);
        let mut inten = Vec::with_capacity(self.steps + 1);
        let dt = self.dt;
        for step in 0..self.steps {
            let t = self.t0 + step as f64 * dt;
            if step % DIAGNOSTIC_EVERY == 0 {
                self.check(&y, &mut diag);
            }
            let f = self.fields(&y, t);
            let (i, e) = self.output(&f);
            inten.push(i);
            field.push(e);
            self.stage(0, &f, &mut y, &mut acc, &mut tmp);
            let f = self.fields(&tmp, t + 0.5 * dt);
            self.stage(1, &f, &mut y, &mut acc, &mut tmp);
            let f = self.fields(&tmp, t + 0.5 * dt);
            self.stage(2, &f, &mut y, &mut acc, &mut tmp);
            let f = self.fields(&tmp, t + dt);
            self.stage(3, &f, &mut y, &mut acc, &mut tmp);
        }
        self.check(&y, &mut diag);
        let f = self.fields(&y, self.t0 + self.steps as f64 * dt);
        let (i, e) = self.output(&f);
        inten.push(i);
        field.push(e);
        let first = &y[..self.per_group];
        diag.final_excited = first
            .iter()
            .zip(&self.weight)
            .map(|(s, w)| self.model.check(s).excited * w)
            .sum();
        diag.steps = self.steps;
        Ok(Evolution {
            trace: Trace { t_start_us: self.t0, dt_us: dt, intensity: inten, field: Some(field) },
            diagnostics: diag,
        })
    }
}

#[cfg(test)]
mod tests;
