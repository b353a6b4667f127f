//! Rate-equation spectral hole burning over the nine-class ensemble.
//!
//! The excited state is eliminated adiabatically: within a pump segment every
//! ion's three ground populations follow `dn/dt = M n`, where `M` collects
//! excitation out of each ground state (rate × oscillator strength ×
//! pump lineshape response) and redistribution through the branching matrix.
//! A segment is applied as the closed-form update `n ← exp(M·T) n`.
//!
//! Swept patterns are treated in the rapid-repetition limit: the ions see the
//! time-averaged response of the sweep over its band(s).

use std::f64::consts::PI;

use rayon::prelude::*;

mod text;

use crate::error::{Error, Result};
use crate::numeric::{expm_generator3, matvec3};
use crate::spectro::{ClassPopulations, DetuningGrid, GroundRoles, IonClass, SpectralProfile, REFERENCE_CLASS};

/// Pump frequency pattern (MHz).
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencyPattern {
    Fixed(f64),
    /// Linear sweep across `[lo, hi]`.
    Sweep { lo: f64, hi: f64 },
    /// Sequential sweeps through several bands.
    Comb(Vec<(f64, f64)>),
}

impl FrequencyPattern {
    /// Time-averaged Lorentzian response (peak-normalised) of a transition
    /// at `f` for half width `hwhm`.
    pub fn response(&self, f: f64, hwhm: f64) -> f64 {
        match self {
            FrequencyPattern::Fixed(p) => lorentz(f - p, hwhm),
            FrequencyPattern::Sweep { lo, hi } => band_response(f, *lo, *hi, hwhm),
            FrequencyPattern::Comb(bands) => {
                let total: f64 = bands.iter().map(|(lo, hi)| hi - lo).sum();
                if total <= 0.0 {
                    // Degenerate bands act as fixed frequencies.
                    let n = bands.len().max(1) as f64;
                    return bands.iter().map(|(lo, _)| lorentz(f - lo, hwhm)).sum::<f64>() / n;
                }
                bands
                    .iter()
                    .map(|&(lo, hi)| (hi - lo) * band_response(f, lo, hi, hwhm))
                    .sum::<f64>()
                    / total
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && hi >= lo;
        let good = match self {
            FrequencyPattern::Fixed(p) => p.is_finite(),
            FrequencyPattern::Sweep { lo, hi } => ok(*lo, *hi),
            FrequencyPattern::Comb(b) => !b.is_empty() && b.iter().all(|&(lo, hi)| ok(lo, hi)),
        };
        if good {
            Ok(())
        } else {
            Err(Error::invalid("pattern", format!("malformed pump pattern {self:?}")))
        }
    }
}

fn lorentz(x: f64, hwhm: f64) -> f64 {
    hwhm * hwhm / (hwhm * hwhm + x * x)
}

fn band_response(f: f64, lo: f64, hi: f64, hwhm: f64) -> f64 {
    let w = hi - lo;
    if w <= 1e-12 * hwhm {
        return lorentz(f - 0.5 * (lo + hi), hwhm);
    }
    hwhm / w * (((hi - f) / hwhm).atan() - ((lo - f) / hwhm).atan())
}

/// One optical-pumping segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpSegment {
    pub pattern: FrequencyPattern,
    pub duration_ms: f64,
    /// Excitation rate at line centre (s⁻¹) for unit oscillator strength.
    pub rate_per_s: f64,
    /// `branching[l][m]`: probability that excited state `l` decays to
    /// ground state `m`. Rows sum to one.
    pub branching: [[f64; 3]; 3],
    /// Homogeneous pump linewidth (FWHM, kHz).
    pub linewidth_khz: f64,
}

impl PumpSegment {
    pub fn validate(&self) -> Result<()> {
        self.pattern.validate()?;
        if !(self.duration_ms >= 0.0 && self.duration_ms.is_finite()) {
            return Err(Error::invalid("duration_ms", "must be finite and >= 0"));
        }
        if !(self.rate_per_s >= 0.0 && self.rate_per_s.is_finite()) {
            return Err(Error::invalid("rate_per_s", "must be finite and >= 0"));
        }
        if !(self.linewidth_khz > 0.0) {
            return Err(Error::invalid("linewidth_khz", "must be positive"));
        }
        check_branching(&self.branching)
    }
}

fn check_branching(b: &[[f64; 3]; 3]) -> Result<()> {
    for (l, row) in b.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if row.iter().any(|v| *v < 0.0) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "branching",
                format!("row {l} = {row:?} must be non-negative and sum to 1"),
            ));
        }
    }
    Ok(())
}

/// Ordered list of pump segments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PumpRecipe {
    pub segments: Vec<PumpSegment>,
}

impl PumpRecipe {
    pub fn validate(&self) -> Result<()> {
        for s in &self.segments {
            s.validate()?;
            if s.duration_ms <= 0.0 {
                return Err(Error::invalid("duration_ms", "recipe segments need positive durations"));
            }
        }
        Ok(())
    }

    pub fn apply(&self, state: &ClassPopulations, strengths: &[[f64; 3]; 3]) -> Result<ClassPopulations> {
        self.validate()?;
        let mut s = state.clone();
        for seg in &self.segments {
            s = pump_step(&s, seg, strengths)?;
        }
        Ok(s)
    }
}

/// Advance every (bin, class) entry through one segment.
///
/// `strengths[i][j]` is the relative oscillator strength of g_i→e_j.
pub fn pump_step(
    state: &ClassPopulations,
    segment: &PumpSegment,
    strengths: &[[f64; 3]; 3],
) -> Result<ClassPopulations> {
    segment.validate()?;
    let mut out = state.clone();
    let exposure = segment.rate_per_s * segment.duration_ms * 1e-3;
    if exposure == 0.0 {
        return Ok(out);
    }
    let hwhm = 0.5 * segment.linewidth_khz * 1e-3;
    let offsets = state.offsets;
    let grid = state.grid.clone();
    out.entries_mut()
        .par_iter_mut()
        .enumerate()
        .for_each(|(idx, n)| {
            let nu0 = grid.value(idx / 9) - offsets[idx % 9];
            let mut m = [[0.0; 3]; 3];
            for k in 0..3 {
                for l in 0..3 {
                    let w = strengths[k][l];
                    if w == 0.0 {
                        continue;
                    }
                    let r = exposure * w * segment.pattern.response(nu0 + offsets[k * 3 + l], hwhm);
                    if r == 0.0 {
                        continue;
                    }
                    m[k][k] -= r;
                    for (g, row) in m.iter_mut().enumerate() {
                        row[k] += r * segment.branching[l][g];
                    }
                }
            }
            let e = expm_generator3(&m);
            *n = matvec3(&e, n);
        });
    Ok(out)
}

/// Hole-burning configuration shared by the preparation routines.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpConfig {
    pub branching: [[f64; 3]; 3],
    pub strengths: [[f64; 3]; 3],
    /// Pump laser linewidth (FWHM, kHz).
    pub pump_linewidth_khz: f64,
    /// Homogeneous absorption linewidth used when rendering (FWHM, kHz).
    pub absorption_linewidth_khz: f64,
    /// OD of the unpumped line.
    pub peak_od: f64,
    pub rate_per_s: f64,
    pub segment_ms: f64,
    pub max_pit_segments: usize,
    /// Target mean OD inside a transparency window.
    pub od_b_target: f64,
    /// Burn-back / clean cycles used for single-class features.
    pub feature_cycles: usize,
    /// Pump exposure at the centre of each comb gap (dimensionless).
    pub afc_exposure: f64,
}

impl Default for PumpConfig {
    fn default() -> Self {
        PumpConfig {
            branching: [[1.0 / 3.0; 3]; 3],
            strengths: [[1.0; 3]; 3],
            pump_linewidth_khz: 50.0,
            absorption_linewidth_khz: 6.4,
            peak_od: 12.0,
            rate_per_s: 2.0e5,
            segment_ms: 5.0,
            max_pit_segments: 40,
            od_b_target: 1.0,
            feature_cycles: 3,
            afc_exposure: 4.0,
        }
    }
}

/// Result of a successful pit preparation.
#[derive(Debug, Clone)]
pub struct PitOutcome {
    pub state: ClassPopulations,
    pub background_od: f64,
    pub segments: usize,
}

/// Fraction of a window, about its centre, used when measuring in-window OD.
pub const WINDOW_CORE: f64 = 0.9;

/// Preparation routines bound to one configuration and role assignment.
#[derive(Debug, Clone)]
pub struct HoleBurner {
    pub config: PumpConfig,
    pub roles: GroundRoles,
}

impl HoleBurner {
    pub fn new(config: PumpConfig, roles: GroundRoles) -> Result<Self> {
        check_branching(&config.branching)?;
        if config.strengths.iter().flatten().any(|w| *w < 0.0)
            || config.strengths.iter().flatten().all(|w| *w == 0.0)
        {
            return Err(Error::invalid("strengths", "must be >= 0 and not all zero"));
        }
        for (name, v) in [
            ("pump_linewidth_khz", config.pump_linewidth_khz),
            ("absorption_linewidth_khz", config.absorption_linewidth_khz),
            ("peak_od", config.peak_od),
            ("segment_ms", config.segment_ms),
            ("afc_exposure", config.afc_exposure),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if config.rate_per_s < 0.0 || config.od_b_target < 0.0 {
            return Err(Error::invalid("rate_per_s", "rate and OD_B target must be >= 0"));
        }
        if !roles.is_permutation() {
            return Err(Error::invalid("roles", "ground roles must be a permutation of 0..3"));
        }
        Ok(HoleBurner { config, roles })
    }

    pub fn segment(&self, pattern: FrequencyPattern, duration_ms: f64) -> PumpSegment {
        PumpSegment {
            pattern,
            duration_ms,
            rate_per_s: self.config.rate_per_s,
            branching: self.config.branching,
            linewidth_khz: self.config.pump_linewidth_khz,
        }
    }

    pub fn step(&self, state: &ClassPopulations, segment: &PumpSegment) -> Result<ClassPopulations> {
        pump_step(state, segment, &self.config.strengths)
    }

    pub fn render(&self, state: &ClassPopulations) -> Result<SpectralProfile> {
        absorption_profile(
            state,
            self.config.peak_od,
            &self.config.strengths,
            self.config.absorption_linewidth_khz,
        )
    }

    /// Burn a transparency window of `width_mhz` centred on the carrier.
    pub fn prepare_pit(&self, state: &ClassPopulations, width_mhz: f64) -> Result<PitOutcome> {
        let grid = &state.grid;
        if !(0.0..=grid.end_mhz() - grid.start_mhz).contains(&width_mhz) {
            return Err(Error::OutOfRange {
                name: "width_mhz",
                value: width_mhz,
                range: "[0, grid span]",
            });
        }
        if width_mhz == 0.0 {
            let bg = self.render(state)?.at(0.0);
            return Ok(PitOutcome { state: state.clone(), background_od: bg, segments: 0 });
        }
        let half = 0.5 * width_mhz;
        let seg = self.segment(FrequencyPattern::Sweep { lo: -half, hi: half }, self.config.segment_ms);
        let core = half * WINDOW_CORE;
        let mut s = state.clone();
        let mut bg = f64::INFINITY;
        for used in 1..=self.config.max_pit_segments {
            s = self.step(&s, &seg)?;
            bg = self.render(&s)?.mean_in(-core, core);
            if bg <= self.config.od_b_target {
                s.history.pit_width_mhz = Some(width_mhz);
                return Ok(PitOutcome { state: s, background_od: bg, segments: used });
            }
        }
        Err(Error::BackgroundNotReached {
            achieved_od: bg,
            target_od: self.config.od_b_target,
            segments: self.config.max_pit_segments,
        })
    }

    fn offset(&self, state: &ClassPopulations, ground: usize) -> f64 {
        let excited = REFERENCE_CLASS.excited;
        state.offsets[IonClass { ground, excited }.index()]
    }

    /// Burn-back recipe moving the reference class from the auxiliary state
    /// into the comb state inside `width_mhz`. Each pass is followed by a
    /// clean-up of the storage state and of the other classes the burn-back
    /// band also repopulates. `strength` scales every duration.
    pub fn feature_recipe(&self, state: &ClassPopulations, width_mhz: f64, strength: f64) -> PumpRecipe {
        let half = 0.5 * width_mhz;
        let band = |c: f64| FrequencyPattern::Sweep { lo: c - half, hi: c + half };
        let mut bands = vec![
            band(self.offset(state, self.roles.auxiliary)),
            band(self.offset(state, self.roles.storage)),
        ];
        bands.extend(self.class_cleaning(state, width_mhz).into_iter().map(band));
        let dur = strength * self.config.segment_ms;
        let mut segments = Vec::new();
        if dur > 0.0 {
            for _ in 0..self.config.feature_cycles {
                segments.extend(bands.iter().map(|b| self.segment(b.clone(), dur)));
            }
        }
        PumpRecipe { segments }
    }

    /// Centre frequencies that empty the comb state of the unwanted classes
    /// while staying clear of the wanted class's comb-state transitions.
    ///
    /// Burning back on aux→e_ref also reaches ions whose aux→e_j transition
    /// (j ≠ ref) lies in the band; those sit at `off(aux,ref) − off(aux,j)`
    /// relative to the wanted class.
    pub fn class_cleaning(&self, state: &ClassPopulations, width_mhz: f64) -> Vec<f64> {
        let afc = self.roles.afc;
        let aux = self.roles.auxiliary;
        let off = |g: usize, e: usize| state.offsets[IonClass { ground: g, excited: e }.index()];
        let wanted: Vec<f64> = (0..3).map(|e| off(afc, e)).collect();
        (0..3)
            .filter(|&j| j != REFERENCE_CLASS.excited)
            .filter_map(|j| {
                let shift = off(aux, REFERENCE_CLASS.excited) - off(aux, j);
                (0..3)
                    .map(|l| shift + off(afc, l))
                    .map(|c| (c, wanted.iter().map(|w| (c - w).abs()).fold(f64::INFINITY, f64::min)))
                    .filter(|&(_, gap)| gap >= width_mhz)
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(c, _)| c)
            })
            .collect()
    }

    fn feature_peak(&self, state: &ClassPopulations, width_mhz: f64, strength: f64) -> Result<(ClassPopulations, f64)> {
        let s = self.feature_recipe(state, width_mhz, strength).apply(state, &self.config.strengths)?;
        let half = 0.5 * width_mhz;
        let peak = self
            .render(&s)?
            .od
            .iter()
            .zip(s.grid.values())
            .filter(|(_, d)| d.abs() <= half)
            .map(|(od, _)| *od)
            .fold(0.0, f64::max);
        Ok((s, peak))
    }

    /// Bring a single class back into the pit so that the rendered peak OD
    /// inside `width_mhz` reaches `target_od`.
    pub fn prepare_single_class_feature(
        &self,
        state: &ClassPopulations,
        target_od: f64,
        width_mhz: f64,
    ) -> Result<ClassPopulations> {
        let pit = state.history.pit_width_mhz.ok_or(Error::PitMissing)?;
        if !(width_mhz > 0.0) {
            return Err(Error::invalid("width_mhz", "must be positive"));
        }
        if width_mhz > pit {
            return Err(Error::FeatureWiderThanPit { feature_mhz: width_mhz, pit_mhz: pit });
        }
        let (_, current) = self.feature_peak(state, width_mhz, 0.0)?;
        if target_od <= current {
            return Ok(state.clone());
        }
        let mut hi = 0.25;
        let (mut best, mut f_hi) = self.feature_peak(state, width_mhz, hi)?;
        while f_hi < target_od {
            if hi >= 1024.0 {
                return Err(Error::FeatureUnreachable { target_od, max_od: f_hi });
            }
            hi *= 4.0;
            (best, f_hi) = self.feature_peak(state, width_mhz, hi)?;
        }
        // Illinois regula falsi on peak(strength) − target.
        let (mut lo, mut g_lo, mut g_hi) = (0.0, current - target_od, f_hi - target_od);
        let mut side = 0i8;
        let mut residual = g_hi;
        for _ in 0..60 {
            if residual <= 2e-3 * target_od || hi - lo <= 1e-9 * hi {
                break;
            }
            let x = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            let (s, p) = self.feature_peak(state, width_mhz, x)?;
            let g = p - target_od;
            if g < 0.0 {
                lo = x;
                g_lo = g;
                if side == -1 {
                    g_hi *= 0.5;
                }
                side = -1;
            } else {
                hi = x;
                g_hi = g;
                residual = g;
                best = s;
                if side == 1 {
                    g_lo *= 0.5;
                }
                side = 1;
            }
        }
        best.history.feature_width_mhz = Some(width_mhz);
        Ok(best)
    }

    /// Pump bands for a comb of period `delta_khz` and finesse `finesse`
    /// spanning `bandwidth_mhz` about the carrier: one band per gap.
    pub fn comb_bands(&self, grid: &DetuningGrid, delta_khz: f64, finesse: f64, bandwidth_mhz: f64) -> Result<Vec<(f64, f64)>> {
        if !(finesse > 1.0 && finesse.is_finite()) {
            return Err(Error::invalid("finesse", "must exceed 1"));
        }
        if !(delta_khz > 0.0 && bandwidth_mhz > 0.0) {
            return Err(Error::invalid("delta_khz", "period and bandwidth must be positive"));
        }
        let delta = delta_khz * 1e-3;
        let bins = delta / grid.step_mhz;
        if bins < 4.0 {
            return Err(Error::CombUnresolvable { what: "comb period", have_bins: bins, min_bins: 4 });
        }
        let tooth_bins = bins / finesse;
        if tooth_bins < 2.0 {
            return Err(Error::CombUnresolvable { what: "tooth width", have_bins: tooth_bins, min_bins: 2 });
        }
        let half_gap = 0.5 * delta * (1.0 - 1.0 / finesse);
        let m_max = (0.5 * bandwidth_mhz / delta).floor() as i64;
        Ok((-m_max..m_max)
            .map(|m| (m as f64 + 0.5) * delta)
            .map(|c| (c - half_gap, c + half_gap))
            .collect())
    }

    /// Carve an atomic frequency comb into an existing feature.
    pub fn prepare_afc(
        &self,
        state: &ClassPopulations,
        delta_khz: f64,
        finesse: f64,
        bandwidth_mhz: f64,
    ) -> Result<ClassPopulations> {
        let bands = self.comb_bands(&state.grid, delta_khz, finesse, bandwidth_mhz)?;
        if bands.is_empty() {
            return Err(Error::invalid("bandwidth_mhz", "narrower than one comb period"));
        }
        if let Some(pit) = state.history.pit_width_mhz {
            if bandwidth_mhz > pit {
                return Err(Error::FeatureWiderThanPit { feature_mhz: bandwidth_mhz, pit_mhz: pit });
            }
        }
        if self.config.rate_per_s == 0.0 {
            return Err(Error::invalid("rate_per_s", "comb pumping needs a non-zero rate"));
        }
        // Fixed sweep speed: a gap much wider than the pump linewidth receives
        // `afc_exposure` at its centre, narrower gaps proportionally less.
        let swept: f64 = bands.iter().map(|(lo, hi)| hi - lo).sum();
        let hwhm = 0.5e-3 * self.config.pump_linewidth_khz;
        let duration_ms = 1e3 * self.config.afc_exposure * swept / (self.config.rate_per_s * PI * hwhm);
        let pattern = FrequencyPattern::Comb(bands);
        self.step(state, &self.segment(pattern, duration_ms))
    }
}

/// Render the absorption profile of a population state.
///
/// Each bin's absorption strength `Σ n_g · w(g,e)` over the classes that
/// resonate there is spread with a homogeneous Lorentzian (bin-integrated and
/// normalised per source bin, so the total is conserved) and scaled so the
/// unpumped line has OD `peak_od`.
pub fn absorption_profile(
    state: &ClassPopulations,
    peak_od: f64,
    strengths: &[[f64; 3]; 3],
    linewidth_khz: f64,
) -> Result<SpectralProfile> {
    if !(peak_od >= 0.0 && linewidth_khz > 0.0) {
        return Err(Error::invalid("peak_od", "OD must be >= 0 and linewidth positive"));
    }
    let unpumped: f64 = strengths.iter().flatten().sum::<f64>() / 3.0;
    let scale = peak_od / unpumped;
    let n = state.bins();
    let source: Vec<f64> = (0..n)
        .map(|b| {
            IonClass::all()
                .map(|c| state.get(b, c)[c.ground] * strengths[c.ground][c.excited])
                .sum()
        })
        .collect();
    let hwhm = 0.5e-3 * linewidth_khz;
    let step = state.grid.step_mhz;
    let reach = ((1e3 * hwhm / step).ceil() as usize).clamp(1, n);
    let kernel: Vec<f64> = (0..=reach)
        .map(|k| {
            let k = k as f64;
            (((k + 0.5) * step / hwhm).atan() - ((k - 0.5) * step / hwhm).atan()) / PI
        })
        .collect();
    let mut od = vec![0.0; n];
    for (b, &s) in source.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let lo = b.saturating_sub(reach);
        let hi = (b + reach).min(n - 1);
        let z: f64 = (lo..=hi).map(|o| kernel[o.abs_diff(b)]).sum();
        let w = scale * s / z;
        for (o, v) in od[lo..=hi].iter_mut().enumerate() {
            *v += w * kernel[(lo + o).abs_diff(b)];
        }
    }
    SpectralProfile::new(state.grid.clone(), od)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectro::LevelScheme;
    use proptest::prelude::*;

    fn small_state(half: f64, step: f64) -> ClassPopulations {
        let grid = DetuningGrid::symmetric(half, step).unwrap();
        ClassPopulations::thermal(grid, &LevelScheme::default()).unwrap()
    }

    fn seg(pattern: FrequencyPattern, duration_ms: f64) -> PumpSegment {
        PumpSegment {
            pattern,
            duration_ms,
            rate_per_s: 2.0e5,
            branching: [[1.0 / 3.0; 3]; 3],
            linewidth_khz: 50.0,
        }
    }

    const W: [[f64; 3]; 3] = [[1.0; 3]; 3];

    #[test]
    fn zero_duration_and_zero_rate_are_identity() {
        let s = small_state(3.0, 0.05);
        let out = pump_step(&s, &seg(FrequencyPattern::Fixed(0.0), 0.0), &W).unwrap();
        assert_eq!(out, s);
        let mut z = seg(FrequencyPattern::Sweep { lo: -1.0, hi: 1.0 }, 10.0);
        z.rate_per_s = 0.0;
        assert_eq!(pump_step(&s, &z, &W).unwrap(), s);
    }

    #[test]
    fn long_fixed_pump_empties_resonant_state() {
        let grid = DetuningGrid::new(0.0, 0.01, 2).unwrap();
        let s = ClassPopulations::thermal(grid, &LevelScheme::default()).unwrap();
        let mut p = seg(FrequencyPattern::Fixed(0.0), 5.0);
        p.linewidth_khz = 1.0;
        p.branching[1] = [0.2, 0.5, 0.3];
        let out = pump_step(&s, &p, &W).unwrap();
        let n = out.get(0, REFERENCE_CLASS);
        assert!(n[0] < 1e-8, "{n:?}");
        let moved = 1.0 / 3.0;
        assert!((n[1] - (1.0 / 3.0 + moved * 0.5 / 0.8)).abs() < 1e-4, "{n:?}");
        assert!((n[2] - (1.0 / 3.0 + moved * 0.3 / 0.8)).abs() < 1e-4, "{n:?}");
    }

    #[test]
    fn split_segment_matches_merged() {
        let s = small_state(4.0, 0.05);
        let pat = FrequencyPattern::Sweep { lo: -1.0, hi: 1.5 };
        let a = pump_step(&s, &seg(pat.clone(), 0.7), &W).unwrap();
        let a = pump_step(&a, &seg(pat.clone(), 1.3), &W).unwrap();
        let b = pump_step(&s, &seg(pat, 2.0), &W).unwrap();
        for (x, y) in a.entries().iter().zip(b.entries()) {
            for k in 0..3 {
                assert!((x[k] - y[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sweep_response_is_flat_inside_wide_band() {
        let p = FrequencyPattern::Sweep { lo: -5.0, hi: 5.0 };
        let inside = p.response(0.0, 0.025);
        assert!((inside - PI * 0.025 / 10.0).abs() < 1e-4);
        assert!(p.response(8.0, 0.025) < 1e-2 * inside);
        let c = FrequencyPattern::Comb(vec![(-1.0, 0.0), (2.0, 5.0)]);
        let a = FrequencyPattern::Sweep { lo: -1.0, hi: 0.0 }.response(0.5, 0.025);
        let b = FrequencyPattern::Sweep { lo: 2.0, hi: 5.0 }.response(0.5, 0.025);
        assert!((c.response(0.5, 0.025) - (0.25 * a + 0.75 * b)).abs() < 1e-15);
        assert_eq!(FrequencyPattern::Sweep { lo: 1.0, hi: 1.0 }.response(1.0, 0.1), 1.0);
    }

    #[test]
    fn malformed_segments_are_rejected() {
        let s = small_state(1.0, 0.1);
        let mut bad = seg(FrequencyPattern::Fixed(0.0), 1.0);
        bad.branching[0] = [0.5, 0.5, 0.1];
        assert!(pump_step(&s, &bad, &W).is_err());
        let mut neg = seg(FrequencyPattern::Fixed(0.0), 1.0);
        neg.rate_per_s = -1.0;
        assert!(pump_step(&s, &neg, &W).is_err());
        let back = seg(FrequencyPattern::Sweep { lo: 1.0, hi: -1.0 }, 1.0);
        assert!(back.validate().is_err());
        let recipe = PumpRecipe { segments: vec![seg(FrequencyPattern::Fixed(0.0), 0.0)] };
        assert!(recipe.validate().is_err());
    }

    #[test]
    fn unpumped_rendering_is_flat() {
        let s = small_state(10.0, 0.01);
        let p = absorption_profile(&s, 12.0, &W, 6.4).unwrap();
        for (d, od) in s.grid.values().zip(&p.od) {
            if d.abs() <= 8.0 {
                assert!((od - 12.0).abs() < 0.12, "{d} {od}");
            }
        }
    }

    #[test]
    fn sum_rule_under_uniform_strengths() {
        let scheme = LevelScheme {
            ground_splittings_mhz: [1.0, 1.5],
            excited_splittings_mhz: [0.5, 0.7],
            ..LevelScheme::default()
        };
        let grid = DetuningGrid::symmetric(10.0, 0.01).unwrap();
        let s = ClassPopulations::thermal(grid, &scheme).unwrap();
        let before = absorption_profile(&s, 5.0, &W, 6.4).unwrap().integral();
        let mut p = seg(FrequencyPattern::Sweep { lo: -0.5, hi: 0.8 }, 20.0);
        p.linewidth_khz = 1.0;
        p.branching = [[0.6, 0.3, 0.1], [0.1, 0.1, 0.8], [0.2, 0.5, 0.3]];
        let out = pump_step(&s, &p, &W).unwrap();
        let pumped = absorption_profile(&out, 5.0, &W, 6.4).unwrap();
        assert!(pumped.at(0.0) < 4.0, "pumping had no visible effect");
        assert!((pumped.integral() - before).abs() < 1e-6 * before);
    }

    #[test]
    fn pit_width_zero_is_identity() {
        let hb = HoleBurner::new(PumpConfig::default(), GroundRoles::default()).unwrap();
        let s = small_state(3.0, 0.05);
        let out = hb.prepare_pit(&s, 0.0).unwrap();
        assert_eq!(out.state, s);
        assert_eq!(out.segments, 0);
        assert!(hb.prepare_pit(&s, 7.0).is_err());
    }

    #[test]
    fn unreachable_background_reports_achieved_od() {
        let cfg = PumpConfig { max_pit_segments: 1, od_b_target: 0.0, ..PumpConfig::default() };
        let hb = HoleBurner::new(cfg, GroundRoles::default()).unwrap();
        match hb.prepare_pit(&small_state(6.0, 0.05), 4.0) {
            Err(Error::BackgroundNotReached { achieved_od, segments, .. }) => {
                assert!(achieved_od > 0.0 && achieved_od < 12.0);
                assert_eq!(segments, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn feature_needs_pit_and_must_fit() {
        let hb = HoleBurner::new(PumpConfig::default(), GroundRoles::default()).unwrap();
        let s = small_state(3.0, 0.05);
        assert_eq!(hb.prepare_single_class_feature(&s, 2.0, 1.0), Err(Error::PitMissing));
        let mut pitted = s.clone();
        pitted.history.pit_width_mhz = Some(2.0);
        assert!(matches!(
            hb.prepare_single_class_feature(&pitted, 2.0, 3.0),
            Err(Error::FeatureWiderThanPit { .. })
        ));
    }

    #[test]
    fn comb_resolution_limits() {
        let hb = HoleBurner::new(PumpConfig::default(), GroundRoles::default()).unwrap();
        let grid = DetuningGrid::symmetric(5.0, 0.01).unwrap();
        match hb.comb_bands(&grid, 30.0, 2.0, 2.0) {
            Err(Error::CombUnresolvable { min_bins, .. }) => assert_eq!(min_bins, 4),
            other => panic!("{other:?}"),
        }
        match hb.comb_bands(&grid, 100.0, 8.0, 2.0) {
            Err(Error::CombUnresolvable { what, min_bins, .. }) => {
                assert_eq!(what, "tooth width");
                assert_eq!(min_bins, 2);
            }
            other => panic!("{other:?}"),
        }
        assert!(hb.comb_bands(&grid, 400.0, 1.0, 2.0).is_err());
        let bands = hb.comb_bands(&grid, 400.0, 4.0, 4.0).unwrap();
        assert_eq!(bands.len(), 10);
        assert!((bands[5].0 - 0.05).abs() < 1e-12 && (bands[5].1 - 0.35).abs() < 1e-12);
    }

    #[test]
    fn hole_burner_rejects_bad_config() {
        let c = PumpConfig { strengths: [[0.0; 3]; 3], ..PumpConfig::default() };
        assert!(HoleBurner::new(c, GroundRoles::default()).is_err());
        let roles = GroundRoles { afc: 0, storage: 0, auxiliary: 2 };
        assert!(HoleBurner::new(PumpConfig::default(), roles).is_err());
    }

    fn pattern() -> impl Strategy<Value = FrequencyPattern> {
        prop_oneof![
            (-3.0..3.0f64).prop_map(FrequencyPattern::Fixed),
            (-3.0..3.0f64, 0.0..2.0f64).prop_map(|(lo, w)| FrequencyPattern::Sweep { lo, hi: lo + w }),
            prop::collection::vec((-3.0..3.0f64, 0.0..0.5f64), 1..4)
                .prop_map(|v| FrequencyPattern::Comb(v.into_iter().map(|(lo, w)| (lo, lo + w)).collect())),
        ]
    }

    fn branching() -> impl Strategy<Value = [[f64; 3]; 3]> {
        prop::array::uniform3(prop::array::uniform3(0.01..1.0f64)).prop_map(|rows| {
            rows.map(|r| {
                let s: f64 = r.iter().sum();
                [r[0] / s, r[1] / s, 1.0 - r[0] / s - r[1] / s]
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn recipes_conserve_population(
            segs in prop::collection::vec((pattern(), 0.01..20.0f64, 0.0..5e5f64, branching(), 5.0..200.0f64), 1..4)
        ) {
            let s = small_state(2.5, 0.05);
            let recipe = PumpRecipe {
                segments: segs
                    .into_iter()
                    .map(|(pattern, duration_ms, rate_per_s, branching, linewidth_khz)| PumpSegment {
                        pattern, duration_ms, rate_per_s, branching, linewidth_khz,
                    })
                    .collect(),
            };
            let out = recipe.apply(&s, &W).unwrap();
            prop_assert!(out.max_sum_error() <= 1e-9);
            prop_assert!(out.min_fraction() >= -1e-12);
            let p = absorption_profile(&out, 3.0, &W, 6.4).unwrap();
            prop_assert!(p.od.iter().all(|v| *v >= 0.0));
            prop_assert_eq!(recipe.apply(&s, &W).unwrap(), out);
        }
    }
}
