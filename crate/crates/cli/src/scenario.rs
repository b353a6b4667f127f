//! Typed scenarios built from a parsed [`Document`].

use std::f64::consts::PI;

use afcmem::beam::{BeamGeometry, RabiCalibration, WaveguideMode, FACET_RADIUS_UM};
use afcmem::bloch::{gaussian_peak_for_area, Mode, PulseRole};
use afcmem::pumping::PumpConfig;
use afcmem::spectro::{
    build_pulse, CombShape, DetuningGrid, GroundRoles, LevelScheme, PitShape, PulseEnvelope, PulseKind, PulseSpec,
    SpectralProfile,
};

use crate::config::{Document, Effective, Reader};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    AfcPrep,
    AfcSweep,
    EchoDecay,
    Nutation,
    SpinWave,
    SpinDecay,
    Enhancement,
    Bloch,
}

const KINDS: [(&str, Kind); 8] = [
    ("afc-prep", Kind::AfcPrep),
    ("afc-sweep", Kind::AfcSweep),
    ("echo-decay", Kind::EchoDecay),
    ("nutation", Kind::Nutation),
    ("spin-wave", Kind::SpinWave),
    ("spin-decay", Kind::SpinDecay),
    ("enhancement", Kind::Enhancement),
    ("bloch", Kind::Bloch),
];

impl Kind {
    pub fn name(self) -> &'static str {
        KINDS.iter().find(|(_, k)| *k == self).map(|(n, _)| *n).unwrap_or("?")
    }

    fn sections(self) -> &'static [&'static str] {
        match self {
            Kind::AfcPrep => &["scenario", "scheme", "ensemble", "preparation"],
            Kind::AfcSweep => &["scenario", "ensemble", "sequence", "engine", "analysis"],
            Kind::Enhancement => &["scenario", "beam"],
            Kind::Bloch => &["scenario", "scheme", "ensemble", "sequence", "engine"],
            _ => &["scenario", "scheme", "ensemble", "sequence", "engine", "analysis"],
        }
    }

    fn uses_spin_grid(self) -> bool {
        matches!(self, Kind::SpinWave | Kind::SpinDecay)
    }
}

/// Built-in scenarios shipped with the binary.
pub const BUILTIN: [(&str, &str); 7] = [
    ("fig2-echo-decay", include_str!("../scenarios/fig2-echo-decay.ini")),
    ("fig3-nutation", include_str!("../scenarios/fig3-nutation.ini")),
    ("fig4-afc-prep", include_str!("../scenarios/fig4-afc-prep.ini")),
    ("fig5a-afc-sweep", include_str!("../scenarios/fig5a-afc-sweep.ini")),
    ("fig5b-spinwave", include_str!("../scenarios/fig5b-spinwave.ini")),
    ("fig5c-spin-decay", include_str!("../scenarios/fig5c-spin-decay.ini")),
    ("enhancement-report", include_str!("../scenarios/enhancement-report.ini")),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Absorption profile families.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileCfg {
    Flat { od: f64 },
    Window(PitShape),
    /// One comb per period in `deltas_khz`; `shape.delta_mhz` holds the first.
    Comb { shape: CombShape, deltas_khz: Vec<f64> },
    Gaussian { fwhm_mhz: f64, od: f64 },
}

impl ProfileCfg {
    /// Profiles to run, with a label each.
    pub fn render_all(&self, grid: &DetuningGrid) -> Result<Vec<(String, SpectralProfile)>, CliError> {
        Ok(match self {
            ProfileCfg::Flat { od } => vec![("flat".into(), SpectralProfile::flat(grid.clone(), *od)?)],
            ProfileCfg::Window(p) => vec![("window".into(), p.render(grid)?)],
            ProfileCfg::Gaussian { fwhm_mhz, od } => {
                let k = 4.0 * std::f64::consts::LN_2 / (fwhm_mhz * fwhm_mhz);
                vec![("feature".into(), SpectralProfile::from_fn(grid.clone(), |f| od * (-k * f * f).exp())?)]
            }
            ProfileCfg::Comb { shape, deltas_khz } => deltas_khz
                .iter()
                .map(|d| {
                    let c = CombShape { delta_mhz: d * 1e-3, ..shape.clone() };
                    check_comb(&c, grid)?;
                    Ok((format!("delta_{d}khz"), c.render(grid)?))
                })
                .collect::<Result<_, CliError>>()?,
        })
    }

    pub fn background(&self) -> Option<&PitShape> {
        match self {
            ProfileCfg::Window(p) => Some(p),
            ProfileCfg::Comb { shape, .. } => Some(&shape.pit),
            _ => None,
        }
    }
}

fn check_comb(c: &CombShape, grid: &DetuningGrid) -> Result<(), CliError> {
    let bins = c.delta_mhz / grid.step_mhz;
    if bins < 4.0 {
        return Err(afcmem::Error::CombUnresolvable { what: "comb period", have_bins: bins, min_bins: 4 }.into());
    }
    let tooth = c.tooth_fwhm_mhz() / grid.step_mhz;
    if tooth < 2.0 {
        return Err(afcmem::Error::CombUnresolvable { what: "tooth width", have_bins: tooth, min_bins: 2 }.into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preparation {
    pub pump: PumpConfig,
    pub pit_width_mhz: f64,
    pub feature_width_mhz: f64,
    pub feature_od: f64,
    pub delta_khz: f64,
    pub finesse: f64,
    pub comb_bandwidth_mhz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseCfg {
    pub index: usize,
    pub role: PulseRole,
    pub spec: PulseSpec,
    pub centre_us: f64,
}

impl PulseCfg {
    pub fn build(&self) -> Result<PulseEnvelope, CliError> {
        Ok(build_pulse(&self.spec)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    pub dt_us: f64,
    pub mode: Mode,
    pub t_end_us: Option<f64>,
    pub tail_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub tau_us: Vec<f64>,
    pub echo_window_us: f64,
    pub power_mw: Vec<f64>,
    pub calibration: RabiCalibration,
    pub notch_mhz: Option<f64>,
    pub t_s_us: Vec<f64>,
    pub eta_afc: f64,
    pub eta_t: f64,
    pub waveguide_transmission: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub geometry: BeamGeometry,
    pub mode: WaveguideMode,
    pub facet_radius_um: f64,
    pub waveguide: RabiCalibration,
    pub bulk: RabiCalibration,
    pub operating_power_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub grid: DetuningGrid,
    pub profile: ProfileCfg,
    pub slabs: usize,
    pub annuli: usize,
    pub second_class: bool,
    pub second_class_population: f64,
    pub gamma_inh_khz: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub scheme: LevelScheme,
    pub ensemble: Ensemble,
    pub preparation: Option<Preparation>,
    pub pulses: Vec<PulseCfg>,
    pub engine: Engine,
    pub analysis: Analysis,
    pub beam: Beam,
    pub effective: Effective,
}

impl Scenario {
    pub fn parse(text: &str, default_name: &str) -> Result<Scenario, CliError> {
        let doc = Document::parse(text)?;
        let head = Reader::new(&doc, "scenario");
        if !head.present() {
            return Err(CliError::Schema { line: 1, field: "[scenario]".into(), reason: "missing section".into() });
        }
        let kind_str = head.str_opt("kind").ok_or_else(|| head.error("kind", "missing key"))?;
        let kind = head.choice("kind", Kind::Bloch, &KINDS).map_err(|_| {
            let names: Vec<&str> = KINDS.iter().map(|(n, _)| *n).collect();
            head.error("kind", format!("`{kind_str}` is not one of {}", names.join(", ")))
        })?;
        let name = head.str_or("name", default_name).to_string();
        doc.check_sections(kind.sections()).map_err(|e| match e {
            CliError::Schema { line, field, .. } => {
                CliError::Schema { line, field, reason: format!("section not used by kind `{}`", kind.name()) }
            }
            e => e,
        })?;
        let mut eff = Effective::default();
        eff.push("scenario", "name", &name);
        eff.push("scenario", "kind", kind.name());

        let uses = |s: &str| kind.sections().contains(&s);
        let scheme = if uses("scheme") { parse_scheme(&Reader::new(&doc, "scheme"), &mut eff)? } else { LevelScheme::default() };
        let ensemble = parse_ensemble(&Reader::new(&doc, "ensemble"), kind, &scheme, &mut eff)?;
        let preparation = if uses("preparation") {
            Some(parse_preparation(&Reader::new(&doc, "preparation"), &mut eff)?)
        } else {
            None
        };
        let engine = parse_engine(&Reader::new(&doc, "engine"), kind, &mut eff)?;
        let analysis = parse_analysis(&Reader::new(&doc, "analysis"), kind, &scheme, &ensemble, &mut eff)?;
        let mut pulses = Vec::new();
        if uses("sequence") {
            for (n, sec) in doc.numbered("sequence")? {
                pulses.push(parse_pulse(&Reader::of(sec), n, &engine, &analysis, &mut eff)?);
            }
            check_roles(&doc, kind, &pulses)?;
        }
        let beam = if uses("beam") { parse_beam(&Reader::new(&doc, "beam"), &mut eff)? } else { default_beam() };
        doc.check_consumed()?;
        Ok(Scenario { name, kind, scheme, ensemble, preparation, pulses, engine, analysis, beam, effective: eff })
    }

    pub fn pulse(&self, role: PulseRole) -> Option<&PulseCfg> {
        self.pulses.iter().find(|p| p.role == role)
    }
}

fn parse_scheme(r: &Reader, eff: &mut Effective) -> Result<LevelScheme, CliError> {
    let d = LevelScheme::default();
    let ground = r.pair_or("ground_splittings_mhz", d.ground_splittings_mhz)?;
    let excited = r.pair_or("excited_splittings_mhz", d.excited_splittings_mhz)?;
    let roles = GroundRoles {
        afc: r.usize_or("afc_state", d.roles.afc)?,
        storage: r.usize_or("storage_state", d.roles.storage)?,
        auxiliary: r.usize_or("auxiliary_state", d.roles.auxiliary)?,
    };
    let s = LevelScheme {
        ground_splittings_mhz: ground,
        excited_splittings_mhz: excited,
        inhom_fwhm_ghz: r.f64_or("inhom_fwhm_ghz", d.inhom_fwhm_ghz)?,
        t2_opt_us: r.f64_or("t2_us", d.t2_opt_us)?,
        t1_opt_us: r.f64_or("t1_us", d.t1_opt_us)?,
        gamma_inh_spin_khz: r.f64_or("gamma_inh_khz", d.gamma_inh_spin_khz)?,
        roles,
    };
    s.validate().map_err(|e| r.error("", e.to_string()))?;
    eff.list("scheme", "ground_splittings_mhz", &s.ground_splittings_mhz);
    eff.list("scheme", "excited_splittings_mhz", &s.excited_splittings_mhz);
    eff.push("scheme", "inhom_fwhm_ghz", s.inhom_fwhm_ghz);
    eff.push("scheme", "t2_us", s.t2_opt_us);
    eff.push("scheme", "t1_us", s.t1_opt_us);
    eff.push("scheme", "gamma_inh_khz", s.gamma_inh_spin_khz);
    eff.push("scheme", "afc_state", s.roles.afc);
    eff.push("scheme", "storage_state", s.roles.storage);
    eff.push("scheme", "auxiliary_state", s.roles.auxiliary);
    Ok(s)
}

fn parse_window(r: &Reader, eff: &mut Effective) -> Result<PitShape, CliError> {
    let d = PitShape::default();
    let p = PitShape {
        width_mhz: r.positive_or("window_mhz", d.width_mhz)?,
        background_od: r.non_negative_or("background_od", d.background_od)?,
        outside_od: r.non_negative_or("outside_od", d.outside_od)?,
        edge_mhz: r.non_negative_or("edge_mhz", d.edge_mhz)?,
    };
    eff.push("ensemble", "window_mhz", p.width_mhz);
    eff.push("ensemble", "background_od", p.background_od);
    eff.push("ensemble", "outside_od", p.outside_od);
    eff.push("ensemble", "edge_mhz", p.edge_mhz);
    Ok(p)
}

fn parse_ensemble(r: &Reader, kind: Kind, scheme: &LevelScheme, eff: &mut Effective) -> Result<Ensemble, CliError> {
    let half = r.positive_or("half_span_mhz", 25.0)?;
    let bin = r.positive_or("bin_khz", 10.0)?;
    let grid = DetuningGrid::symmetric(half, bin * 1e-3).map_err(|e| r.error("bin_khz", e.to_string()))?;
    eff.push("ensemble", "half_span_mhz", half);
    eff.push("ensemble", "bin_khz", bin);
    if kind == Kind::Enhancement {
        return Ok(Ensemble {
            grid,
            profile: ProfileCfg::Flat { od: 0.0 },
            slabs: 1,
            annuli: 1,
            second_class: false,
            second_class_population: 0.0,
            gamma_inh_khz: 0.0,
        });
    }
    let default_profile = match kind {
        Kind::AfcSweep | Kind::SpinWave | Kind::SpinDecay => "comb",
        Kind::Nutation => "gaussian",
        _ => "window",
    };
    let profile = if kind == Kind::AfcPrep {
        ProfileCfg::Flat { od: 0.0 }
    } else {
        let name = r.choice(
            "profile",
            default_profile,
            &[("flat", "flat"), ("window", "window"), ("comb", "comb"), ("gaussian", "gaussian")],
        )?;
        eff.push("ensemble", "profile", name);
        match name {
            "flat" => {
                let od = r.non_negative_or("od", 0.0)?;
                eff.push("ensemble", "od", od);
                ProfileCfg::Flat { od }
            }
            "window" => ProfileCfg::Window(parse_window(r, eff)?),
            "gaussian" => {
                let fwhm = r.positive_or("feature_fwhm_mhz", 12.0)?;
                let od = r.non_negative_or("feature_od", 0.1)?;
                eff.push("ensemble", "feature_fwhm_mhz", fwhm);
                eff.push("ensemble", "feature_od", od);
                ProfileCfg::Gaussian { fwhm_mhz: fwhm, od }
            }
            _ => {
                let deltas = r.list_or("delta_khz", &[400.0])?;
                if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
                    return Err(r.error("delta_khz", "periods must be positive"));
                }
                if kind != Kind::AfcSweep && deltas.len() > 1 {
                    return Err(r.error("delta_khz", format!("kind `{}` takes a single period", kind.name())));
                }
                let finesse = r.f64_or("finesse", 3.0)?;
                if !(finesse > 1.0) {
                    return Err(r.error("finesse", "must exceed 1"));
                }
                let tooth_od = r.non_negative_or("tooth_od", 3.11)?;
                let bandwidth = r.positive_or("comb_bandwidth_mhz", 4.0)?;
                let broadening = r.non_negative_or("broadening_khz", 154.0)?;
                eff.list("ensemble", "delta_khz", &deltas);
                eff.push("ensemble", "finesse", finesse);
                eff.push("ensemble", "tooth_od", tooth_od);
                eff.push("ensemble", "comb_bandwidth_mhz", bandwidth);
                eff.push("ensemble", "broadening_khz", broadening);
                let pit = parse_window(r, eff)?;
                ProfileCfg::Comb {
                    shape: CombShape {
                        delta_mhz: deltas[0] * 1e-3,
                        finesse,
                        tooth_od,
                        bandwidth_mhz: bandwidth,
                        broadening_mhz: broadening * 1e-3,
                        pit,
                    },
                    deltas_khz: deltas,
                }
            }
        }
    };
    let is_bloch = !matches!(kind, Kind::AfcPrep | Kind::AfcSweep);
    let (mut slabs, mut annuli) = (1, 1);
    let (mut second_class, mut population, mut gamma) = (false, 0.0, 0.0);
    if is_bloch {
        slabs = r.usize_or("slabs", afcmem::bloch::DEFAULT_SLABS)?;
        if slabs == 0 {
            return Err(r.error("slabs", "at least one slab"));
        }
        annuli = r.usize_or("annuli", if kind == Kind::Nutation { afcmem::bloch::DEFAULT_ANNULI } else { 1 })?;
        if annuli == 0 {
            return Err(r.error("annuli", "at least one annulus"));
        }
        eff.push("ensemble", "slabs", slabs);
        eff.push("ensemble", "annuli", annuli);
    }
    if kind == Kind::Nutation {
        second_class = r.bool_or("second_class", true)?;
        population = r.f64_or("second_class_population", 0.1)?;
        if !(0.0..=1.0).contains(&population) {
            return Err(r.error("second_class_population", "must lie in [0, 1]"));
        }
        eff.push("ensemble", "second_class", second_class);
        eff.push("ensemble", "second_class_population", population);
    }
    if kind.uses_spin_grid() {
        gamma = scheme.gamma_inh_spin_khz;
    }
    Ok(Ensemble { grid, profile, slabs, annuli, second_class, second_class_population: population, gamma_inh_khz: gamma })
}

fn parse_preparation(r: &Reader, eff: &mut Effective) -> Result<Preparation, CliError> {
    let d = PumpConfig::default();
    let pump = PumpConfig {
        peak_od: r.positive_or("peak_od", d.peak_od)?,
        pump_linewidth_khz: r.positive_or("pump_linewidth_khz", d.pump_linewidth_khz)?,
        absorption_linewidth_khz: r.positive_or("absorption_linewidth_khz", d.absorption_linewidth_khz)?,
        rate_per_s: r.non_negative_or("rate_per_s", d.rate_per_s)?,
        segment_ms: r.positive_or("segment_ms", d.segment_ms)?,
        max_pit_segments: r.usize_or("max_pit_segments", d.max_pit_segments)?,
        od_b_target: r.non_negative_or("od_b_target", d.od_b_target)?,
        feature_cycles: r.usize_or("feature_cycles", d.feature_cycles)?,
        afc_exposure: r.positive_or("afc_exposure", d.afc_exposure)?,
        ..d
    };
    let p = Preparation {
        pit_width_mhz: r.non_negative_or("pit_width_mhz", 18.0)?,
        feature_width_mhz: r.positive_or("feature_width_mhz", 4.0)?,
        feature_od: r.non_negative_or("feature_od", 2.35)?,
        delta_khz: r.positive_or("delta_khz", 400.0)?,
        finesse: r.f64_or("finesse", 3.0)?,
        comb_bandwidth_mhz: r.positive_or("comb_bandwidth_mhz", 4.0)?,
        pump,
    };
    if !(p.finesse > 1.0) {
        return Err(r.error("finesse", "must exceed 1"));
    }
    for (k, v) in [
        ("peak_od", p.pump.peak_od),
        ("pump_linewidth_khz", p.pump.pump_linewidth_khz),
        ("absorption_linewidth_khz", p.pump.absorption_linewidth_khz),
        ("rate_per_s", p.pump.rate_per_s),
        ("segment_ms", p.pump.segment_ms),
        ("od_b_target", p.pump.od_b_target),
        ("afc_exposure", p.pump.afc_exposure),
        ("pit_width_mhz", p.pit_width_mhz),
        ("feature_width_mhz", p.feature_width_mhz),
        ("feature_od", p.feature_od),
        ("delta_khz", p.delta_khz),
        ("finesse", p.finesse),
        ("comb_bandwidth_mhz", p.comb_bandwidth_mhz),
    ] {
        eff.push("preparation", k, v);
    }
    eff.push("preparation", "max_pit_segments", p.pump.max_pit_segments);
    eff.push("preparation", "feature_cycles", p.pump.feature_cycles);
    Ok(p)
}

fn parse_engine(r: &Reader, kind: Kind, eff: &mut Effective) -> Result<Engine, CliError> {
    let default_dt = match kind {
        Kind::EchoDecay => 10.0,
        Kind::SpinWave | Kind::SpinDecay => 5.0,
        _ => 2.0,
    };
    let dt_ns = r.positive_or("dt_ns", default_dt)?;
    eff.push("engine", "dt_ns", dt_ns);
    let mut e = Engine { dt_us: dt_ns * 1e-3, mode: Mode::TwoLevel, t_end_us: None, tail_us: 0.0 };
    match kind {
        Kind::Bloch => {
            e.mode = r.choice("mode", Mode::TwoLevel, &[("two-level", Mode::TwoLevel), ("lambda", Mode::Lambda)])?;
            let t_end = r.f64_opt("t_end_us")?.ok_or_else(|| r.error("t_end_us", "missing key"))?;
            e.t_end_us = Some(t_end);
            eff.push("engine", "mode", if e.mode == Mode::TwoLevel { "two-level" } else { "lambda" });
            eff.push("engine", "t_end_us", t_end);
        }
        Kind::EchoDecay | Kind::SpinWave | Kind::SpinDecay => {
            e.tail_us = r.non_negative_or("tail_us", if kind == Kind::EchoDecay { 0.5 } else { 0.3 })?;
            eff.push("engine", "tail_us", e.tail_us);
        }
        _ => {}
    }
    Ok(e)
}

fn parse_analysis(
    r: &Reader,
    kind: Kind,
    scheme: &LevelScheme,
    ens: &Ensemble,
    eff: &mut Effective,
) -> Result<Analysis, CliError> {
    let wg = RabiCalibration::waveguide();
    let mut a = Analysis {
        tau_us: Vec::new(),
        echo_window_us: 0.6,
        power_mw: Vec::new(),
        calibration: wg,
        notch_mhz: None,
        t_s_us: Vec::new(),
        eta_afc: 0.083,
        eta_t: 0.5,
        waveguide_transmission: 0.5,
    };
    let positive_list = |key: &str, default: &[f64]| -> Result<Vec<f64>, CliError> {
        let v = r.list_or(key, default)?;
        if v.is_empty() || v.iter().any(|x| !(*x > 0.0)) {
            return Err(r.error(key, "values must be positive"));
        }
        Ok(v)
    };
    match kind {
        Kind::AfcSweep => {
            a.waveguide_transmission = r.f64_or("waveguide_transmission", 0.5)?;
            if !(a.waveguide_transmission > 0.0 && a.waveguide_transmission <= 1.0) {
                return Err(r.error("waveguide_transmission", "must lie in (0, 1]"));
            }
            eff.push("analysis", "waveguide_transmission", a.waveguide_transmission);
        }
        Kind::EchoDecay => {
            a.tau_us = positive_list("tau_us", &[5.0, 10.0, 15.0, 20.0])?;
            if a.tau_us.len() < 3 {
                return Err(r.error("tau_us", "the decay fit needs at least three delays"));
            }
            a.echo_window_us = r.positive_or("echo_window_ns", 600.0)? * 1e-3;
            eff.list("analysis", "tau_us", &a.tau_us);
            eff.push("analysis", "echo_window_ns", a.echo_window_us * 1e3);
        }
        Kind::Nutation => {
            if r.has("power_mw") {
                a.power_mw = positive_list("power_mw", &[])?;
            }
            a.calibration = RabiCalibration {
                power_mw: r.positive_or("calibration_power_mw", wg.power_mw)?,
                rabi: 2.0 * PI * r.positive_or("calibration_rabi_mhz", wg.rabi / (2.0 * PI))?,
            };
            let notch_default = if ens.second_class { scheme.ground_splittings_mhz[0] } else { 0.0 };
            let notch = r.non_negative_or("notch_mhz", notch_default)?;
            a.notch_mhz = (notch > 0.0).then_some(notch);
            eff.list("analysis", "power_mw", &a.power_mw);
            eff.push("analysis", "calibration_power_mw", a.calibration.power_mw);
            eff.push("analysis", "calibration_rabi_mhz", a.calibration.rabi / (2.0 * PI));
            eff.push("analysis", "notch_mhz", notch);
        }
        Kind::SpinWave | Kind::SpinDecay => {
            let default: &[f64] = if kind == Kind::SpinWave { &[3.6] } else { &[3.6, 6.0, 9.0, 12.5] };
            a.t_s_us = positive_list("t_s_us", default)?;
            if kind == Kind::SpinWave && a.t_s_us.len() != 1 {
                return Err(r.error("t_s_us", "kind `spin-wave` takes a single storage time"));
            }
            if kind == Kind::SpinDecay && a.t_s_us.len() < 3 {
                return Err(r.error("t_s_us", "the decay fit needs at least three storage times"));
            }
            eff.list("analysis", "t_s_us", &a.t_s_us);
            if kind == Kind::SpinWave {
                a.eta_afc = r.f64_or("eta_afc", a.eta_afc)?;
                a.eta_t = r.f64_or("eta_t", a.eta_t)?;
                for (k, v) in [("eta_afc", a.eta_afc), ("eta_t", a.eta_t)] {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(r.error(k, "must lie in [0, 1]"));
                    }
                    eff.push("analysis", k, v);
                }
            }
        }
        _ => {}
    }
    Ok(a)
}

const ROLES: [(&str, PulseRole); 4] = [
    ("input", PulseRole::Input),
    ("refocus", PulseRole::Refocus),
    ("control", PulseRole::Control),
    ("probe", PulseRole::Probe),
];

const SHAPES: [(&str, PulseKind); 4] = [
    ("gaussian", PulseKind::Gaussian),
    ("square", PulseKind::Square),
    ("chirped", PulseKind::ChirpedGaussian),
    ("chirped-gaussian", PulseKind::ChirpedGaussian),
];

fn parse_pulse(r: &Reader, index: usize, engine: &Engine, analysis: &Analysis, eff: &mut Effective) -> Result<PulseCfg, CliError> {
    let sec = r.name().to_string();
    let role = r.choice("role", PulseRole::Input, &ROLES)?;
    let kind = r.choice("shape", PulseKind::Gaussian, &SHAPES)?;
    let width_us = match kind {
        PulseKind::Square => r.positive_or("duration_ns", 2000.0)?,
        _ => r.positive_or("fwhm_ns", 345.0)?,
    } * 1e-3;
    let chirp = if kind == PulseKind::ChirpedGaussian { r.non_negative_or("chirp_mhz", 1.5)? } else { 0.0 };
    let amplitude_keys = ["rabi_mhz", "area_pi", "power_mw"];
    let given: Vec<&str> = amplitude_keys.iter().copied().filter(|k| r.has(k)).collect();
    if given.len() > 1 {
        return Err(r.error(given[1], format!("conflicts with `{}`", given[0])));
    }
    let peak = match given.first().copied() {
        Some("area_pi") => {
            let area = r.non_negative_or("area_pi", 0.0)? * PI;
            match kind {
                PulseKind::Square => area / width_us,
                _ => gaussian_peak_for_area(width_us, area),
            }
        }
        Some("power_mw") => {
            let p = r.non_negative_or("power_mw", 0.0)?;
            afcmem::beam::power_to_rabi(p, &analysis.calibration)?
        }
        _ => 2.0 * PI * r.non_negative_or("rabi_mhz", 1e-4)?,
    };
    let carrier = r.f64_or("carrier_mhz", 0.0)?;
    let centre = r.f64_or("centre_us", 0.0)?;
    let spec = PulseSpec {
        kind,
        width_us,
        peak_rabi: peak,
        carrier_mhz: carrier,
        chirp_mhz: chirp,
        sample_period_us: engine.dt_us,
    };
    eff.push(&sec, "role", role.name());
    eff.push(&sec, "shape", kind.name());
    eff.push(&sec, if kind == PulseKind::Square { "duration_ns" } else { "fwhm_ns" }, width_us * 1e3);
    eff.push(&sec, "rabi_mhz", peak / (2.0 * PI));
    eff.push(&sec, "carrier_mhz", carrier);
    if kind == PulseKind::ChirpedGaussian {
        eff.push(&sec, "chirp_mhz", chirp);
    }
    eff.push(&sec, "centre_us", centre);
    Ok(PulseCfg { index, role, spec, centre_us: centre })
}

fn check_roles(doc: &Document, kind: Kind, pulses: &[PulseCfg]) -> Result<(), CliError> {
    let need: &[PulseRole] = match kind {
        Kind::AfcSweep => &[PulseRole::Input],
        Kind::EchoDecay => &[PulseRole::Input, PulseRole::Refocus],
        Kind::Nutation => &[PulseRole::Probe],
        Kind::SpinWave | Kind::SpinDecay => &[PulseRole::Input, PulseRole::Control],
        _ => &[],
    };
    let line = doc.section("scenario").map_or(1, |s| s.line);
    for role in need {
        match pulses.iter().filter(|p| p.role == *role).count() {
            1 => {}
            0 => {
                return Err(CliError::Schema {
                    line,
                    field: "[sequence.N]".into(),
                    reason: format!("kind `{}` needs one `{}` pulse", kind.name(), role.name()),
                })
            }
            _ => {
                return Err(CliError::Schema {
                    line,
                    field: "[sequence.N]".into(),
                    reason: format!("kind `{}` takes exactly one `{}` pulse", kind.name(), role.name()),
                })
            }
        }
    }
    if !need.is_empty() && pulses.len() != need.len() {
        return Err(CliError::Schema {
            line,
            field: "[sequence.N]".into(),
            reason: format!("kind `{}` takes {} pulse section(s), found {}", kind.name(), need.len(), pulses.len()),
        });
    }
    if kind == Kind::Nutation && pulses[0].spec.kind != PulseKind::Square {
        return Err(CliError::Schema {
            line,
            field: format!("[sequence.{}] shape", pulses[0].index),
            reason: "nutation needs a square probe".into(),
        });
    }
    Ok(())
}

fn default_beam() -> Beam {
    Beam {
        geometry: BeamGeometry::default(),
        mode: WaveguideMode::default(),
        facet_radius_um: FACET_RADIUS_UM,
        waveguide: RabiCalibration::waveguide(),
        bulk: RabiCalibration::bulk(),
        operating_power_mw: 0.375,
    }
}

fn parse_beam(r: &Reader, eff: &mut Effective) -> Result<Beam, CliError> {
    let d = default_beam();
    let b = Beam {
        geometry: BeamGeometry {
            waist_um: r.positive_or("waist_um", d.geometry.waist_um)?,
            wavelength_nm: r.positive_or("wavelength_nm", d.geometry.wavelength_nm)?,
            index: r.positive_or("index", d.geometry.index)?,
            length_mm: r.positive_or("length_mm", d.geometry.length_mm)?,
            focus_mm: r.f64_or("focus_mm", d.geometry.focus_mm)?,
        },
        mode: WaveguideMode {
            wx_um: r.positive_or("mode_wx_um", d.mode.wx_um)?,
            wy_um: r.positive_or("mode_wy_um", d.mode.wy_um)?,
            transmission: r.positive_or("transmission", d.mode.transmission)?,
        },
        facet_radius_um: r.positive_or("facet_radius_um", d.facet_radius_um)?,
        waveguide: RabiCalibration {
            power_mw: r.positive_or("waveguide_power_mw", d.waveguide.power_mw)?,
            rabi: 2.0 * PI * r.positive_or("waveguide_rabi_mhz", d.waveguide.rabi / (2.0 * PI))?,
        },
        bulk: RabiCalibration {
            power_mw: r.positive_or("bulk_power_mw", d.bulk.power_mw)?,
            rabi: 2.0 * PI * r.positive_or("bulk_rabi_mhz", d.bulk.rabi / (2.0 * PI))?,
        },
        operating_power_mw: r.non_negative_or("operating_power_mw", d.operating_power_mw)?,
    };
    if b.mode.transmission > 1.0 {
        return Err(r.error("transmission", "must lie in (0, 1]"));
    }
    for (k, v) in [
        ("waist_um", b.geometry.waist_um),
        ("wavelength_nm", b.geometry.wavelength_nm),
        ("index", b.geometry.index),
        ("length_mm", b.geometry.length_mm),
        ("focus_mm", b.geometry.focus_mm),
        ("mode_wx_um", b.mode.wx_um),
        ("mode_wy_um", b.mode.wy_um),
        ("transmission", b.mode.transmission),
        ("facet_radius_um", b.facet_radius_um),
        ("waveguide_power_mw", b.waveguide.power_mw),
        ("waveguide_rabi_mhz", b.waveguide.rabi / (2.0 * PI)),
        ("bulk_power_mw", b.bulk.power_mw),
        ("bulk_rabi_mhz", b.bulk.rabi / (2.0 * PI)),
        ("operating_power_mw", b.operating_power_mw),
    ] {
        eff.push("beam", k, v);
    }
    Ok(b)
}
