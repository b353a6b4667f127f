//! Scenario execution and artifact bookkeeping.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::{Display, Write as _};
use std::path::Path;

use afcmem::analysis::{
    dominant_frequency, efficiency_decomposition, extract_rabi, fit_exponential_decay, fit_gaussian_decay, spin_decay,
    FitResult, Polarity, RabiOptions,
};
use afcmem::beam::{power_to_rabi, EnhancementReport};
use afcmem::bloch::{
    check_step, evolve_with_diagnostics, input_reference, optical_nutation, spin_wave_storage, two_pulse_echo,
    EchoPulses, EnsembleSpec, Integration, Mode, NutationParams, PulseRole, PulseSequence, SecondTransition,
    SpinWaveProtocol,
};
use afcmem::linear::{echo_metrics, propagate_linear, WINDOW_FWHMS};
use afcmem::pumping::HoleBurner;
use afcmem::spectro::csv::{profile_to_csv, trace_to_csv};
use afcmem::spectro::{build_pulse, ClassPopulations, PulseSpec, SpectralProfile, Trace};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::scenario::{Kind, ProfileCfg, Scenario};

pub const MANIFEST: &str = "manifest.txt";

/// Files produced by one command, kept in memory until written.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
    /// Set when outputs were produced but a fit failed to converge.
    pub failure: Option<CliError>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, content: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), content.into());
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(|v| v.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(|k| k.as_str())
    }

    /// `path<TAB>sha256` per file, sorted by path.
    pub fn manifest(&self) -> String {
        self.files
            .iter()
            .map(|(name, data)| format!("{name}\t{}\n", hex(&Sha256::digest(data))))
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (name, data) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, data).map_err(|e| CliError::io(&p, e))?;
        }
        let p = dir.join(MANIFEST);
        std::fs::write(&p, self.manifest()).map_err(|e| CliError::io(&p, e))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Check every digest listed in `dir/manifest.txt`; returns the listed paths.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>, CliError> {
    let mp = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mp).map_err(|e| CliError::io(&mp, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let (name, digest) = line.split_once('\t').ok_or_else(|| CliError::Schema {
            line: i + 1,
            field: MANIFEST.into(),
            reason: "expected `path<TAB>digest`".into(),
        })?;
        let p = dir.join(name);
        let data = std::fs::read(&p).map_err(|e| CliError::io(&p, e))?;
        if hex(&Sha256::digest(&data)) != digest {
            return Err(CliError::Schema { line: i + 1, field: MANIFEST.into(), reason: format!("digest mismatch for {name}") });
        }
        out.push(name.to_string());
    }
    Ok(out)
}

/// Flat `key = value` report.
#[derive(Debug, Default)]
pub struct Report(String);

impl Report {
    pub fn kv(&mut self, key: impl Display, value: impl Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }

    pub fn fit(&mut self, prefix: &str, fit: &FitResult) {
        self.0.push_str(&fit.to_text(prefix));
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

fn ensemble_spec(s: &Scenario, profile: &SpectralProfile, gamma_khz: f64) -> EnsembleSpec {
    let mut e = EnsembleSpec::from_profile(profile)
        .with_coherence(s.scheme.t1_opt_us, s.scheme.t2_opt_us)
        .with_slabs(s.ensemble.slabs);
    if s.ensemble.annuli > 1 {
        e = e.with_gaussian_beam(s.ensemble.annuli);
    }
    if gamma_khz > 0.0 {
        e = e.with_spin_inhomogeneity(gamma_khz);
    }
    e
}

fn single_profile(s: &Scenario) -> Result<SpectralProfile, CliError> {
    let mut all = s.ensemble.profile.render_all(&s.ensemble.grid)?;
    Ok(all.swap_remove(0).1)
}

fn comb_delay_us(s: &Scenario) -> Result<f64, CliError> {
    match &s.ensemble.profile {
        ProfileCfg::Comb { shape, .. } => Ok(1.0 / shape.delta_mhz),
        _ => Err(CliError::Schema {
            line: 1,
            field: "[ensemble] profile".into(),
            reason: format!("kind `{}` needs a comb profile", s.kind.name()),
        }),
    }
}

fn role(s: &Scenario, r: PulseRole) -> &crate::scenario::PulseCfg {
    s.pulse(r).expect("roles checked at parse time")
}

fn echo_pulses(s: &Scenario) -> EchoPulses {
    EchoPulses {
        input: role(s, PulseRole::Input).spec.clone(),
        refocus: role(s, PulseRole::Refocus).spec.clone(),
        dt_us: s.engine.dt_us,
        tail_us: s.engine.tail_us,
    }
}

fn nutation_params(s: &Scenario) -> NutationParams {
    NutationParams {
        duration_us: role(s, PulseRole::Probe).spec.width_us,
        dt_us: s.engine.dt_us,
        beat_offset_mhz: s.scheme.ground_splittings_mhz[0],
        beat_population: s.ensemble.second_class_population,
        beat_relative_dipole: 1.0,
    }
}

fn nutation_rabis(s: &Scenario) -> Result<Vec<(Option<f64>, f64)>, CliError> {
    if s.analysis.power_mw.is_empty() {
        return Ok(vec![(None, role(s, PulseRole::Probe).spec.peak_rabi)]);
    }
    s.analysis
        .power_mw
        .iter()
        .map(|&p| Ok((Some(p), power_to_rabi(p, &s.analysis.calibration)?)))
        .collect()
}

fn protocol(s: &Scenario, t_s: f64) -> Result<SpinWaveProtocol, CliError> {
    let control = role(s, PulseRole::Control);
    Ok(SpinWaveProtocol {
        afc_delay_us: comb_delay_us(s)?,
        control: control.build()?,
        first_control_us: control.centre_us,
        t_s_us: t_s,
        dt_us: s.engine.dt_us,
        tail_us: s.engine.tail_us,
    })
}

fn free_sequence(s: &Scenario) -> Result<(PulseSequence, Integration), CliError> {
    let mut pulses = s
        .pulses
        .iter()
        .map(|p| Ok((p.centre_us, p.build()?, p.role)))
        .collect::<Result<Vec<_>, CliError>>()?;
    pulses.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut seq = PulseSequence::new();
    for (c, env, r) in pulses {
        seq.push_centred(c, env, r)?;
    }
    let t_end = s.engine.t_end_us.expect("bloch scenarios carry t_end_us");
    let mut integ = Integration::until(t_end, s.engine.dt_us);
    if seq.pulses().is_empty() {
        integ.t_start_us = Some(0.0);
    }
    Ok((seq, integ))
}

/// Input transmitted through the bare window, sampled like `like`.
fn window_reference(s: &Scenario, input: &afcmem::spectro::PulseEnvelope, like: &Trace) -> Trace {
    let od_b = s.ensemble.profile.background().map_or(0.0, |p| p.background_od);
    input_reference(input, 0.0, like).scaled((-0.5 * od_b).exp())
}

/// Schema and physics checks without running any engine.
pub fn validate(s: &Scenario) -> Result<String, CliError> {
    let mut r = Report::default();
    match s.kind {
        Kind::AfcPrep => {
            let p = s.preparation.as_ref().expect("afc-prep carries a preparation");
            let hb = HoleBurner::new(p.pump.clone(), s.scheme.roles)?;
            let bands = hb.comb_bands(&s.ensemble.grid, p.delta_khz, p.finesse, p.comb_bandwidth_mhz)?;
            if p.feature_width_mhz > p.pit_width_mhz {
                return Err(afcmem::Error::FeatureWiderThanPit { feature_mhz: p.feature_width_mhz, pit_mhz: p.pit_width_mhz }.into());
            }
            r.kv("check.comb_bands", bands.len());
        }
        Kind::AfcSweep => {
            let profiles = s.ensemble.profile.render_all(&s.ensemble.grid)?;
            role(s, PulseRole::Input).build()?;
            r.kv("check.profiles", profiles.len());
        }
        Kind::EchoDecay => {
            let spec = ensemble_spec(s, &single_profile(s)?, 0.0);
            spec.validate()?;
            let pulses = echo_pulses(s);
            for &tau in &s.analysis.tau_us {
                let (seq, _) = pulses.sequence(tau)?;
                check_step(&spec, &seq, s.engine.dt_us)?;
            }
            r.kv("check.delays", s.analysis.tau_us.len());
        }
        Kind::Nutation => {
            let mut spec = ensemble_spec(s, &single_profile(s)?, 0.0);
            spec.validate()?;
            let params = nutation_params(s);
            if s.ensemble.second_class {
                spec.second_transition = Some(SecondTransition {
                    offset_mhz: params.beat_offset_mhz,
                    relative_dipole: params.beat_relative_dipole,
                    population: params.beat_population,
                });
            }
            for (_, rabi) in nutation_rabis(s)? {
                let probe = build_pulse(&PulseSpec::square(params.duration_us, rabi).with_sample_period(params.dt_us))?;
                let mut seq = PulseSequence::new();
                seq.push(0.0, probe, PulseRole::Probe)?;
                check_step(&spec, &seq, s.engine.dt_us)?;
            }
        }
        Kind::SpinWave | Kind::SpinDecay => {
            let spec = ensemble_spec(s, &single_profile(s)?, s.ensemble.gamma_inh_khz);
            spec.validate()?;
            let input = role(s, PulseRole::Input).build()?;
            for &t_s in &s.analysis.t_s_us {
                let (seq, _) = protocol(s, t_s)?.sequence(&input)?;
                check_step(&spec, &seq, s.engine.dt_us)?;
            }
            r.kv("check.storage_times", s.analysis.t_s_us.len());
        }
        Kind::Enhancement => {
            s.beam.geometry.validate()?;
            s.beam.mode.validate()?;
        }
        Kind::Bloch => {
            let spec = ensemble_spec(s, &single_profile(s)?, 0.0);
            spec.validate()?;
            let (seq, _) = free_sequence(s)?;
            check_step(&spec, &seq, s.engine.dt_us)?;
            r.kv("check.pulses", seq.pulses().len());
        }
    }
    r.kv("status", "valid");
    Ok(s.effective.to_text() + &r.into_string())
}

/// Preparation stage only: the absorption profiles the scenario would use.
pub fn prepare(s: &Scenario) -> Result<Artifacts, CliError> {
    if s.kind == Kind::AfcPrep {
        return run(s, 0);
    }
    let mut a = Artifacts::default();
    a.add("effective.txt", s.effective.to_text());
    if s.kind != Kind::Enhancement {
        for (label, p) in s.ensemble.profile.render_all(&s.ensemble.grid)? {
            a.add(format!("profile_{label}.csv"), profile_to_csv(&p));
        }
    }
    Ok(a)
}

pub fn run(s: &Scenario, seed: u64) -> Result<Artifacts, CliError> {
    let mut a = Artifacts::default();
    let mut r = Report::default();
    r.kv("scenario", &s.name);
    r.kv("kind", s.kind.name());
    r.kv("seed", seed);
    a.add("effective.txt", s.effective.to_text());
    match s.kind {
        Kind::AfcPrep => afc_prep(s, &mut a, &mut r)?,
        Kind::AfcSweep => afc_sweep(s, &mut a, &mut r)?,
        Kind::EchoDecay => echo_decay(s, &mut a, &mut r)?,
        Kind::Nutation => nutation(s, &mut a, &mut r)?,
        Kind::SpinWave => spin_wave(s, &mut a, &mut r)?,
        Kind::SpinDecay => spin_decay_sweep(s, &mut a, &mut r)?,
        Kind::Enhancement => enhancement(s, &mut r)?,
        Kind::Bloch => bloch(s, &mut a, &mut r)?,
    }
    a.add("report.txt", r.into_string());
    Ok(a)
}

fn afc_prep(s: &Scenario, a: &mut Artifacts, r: &mut Report) -> Result<(), CliError> {
    let p = s.preparation.as_ref().expect("afc-prep carries a preparation");
    let hb = HoleBurner::new(p.pump.clone(), s.scheme.roles)?;
    let thermal = ClassPopulations::thermal(s.ensemble.grid.clone(), &s.scheme)?;
    let pit = hb.prepare_pit(&thermal, p.pit_width_mhz)?;
    let feature = hb.prepare_single_class_feature(&pit.state, p.feature_od, p.feature_width_mhz)?;
    let comb = hb.prepare_afc(&feature, p.delta_khz, p.finesse, p.comb_bandwidth_mhz)?;
    let mut profiles = Vec::new();
    for (label, state) in [("thermal", &thermal), ("pit", &pit.state), ("feature", &feature), ("comb", &comb)] {
        let prof = hb.render(state)?;
        a.add(format!("profile_{label}.csv"), profile_to_csv(&prof));
        profiles.push(prof);
    }
    let delta = p.delta_khz * 1e-3;
    let half = (0.5 * p.comb_bandwidth_mhz / delta).floor() * delta;
    r.kv("pit.background_od", pit.background_od);
    r.kv("pit.segments", pit.segments);
    r.kv("feature.peak_od", max_within(&profiles[2], 0.5 * p.feature_width_mhz));
    r.kv("comb.period_mhz", autocorrelation_period(&profiles[3], half, delta));
    r.kv("comb.teeth", tooth_count(&profiles[3], half + 0.5 * delta));
    r.kv("populations.max_sum_error", comb.max_sum_error());
    r.kv("populations.min_fraction", comb.min_fraction());
    Ok(())
}

fn max_within(p: &SpectralProfile, half: f64) -> f64 {
    p.grid.values().zip(&p.od).filter(|(f, _)| f.abs() <= half).map(|(_, v)| *v).fold(0.0, f64::max)
}

/// Lag in `[Δ/2, 3Δ/2]` maximising the autocorrelation of the OD in `|δ| <= half`.
pub fn autocorrelation_period(p: &SpectralProfile, half: f64, delta_mhz: f64) -> f64 {
    let v: Vec<f64> = p.grid.values().zip(&p.od).filter(|(f, _)| f.abs() <= half).map(|(_, od)| *od).collect();
    let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
    let x: Vec<f64> = v.iter().map(|o| o - mean).collect();
    let ac = |lag: usize| x.iter().zip(&x[lag.min(x.len())..]).map(|(a, b)| a * b).sum::<f64>() / (x.len() - lag).max(1) as f64;
    let step = p.grid.step_mhz;
    let lo = (0.5 * delta_mhz / step) as usize;
    let hi = ((1.5 * delta_mhz / step) as usize).min(x.len().saturating_sub(1));
    (lo..=hi).max_by(|a, b| ac(*a).total_cmp(&ac(*b))).unwrap_or(0) as f64 * step
}

fn tooth_count(p: &SpectralProfile, half: f64) -> usize {
    let floor = p.mean_in(-half, half);
    (1..p.len() - 1)
        .filter(|&i| p.grid.value(i).abs() <= half && p.od[i] > p.od[i - 1] && p.od[i] >= p.od[i + 1] && p.od[i] > floor)
        .count()
}

fn afc_sweep(s: &Scenario, a: &mut Artifacts, r: &mut Report) -> Result<(), CliError> {
    let input = role(s, PulseRole::Input);
    let pulse = input.build()?;
    let pit = s.ensemble.profile.background().cloned().unwrap_or_default();
    let reference = propagate_linear(&pulse, &pit.render(&s.ensemble.grid)?)?;
    let fwhm = input.spec.width_us;
    for (label, prof) in s.ensemble.profile.render_all(&s.ensemble.grid)? {
        let out = propagate_linear(&pulse, &prof)?;
        let (expected, end) = match &s.ensemble.profile {
            ProfileCfg::Comb { .. } => {
                let d = label.trim_start_matches("delta_").trim_end_matches("khz").parse::<f64>().unwrap_or(1.0) * 1e-3;
                (1.0 / d, 3.0 / d + 1.0)
            }
            _ => (0.0, 2.0),
        };
        let m = echo_metrics(&out, &reference, expected, fwhm)?;
        a.add(format!("profile_{label}.csv"), profile_to_csv(&prof));
        a.add(format!("trace_{label}.csv"), trace_to_csv(&out.slice(out.t_start_us, end)));
        let od_b = pit.background_od;
        r.kv(format!("{label}.expected_us"), expected);
        r.kv(format!("{label}.eta_afc"), m.eta_afc);
        r.kv(format!("{label}.no_echo"), m.no_echo);
        r.kv(format!("{label}.echo_time_us"), opt(m.echo_time_us));
        r.kv(format!("{label}.transmitted_time_us"), opt(m.transmitted_time_us));
        r.kv(format!("{label}.storage_time_us"), opt(m.storage_time_us()));
        r.kv(format!("{label}.transmitted_fraction"), m.transmitted_fraction);
        r.kv(
            format!("{label}.device_efficiency"),
            afcmem::analysis::device_efficiency(m.eta_afc, s.analysis.waveguide_transmission, od_b)?,
        );
    }
    r.kv("echo_window_us", WINDOW_FWHMS * fwhm);
    a.add("trace_reference.csv", trace_to_csv(&reference.slice(reference.t_start_us, 2.0)));
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

fn echo_decay(s: &Scenario, a: &mut Artifacts, r: &mut Report) -> Result<(), CliError> {
    let spec = ensemble_spec(s, &single_profile(s)?, 0.0);
    let pulses = echo_pulses(s);
    let w = s.analysis.echo_window_us;
    let mut pts = Vec::new();
    let mut csv = String::from("two_tau_us,echo_energy\n");
    for &tau in &s.analysis.tau_us {
        let tr = two_pulse_echo(&spec, tau, &pulses)?;
        let e = tr.energy_in(2.0 * tau, w);
        r.kv(format!("tau_{tau}us.echo_energy"), e);
        r.kv(format!("tau_{tau}us.echo_time_us"), opt(tr.centroid_in(2.0 * tau, w)));
        a.add(format!("trace_tau_{tau}us.csv"), trace_to_csv(&tr));
        let _ = writeln!(csv, "{},{e}", 2.0 * tau);
        pts.push((2.0 * tau, e));
    }
    a.add("points.csv", csv);
    let fit = fit_exponential_decay(&pts)?;
    r.kv("configured_t2_us", s.scheme.t2_opt_us);
    r.fit("fit.", &fit);
    if !fit.converged {
        a.failure = Some(CliError::NotConverged("exponential decay of the echo energies".into()));
    }
    Ok(())
}

fn nutation(s: &Scenario, a: &mut Artifacts, r: &mut Report) -> Result<(), CliError> {
    let spec = ensemble_spec(s, &single_profile(s)?, 0.0);
    let params = nutation_params(s);
    let od = match s.ensemble.profile {
        ProfileCfg::Gaussian { od, .. } => od,
        _ => spec.profile()?.max_od(),
    };
    let opts = RabiOptions { polarity: Polarity::Transmission, notch_mhz: s.analysis.notch_mhz, ..Default::default() };
    let mut slope = (0.0, 0.0);
    for (power, rabi) in nutation_rabis(s)? {
        let tr = optical_nutation(&spec, rabi, od, s.ensemble.second_class, &params)?;
        let label = power.map_or_else(|| "probe".to_string(), |p| format!("power_{p}mw"));
        a.add(format!("trace_{label}.csv"), trace_to_csv(&tr));
        r.kv(format!("{label}.rabi_mhz"), rabi / (2.0 * PI));
        let est = extract_rabi(&tr, &opts)?;
        let t_pi = est.t_pi.get("t_pi_us").unwrap_or(f64::NAN);
        let om = est.t_pi.get("omega_r").unwrap_or(f64::NAN);
        r.kv(format!("{label}.t_pi_us"), t_pi);
        r.kv(format!("{label}.omega_t_pi"), rabi * t_pi);
        r.kv(format!("{label}.estimated_rabi_mhz"), om / (2.0 * PI));
        r.kv(format!("{label}.full_curve_converged"), est.full_curve.converged);
        r.kv(format!("{label}.full_curve_rabi_mhz"), est.full_curve.get("omega_r").unwrap_or(f64::NAN) / (2.0 * PI));
        if s.ensemble.second_class {
            r.kv(format!("{label}.beat_mhz"), opt(dominant_frequency(&tr, 5.0, 20.0)));
        }
        if let Some(p) = power {
            slope.0 += om * p.sqrt();
            slope.1 += p;
        }
    }
    if slope.1 > 0.0 {
        r.kv("rabi_slope_mhz_per_sqrt_mw", slope.0 / slope.1 / (2.0 * PI));
    }
    Ok(())
}

fn spin_wave(s: &Scenario, a: &mut Artifacts, r: &mut Report) -> Result<(), CliError> {
    let t_s = s.analysis.t_s_us[0];
    let prof = single_profile(s)?;
    let spec = ensemble_spec(s, &prof, s.ensemble.gamma_inh_khz);
    let input_cfg = role(s, PulseRole::Input);
    let input = input_cfg.build()?;
    let fwhm = input_cfg.spec.width_us;
    let proto = protocol(s, t_s)?;
    let tr = spin_wave_storage(&spec, &input, &proto)?;
    let reference = window_reference(s, &input, &tr);
    let m = echo_metrics(&tr, &reference, proto.echo_time_us(), fwhm)?;
    let afc = echo_metrics(&tr, &reference, proto.afc_delay_us, fwhm)?;
    let pit = s.ensemble.profile.background().cloned().unwrap_or_default();
    let lin = echo_metrics(
        &propagate_linear(&input, &prof)?,
        &propagate_linear(&input, &pit.render(&s.ensemble.grid)?)?,
        proto.afc_delay_us,
        fwhm,
    )?;
    let eta_c = spin_decay(s.ensemble.gamma_inh_khz, t_s);
    a.add("trace.csv", trace_to_csv(&tr));
    r.kv("t_s_us", t_s);
    r.kv("expected_echo_us", proto.echo_time_us());
    r.kv("eta_sw", m.eta_afc);
    r.kv("storage_time_us", opt(m.storage_time_us()));
    r.kv("no_echo", m.no_echo);
    r.kv("afc_echo_residual", afc.eta_afc);
    r.kv("eta_afc_linear", lin.eta_afc);
    r.kv("eta_c", eta_c);
    r.kv("eta_t_effective", (m.eta_afc / (lin.eta_afc * eta_c)).sqrt());
    let d = efficiency_decomposition(s.analysis.eta_afc, s.analysis.eta_t, s.ensemble.gamma_inh_khz, t_s)?;
    r.kv("composition.eta_afc", s.analysis.eta_afc);
    r.kv("composition.eta_t", s.analysis.eta_t);
    r.kv("composition.eta_c", d.eta_c);
    r.kv("composition.eta_sw", d.eta_sw);
    Ok(())
}

fn spin_decay_sweep(s: &Scenario, a: &mut Artifacts, r: &mut Report) -> Result<(), CliError> {
    let prof = single_profile(s)?;
    let broad = ensemble_spec(s, &prof, s.ensemble.gamma_inh_khz);
    let narrow = ensemble_spec(s, &prof, 0.0);
    let input_cfg = role(s, PulseRole::Input);
    let input = input_cfg.build()?;
    let fwhm = input_cfg.spec.width_us;
    let mut pts = Vec::new();
    let mut csv = String::from("t_s_us,eta_ratio\n");
    for &t_s in &s.analysis.t_s_us {
        let proto = protocol(s, t_s)?;
        let mut eta = [0.0; 2];
        for (k, (spec, tag)) in [(&narrow, "_gamma0"), (&broad, "")].into_iter().enumerate() {
            let tr = spin_wave_storage(spec, &input, &proto)?;
            let m = echo_metrics(&tr, &window_reference(s, &input, &tr), proto.echo_time_us(), fwhm)?;
            eta[k] = m.eta_afc;
            a.add(format!("trace_ts_{t_s}us{tag}.csv"), trace_to_csv(&tr));
        }
        let ratio = eta[1] / eta[0];
        r.kv(format!("ts_{t_s}us.eta_sw"), eta[1]);
        r.kv(format!("ts_{t_s}us.eta_sw_gamma0"), eta[0]);
        r.kv(format!("ts_{t_s}us.eta_ratio"), ratio);
        r.kv(format!("ts_{t_s}us.analytic_ratio"), spin_decay(s.ensemble.gamma_inh_khz, t_s));
        let _ = writeln!(csv, "{t_s},{ratio}");
        pts.push((t_s, ratio));
    }
    a.add("points.csv", csv);
    let fit = fit_gaussian_decay(&pts)?;
    r.kv("configured_gamma_inh_khz", s.ensemble.gamma_inh_khz);
    r.fit("fit.", &fit);
    if !fit.converged {
        a.failure = Some(CliError::NotConverged("Gaussian decay of the spin-wave efficiencies".into()));
    }
    Ok(())
}

fn enhancement(s: &Scenario, r: &mut Report) -> Result<(), CliError> {
    let b = &s.beam;
    let rep = EnhancementReport::compute(&b.geometry, &b.mode, b.facet_radius_um, &b.waveguide, &b.bulk)?;
    r.0.push_str(&rep.to_text());
    r.kv("operating_power_mw", b.operating_power_mw);
    r.kv("operating_rabi_mhz", power_to_rabi(b.operating_power_mw, &b.waveguide)? / (2.0 * PI));
    Ok(())
}

fn bloch(s: &Scenario, a: &mut Artifacts, r: &mut Report) -> Result<(), CliError> {
    let spec = ensemble_spec(s, &single_profile(s)?, 0.0);
    let (seq, integ) = free_sequence(s)?;
    let ev = evolve_with_diagnostics(&spec, &seq, s.engine.mode, &integ)?;
    let d = ev.diagnostics;
    a.add("trace.csv", trace_to_csv(&ev.trace));
    r.kv("mode", if s.engine.mode == Mode::TwoLevel { "two-level" } else { "lambda" });
    r.kv("pulses", seq.pulses().len());
    r.kv("steps", d.steps);
    r.kv("peak_intensity", ev.trace.peak());
    r.kv("output_energy", ev.trace.total_energy());
    r.kv("diagnostics.max_trace_error", d.max_trace_error);
    r.kv("diagnostics.min_population", d.min_population);
    r.kv("diagnostics.max_population", d.max_population);
    r.kv("diagnostics.min_eigenvalue", d.min_eigenvalue);
    r.kv("diagnostics.final_excited", d.final_excited);
    Ok(())
}
