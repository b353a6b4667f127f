//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;

use afcmem::analysis::{device_efficiency, extract_rabi, fit_exponential_decay, fit_gaussian_decay, RabiOptions};
use afcmem::beam::{BeamGeometry, RabiCalibration, WaveguideMode};
use afcmem::linear::{propagate_linear, Window, WINDOW_FWHMS};
use afcmem::spectro::csv::trace_from_csv;
use afcmem::spectro::{build_pulse, CombShape, DetuningGrid, PitShape, PulseSpec, Trace};
use afcmem_cli::{builtin, Artifacts, Scenario};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run_text(text: &str, name: &str) -> Artifacts {
    let s = Scenario::parse(text, name).unwrap_or_else(|e| panic!("{name}: {e}"));
    let a = afcmem_cli::run(&s, 0).unwrap_or_else(|e| panic!("{name}: {e}"));
    assert!(a.failure.is_none(), "{name}: {:?}", a.failure);
    a
}

fn run_builtin(name: &str) -> Artifacts {
    run_text(builtin(name).unwrap(), name)
}

/// Builtin text with `key = ...` lines replaced.
fn with_overrides(name: &str, overrides: &[(&str, &str)]) -> String {
    builtin(name)
        .unwrap()
        .lines()
        .map(|l| {
            let key = l.split('=').next().unwrap_or("").trim();
            match overrides.iter().find(|(k, _)| *k == key) {
                Some((k, v)) => format!("{k} = {v}"),
                None => l.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn report(a: &Artifacts) -> BTreeMap<String, String> {
    let text = std::str::from_utf8(a.get("report.txt").unwrap()).unwrap();
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn num(r: &BTreeMap<String, String>, key: &str) -> f64 {
    r.get(key).unwrap_or_else(|| panic!("report lacks {key}")).parse().unwrap()
}

fn trace(a: &Artifacts, name: &str) -> Trace {
    trace_from_csv(std::str::from_utf8(a.get(name).unwrap()).unwrap()).unwrap()
}

fn within(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

fn echo_timing() -> Outcome {
    let a = run_text(&with_overrides("fig5a-afc-sweep", &[("delta_khz", "250, 400, 500, 667")]), "timing");
    let r = report(&a);
    let mut pass = true;
    let mut detail = Vec::new();
    for d in [250, 400, 500, 667] {
        let label = format!("delta_{d}khz");
        let dt = trace(&a, &format!("trace_{label}.csv")).dt_us;
        let tau = num(&r, &format!("{label}.storage_time_us"));
        let ok = within(tau, 1e3 / d as f64, dt);
        pass &= ok;
        detail.push(format!("{d} kHz: {tau:.4} us"));
    }
    outcome(pass, detail.join(", "))
}

fn cross_engine() -> Outcome {
    let text = "[scenario]\nkind = bloch\n[scheme]\nt2_us = 1e9\nt1_us = 1e9\n\
                [ensemble]\nhalf_span_mhz = 5\nbin_khz = 10\nprofile = comb\ndelta_khz = 400\n\
                window_mhz = 8\noutside_od = 0\n\
                [sequence.1]\nrole = input\nfwhm_ns = 345\nrabi_mhz = 1e-4\n\
                [engine]\ndt_ns = 2\nt_end_us = 4\n";
    let bloch = trace(&run_text(text, "cross-engine"), "trace.csv");
    let comb = CombShape {
        delta_mhz: 0.4,
        finesse: 3.0,
        tooth_od: 3.11,
        bandwidth_mhz: 4.0,
        broadening_mhz: 0.154,
        pit: PitShape { width_mhz: 8.0, background_od: 1.0, outside_od: 0.0, edge_mhz: 1.0 },
    };
    let prof = comb.render(&DetuningGrid::symmetric(5.0, 0.01).unwrap()).unwrap();
    let pulse = build_pulse(&PulseSpec::gaussian(0.345, 2.0 * PI * 1e-4).with_sample_period(0.002)).unwrap();
    let lin = propagate_linear(&pulse, &prof).unwrap();
    let peak = bloch.times().map(|t| lin.intensity_at(t)).fold(0.0, f64::max);
    let ms = bloch
        .times()
        .zip(&bloch.intensity)
        .map(|(t, v)| (v - lin.intensity_at(t)).powi(2))
        .sum::<f64>()
        / bloch.len() as f64;
    let rel = ms.sqrt() / peak;
    outcome(rel < 0.02, format!("RMS difference {:.3}% of peak", 100.0 * rel))
}

fn calibration() -> Outcome {
    let r = report(&run_builtin("fig5a-afc-sweep"));
    let e667 = num(&r, "delta_667khz.eta_afc");
    let e400 = num(&r, "delta_400khz.eta_afc");
    outcome(
        within(e667, 0.146, 0.01) && within(e400, 0.083, 0.01),
        format!("eta_AFC {:.2}% at 667 kHz, {:.2}% at 400 kHz", 100.0 * e667, 100.0 * e400),
    )
}

fn two_pulse_echo() -> Outcome {
    // A weak first pulse keeps the echo free of the finite-pulse timing offset.
    let weak = with_overrides("fig2-echo-decay", &[("tau_us", "5, 8, 12")]).replacen("area_pi = 0.5", "area_pi = 0.05", 1);
    let a = run_text(&weak, "weak-echo");
    let r = report(&a);
    let dt = trace(&a, "trace_tau_5us.csv").dt_us;
    let mut pass = true;
    let mut detail = Vec::new();
    for tau in [5.0, 8.0, 12.0] {
        let t = num(&r, &format!("tau_{tau}us.echo_time_us"));
        pass &= within(t, 2.0 * tau, dt);
        detail.push(format!("2x{tau}: {t:.4}"));
    }
    let fit = report(&run_builtin("fig2-echo-decay"));
    let t2 = num(&fit, "fit.t2_us");
    pass &= within(t2 / 49.9, 1.0, 0.05);
    detail.push(format!("T2 {t2:.2} us"));
    outcome(pass, detail.join(", "))
}

fn nutation() -> Outcome {
    let plain = run_text(
        &with_overrides("fig3-nutation", &[("second_class", "false"), ("power_mw", "2")]),
        "nutation-single-class",
    );
    let r = report(&plain);
    let x = 2.0 * PI * num(&r, "power_2mw.rabi_mhz") * num(&r, "power_2mw.t_pi_us");
    let beat = report(&run_text(&with_overrides("fig3-nutation", &[("power_mw", "2")]), "nutation-beat"));
    let f = num(&beat, "power_2mw.beat_mhz");
    outcome(
        within(x / 5.14, 1.0, 0.05) && within(f / 10.2, 1.0, 0.02),
        format!("Omega t_pi = {x:.3}, beat {f:.3} MHz"),
    )
}

/// `|<exp(2 pi i f T)>|^2` over a Gaussian spin line, by quadrature.
fn spin_dephasing(gamma_khz: f64, t_us: f64) -> f64 {
    let sigma = gamma_khz * 1e-3 / (8.0 * LN_2).sqrt();
    let n = 4001;
    let h = 16.0 * sigma / (n - 1) as f64;
    let (mut re, mut norm) = (0.0, 0.0);
    for i in 0..n {
        let f = -8.0 * sigma + i as f64 * h;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 } * (-0.5 * (f / sigma).powi(2)).exp();
        re += w * (2.0 * PI * f * t_us).cos();
        norm += w;
    }
    (re / norm).powi(2)
}

fn spin_wave() -> Outcome {
    let a = run_builtin("fig5b-spinwave");
    let r = report(&a);
    let dt = trace(&a, "trace.csv").dt_us;
    let storage = num(&r, "storage_time_us");
    let eta_c = spin_dephasing(23.6, 3.6);
    let composed = 0.083 * 0.5 * 0.5 * eta_c;
    let reported = num(&r, "composition.eta_sw");
    let decay = report(&run_builtin("fig5c-spin-decay"));
    let gamma = num(&decay, "fit.gamma_inh_khz");
    let ratio = num(&decay, "ts_3.6us.eta_ratio");
    outcome(
        within(storage, 6.1, dt)
            && within(composed, 0.020, 0.002)
            && within(reported, composed, 1e-6)
            && within(ratio, eta_c, 5e-3)
            && within(gamma / 23.6, 1.0, 0.05),
        format!(
            "echo {storage:.4} us, eta_C(3.6) sim {ratio:.4} vs {eta_c:.4}, eta_SW {:.2}%, gamma {gamma:.3} kHz",
            100.0 * composed
        ),
    )
}

fn storage_reach() -> Outcome {
    let text = with_overrides("fig5b-spinwave", &[("t_s_us", "12.5"), ("tail_us", "1.5")]);
    let tr = trace(&run_text(&text, "reach"), "trace.csv");
    let w = WINDOW_FWHMS * 0.345;
    let echo = tr.energy_in(15.0, w);
    let side = tr.energy_in(15.0 - w, w).max(tr.energy_in(15.0 + w, w));
    let full_after = tr.end_us() >= 15.0 + 1.5 * w;
    let sn = echo / side;
    outcome(sn > 10.0 && full_after, format!("S/N {sn:.0} at 15 us"))
}

fn device() -> Outcome {
    let d = device_efficiency(0.146, 0.5, 1.0).unwrap();
    let oracle = 0.146 * 0.5 * (-1.0f64).exp();
    outcome(within(d, 0.0269, 1e-4) && within(d, oracle, 1e-12), format!("eta_d = {:.4}%", 100.0 * d))
}

/// Normalised field overlap of two centred 1D Gaussians, by quadrature.
fn axis_overlap(w1: f64, w2: f64) -> f64 {
    let n = 20001;
    let lim = 6.0 * w1.max(w2);
    let h = 2.0 * lim / (n - 1) as f64;
    let (mut c, mut a, mut b) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let x = -lim + i as f64 * h;
        let (e1, e2) = ((-(x / w1).powi(2)).exp(), (-(x / w2).powi(2)).exp());
        c += e1 * e2;
        a += e1 * e1;
        b += e2 * e2;
    }
    c / (a * b).sqrt()
}

fn beam() -> Outcome {
    let r = report(&run_builtin("enhancement-report"));
    let g = BeamGeometry::default();
    let m = WaveguideMode::default();
    let zr_oracle = PI * (g.waist_um * 1e-6).powi(2) * g.index / (g.wavelength_nm * 1e-9) * 1e3;
    let ov_oracle = (axis_overlap(14.15, m.wx_um) * axis_overlap(14.15, m.wy_um)).powi(2);
    let (wg, bulk) = (RabiCalibration::waveguide(), RabiCalibration::bulk());
    let slope_oracle = (wg.rabi / wg.power_mw.sqrt()) / (bulk.rabi / bulk.power_mw.sqrt());
    let zr = num(&r, "rayleigh_range_mm");
    let ov = num(&r, "mode_overlap");
    let slope = num(&r, "enhancement_measured_slope");
    let field = num(&r, "enhancement_field_average");
    let intensity = num(&r, "enhancement_intensity_average");
    let in_band = |x: f64| (2.0..=7.0).contains(&x);
    outcome(
        within(zr / 1.83, 1.0, 0.01)
            && within(zr, zr_oracle, 1e-5)
            && within(ov, 0.78, 0.01)
            && within(ov, ov_oracle, 1e-5)
            && within(slope, 6.35, 0.01)
            && within(slope, slope_oracle, 1e-5)
            && in_band(field)
            && in_band(intensity),
        format!(
            "z_R {zr:.3} mm, overlap {ov:.3}, slope {slope:.3}, theory {field:.2} (field) / {intensity:.2} (intensity); \
             5.7 not gated, convention-dependent"
        ),
    )
}

/// `J1(x)` from its integral representation; the integrand is periodic so the
/// trapezoid rule converges fast.
fn bessel_j1(x: f64) -> f64 {
    let n = 400;
    let h = PI / n as f64;
    // Endpoint halves: f(0) = 1 and f(pi) = -1.
    ((0..n).map(|k| k as f64 * h).map(|t| (t - x * t.sin()).cos()).sum::<f64>() - 1.0) / n as f64
}

fn properties() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;

    let prep = report(&run_builtin("fig4-afc-prep"));
    let sum_err = num(&prep, "populations.max_sum_error");
    pass &= sum_err <= 1e-9;
    detail.push(format!("population {sum_err:.1e}"));

    let lambda = "[scenario]\nkind = bloch\n[ensemble]\nhalf_span_mhz = 4\nbin_khz = 20\nprofile = flat\nod = 1\nslabs = 3\n\
                  [sequence.1]\nrole = input\nfwhm_ns = 200\narea_pi = 1\n\
                  [sequence.2]\nrole = control\nfwhm_ns = 200\narea_pi = 1\ncentre_us = 1\n\
                  [engine]\nmode = lambda\ndt_ns = 2\nt_end_us = 2\n";
    let bl = report(&run_text(lambda, "trace-check"));
    let tr_err = num(&bl, "diagnostics.max_trace_error");
    pass &= tr_err <= 1e-9;
    detail.push(format!("trace {tr_err:.1e}"));

    let grid = DetuningGrid::default_optical();
    let p = build_pulse(&PulseSpec::gaussian(0.345, 1.0)).unwrap();
    let comb = CombShape { delta_mhz: 0.4, finesse: 3.0, tooth_od: 3.0, bandwidth_mhz: 4.0, broadening_mhz: 0.0, pit: PitShape::default() };
    let out = propagate_linear(&p, &comb.render(&grid).unwrap()).unwrap();
    let w = Window::for_pulse(&p, &grid);
    let f = out.field.as_ref().unwrap();
    let peak = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let leak = f[..w.pulse_offset].iter().map(|v| v.norm()).fold(0.0, f64::max) / peak;
    pass &= leak <= 1e-6;
    detail.push(format!("causality {leak:.1e}"));

    let xs = [4.0f64, 8.0, 12.0, 16.0, 20.0];
    let exp_pts: Vec<_> = xs.iter().map(|&x| (x, 0.3 * (-2.0 * x / 37.0).exp())).collect();
    let t2 = fit_exponential_decay(&exp_pts).unwrap().get("t2_us").unwrap();
    let gauss_pts: Vec<_> = xs.iter().map(|&t| (t, spin_dephasing(19.0, t))).collect();
    let gamma = fit_gaussian_decay(&gauss_pts).unwrap().get("gamma_inh_khz").unwrap();
    let omega = 2.0 * PI * 1.3;
    let dt = 0.002;
    let nut: Vec<f64> = (0..2000)
        .map(|i| {
            let x = omega * i as f64 * dt;
            0.4 + 0.8 * if x == 0.0 { 0.5 } else { bessel_j1(x) / x }
        })
        .collect();
    let est = extract_rabi(&Trace::from_intensity(0.0, dt, nut).unwrap(), &RabiOptions::default()).unwrap();
    let w_fit = est.full_curve.get("omega_r").unwrap();
    let worst = [(t2, 37.0), (gamma, 19.0), (w_fit, omega)].iter().map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
    pass &= worst <= 1e-6;
    detail.push(format!("fits {worst:.1e}"));

    let coarse = report(&run_text(&with_overrides("fig2-echo-decay", &[("tau_us", "5, 6, 7")]), "dt-10"));
    let fine = report(&run_text(
        &with_overrides("fig2-echo-decay", &[("tau_us", "5, 6, 7"), ("dt_ns", "5")]),
        "dt-5",
    ));
    let drift = (num(&coarse, "tau_5us.echo_energy") / num(&fine, "tau_5us.echo_energy") - 1.0).abs();
    pass &= drift <= 0.005;
    detail.push(format!("dt halving {:.3}%", 100.0 * drift));

    let s = Scenario::parse(builtin("fig2-echo-decay").unwrap(), "threads").unwrap();
    let manifests: Vec<String> = [1, 3]
        .iter()
        .map(|&n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            pool.install(|| afcmem_cli::run(&s, 0).unwrap().manifest())
        })
        .collect();
    let same = manifests[0] == manifests[1];
    pass &= same;
    detail.push(format!("threads 1 vs 3 identical: {same}"));

    outcome(pass, detail.join(", "))
}

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("AFC echo timing", echo_timing),
        ("cross-engine agreement", cross_engine),
        ("AFC efficiency calibration", calibration),
        ("two-pulse echo", two_pulse_echo),
        ("optical nutation", nutation),
        ("spin-wave storage", spin_wave),
        ("storage-time reach", storage_reach),
        ("device efficiency", device),
        ("beam optics", beam),
        ("property suites", properties),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let o = check();
        println!("criterion {:>2} {}: {} ({})", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
