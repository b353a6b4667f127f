use afcmem::linear::{echo_metrics, propagate_linear, Window};
use afcmem::spectro::{build_pulse, CombShape, DetuningGrid, PitShape, PulseEnvelope, PulseSpec, SpectralProfile, Trace};
use proptest::prelude::*;

const FWHM: f64 = 0.345;

fn pulse(peak: f64) -> PulseEnvelope {
    build_pulse(&PulseSpec::gaussian(FWHM, peak)).unwrap()
}

fn comb(delta_mhz: f64, tooth_od: f64) -> CombShape {
    CombShape {
        delta_mhz,
        finesse: 3.0,
        tooth_od,
        bandwidth_mhz: 4.0,
        broadening_mhz: 0.0,
        pit: PitShape::default(),
    }
}

fn run(profile: &SpectralProfile) -> Trace {
    propagate_linear(&pulse(1.0), profile).unwrap()
}

fn reference() -> Trace {
    run(&PitShape::default().render(&DetuningGrid::default_optical()).unwrap())
}

fn argmax_in(t: &Trace, center: f64, width: f64) -> f64 {
    let r = t.window(center, width);
    let i = r.clone().max_by(|a, b| t.intensity[*a].total_cmp(&t.intensity[*b])).unwrap();
    t.time(i)
}

#[test]
fn first_echo_at_inverse_period() {
    let grid = DetuningGrid::default_optical();
    let out = run(&comb(0.4, 2.5).render(&grid).unwrap());
    let m = echo_metrics(&out, &reference(), 2.5, FWHM).unwrap();
    assert!(!m.no_echo);
    let tau = m.storage_time_us().unwrap();
    assert!((tau - 2.5).abs() <= out.dt_us, "τ = {tau}");
}

#[test]
fn echo_peak_follows_period() {
    let grid = DetuningGrid::default_optical();
    for delta in [0.25, 0.4, 0.667] {
        // A comb much wider than the pulse spectrum keeps the echo undistorted.
        let wide = CombShape { bandwidth_mhz: 10.0, ..comb(delta, 2.5) };
        let out = run(&wide.render(&grid).unwrap());
        let t0 = argmax_in(&out, 0.0, 3.0 * FWHM);
        let te = argmax_in(&out, 1.0 / delta, 3.0 * FWHM);
        assert!((te - t0 - 1.0 / delta).abs() <= out.dt_us, "Δ = {delta}: {}", te - t0);
    }
}

#[test]
fn weaker_teeth_give_weaker_echo() {
    let grid = DetuningGrid::default_optical();
    let r = reference();
    let etas: Vec<f64> = [1.0, 0.5, 0.25]
        .iter()
        .map(|&od| echo_metrics(&run(&comb(0.667, od).render(&grid).unwrap()), &r, 1.5, FWHM).unwrap().eta_afc)
        .collect();
    assert!(etas.windows(2).all(|w| w[1] < w[0]), "{etas:?}");
}

#[test]
fn output_is_causal() {
    let grid = DetuningGrid::default_optical();
    let p = pulse(1.0);
    let out = propagate_linear(&p, &comb(0.4, 3.0).render(&grid).unwrap()).unwrap();
    let w = Window::for_pulse(&p, &grid);
    let f = out.field.as_ref().unwrap();
    let peak = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let leak = f[..w.pulse_offset].iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(leak <= 1e-6 * peak, "leak {leak} of {peak}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn passive_and_linear(
        delta in 0.2..0.8f64,
        tooth in 0.0..5.0f64,
        background in 0.0..2.0f64,
        a in 0.1..3.0f64,
    ) {
        let grid = DetuningGrid::default_optical();
        let mut c = comb(delta, tooth);
        c.pit.background_od = background;
        let profile = c.render(&grid).unwrap();
        let one = propagate_linear(&pulse(1.0), &profile).unwrap();
        let scaled = propagate_linear(&pulse(a), &profile).unwrap();
        prop_assert!(one.total_energy() <= pulse(1.0).energy() * (1.0 + 1e-9));
        let f1 = one.field.as_ref().unwrap();
        let fa = scaled.field.as_ref().unwrap();
        let peak = f1.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in f1.iter().zip(fa) {
            prop_assert!((x * a - y).norm() <= 1e-9 * a * peak);
        }
        for (x, y) in one.intensity.iter().zip(&scaled.intensity) {
            prop_assert!((x * a * a - y).abs() <= 1e-9 * a * a * peak * peak);
        }
    }
}
