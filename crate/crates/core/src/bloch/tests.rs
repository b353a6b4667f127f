use std::f64::consts::PI;

use super::*;
use crate::spectro::{build_pulse, PulseSpec};

fn single_bin() -> EnsembleSpec {
    let g = DetuningGrid::new(-0.01, 0.01, 3).unwrap();
    let p = SpectralProfile::new(g, vec![0.0, 1e-6, 0.0]).unwrap();
    EnsembleSpec::from_profile(&p).with_slabs(1).with_coherence(1e9, 1e9)
}

#[test]
fn zero_field_gives_zero_output() {
    let g = DetuningGrid::symmetric(2.0, 0.05).unwrap();
    let spec = EnsembleSpec::from_profile(&SpectralProfile::flat(g, 2.0).unwrap());
    let mut seq = PulseSequence::new();
    seq.push(0.0, build_pulse(&PulseSpec::square(0.2, 0.0)).unwrap(), PulseRole::Input).unwrap();
    let tr = evolve_ensemble(&spec, &seq, Mode::TwoLevel, &Integration::until(0.5, 0.002)).unwrap();
    assert!(tr.intensity.iter().all(|v| *v == 0.0));
}

#[test]
fn square_pi_pulse_inverts_resonant_bin() {
    let mut seq = PulseSequence::new();
    seq.push(0.0, build_pulse(&PulseSpec::square(0.5, PI / 0.5)).unwrap(), PulseRole::Input).unwrap();
    let ev = evolve_with_diagnostics(&single_bin(), &seq, Mode::TwoLevel, &Integration::until(0.5, 0.002)).unwrap();
    assert!((ev.diagnostics.final_excited - 1.0).abs() < 1e-4, "{}", ev.diagnostics.final_excited);
}

#[test]
fn lambda_reduces_to_two_level_without_control() {
    let g = DetuningGrid::symmetric(3.0, 0.02).unwrap();
    let p = SpectralProfile::from_fn(g, |f| 1.5 * (-(f / 1.2).powi(2)).exp()).unwrap();
    let spec = EnsembleSpec::from_profile(&p).with_slabs(3).with_coherence(1e9, 49.9);
    let mut seq = PulseSequence::new();
    seq.push_centred(0.0, build_pulse(&PulseSpec::gaussian(0.3, 6.0)).unwrap(), PulseRole::Input).unwrap();
    let integ = Integration::until(1.5, 0.004);
    let a = evolve_ensemble(&spec, &seq, Mode::TwoLevel, &integ).unwrap();
    let b = evolve_ensemble(&spec, &seq, Mode::Lambda, &integ).unwrap();
    for (x, y) in a.intensity.iter().zip(&b.intensity) {
        assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{x} {y}");
    }
}

#[test]
fn flat_medium_attenuates_weak_field() {
    // Weak long pulse at the centre of a broad flat line: |E_out/E_in|² = exp(−OD).
    let g = DetuningGrid::symmetric(8.0, 0.02).unwrap();
    let od = 1.2;
    let spec = EnsembleSpec::from_profile(&SpectralProfile::flat(g.clone(), od).unwrap())
        .with_coherence(1e6, 1e6);
    let scale = od / spec.optical_weights[0];
    let spec = EnsembleSpec { od_sum: scale, ..spec };
    let mut seq = PulseSequence::new();
    seq.push_centred(0.0, build_pulse(&PulseSpec::gaussian(1.5, 1e-3)).unwrap(), PulseRole::Input).unwrap();
    let tr = evolve_ensemble(&spec, &seq, Mode::TwoLevel, &Integration::until(0.0, 0.005)).unwrap();
    let ratio = tr.intensity.last().unwrap() / 1e-6;
    assert!((ratio / (-od).exp() - 1.0).abs() < 5e-3, "{ratio}");
}

#[test]
fn step_size_is_checked() {
    let g = DetuningGrid::symmetric(25.0, 0.01).unwrap();
    let spec = EnsembleSpec::from_profile(&SpectralProfile::flat(g, 1.0).unwrap());
    let mut seq = PulseSequence::new();
    seq.push(0.0, build_pulse(&PulseSpec::square(0.2, 1.0)).unwrap(), PulseRole::Input).unwrap();
    match evolve_ensemble(&spec, &seq, Mode::TwoLevel, &Integration::until(0.3, 0.005)) {
        Err(Error::StepTooLarge { required_ns, .. }) => assert!((required_ns - 4.0).abs() < 1e-9),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unnormalized_weights_are_rejected() {
    let mut s = single_bin();
    s.optical_weights[0] = 0.5;
    assert!(matches!(s.validate(), Err(Error::WeightsNotNormalized { .. })));
    let s = single_bin().with_coherence(10.0, 30.0);
    assert!(s.validate().is_err());
}

#[test]
fn overlapping_pulses_are_rejected_unless_flagged() {
    let p = build_pulse(&PulseSpec::gaussian(0.2, 1.0)).unwrap();
    let mut seq = PulseSequence::new();
    seq.push_centred(0.0, p.clone(), PulseRole::Input).unwrap();
    assert!(matches!(seq.push_centred(0.25, p.clone(), PulseRole::Refocus), Err(Error::Overlap { .. })));
    assert!(seq.push_centred(-1.0, p.clone(), PulseRole::Refocus).is_err());
    let mut seq = PulseSequence::overlapping();
    seq.push_centred(0.0, p.clone(), PulseRole::Input).unwrap();
    seq.push_centred(0.25, p, PulseRole::Probe).unwrap();
}

#[test]
fn spin_grid_is_normalized_gaussian() {
    let s = single_bin().with_spin_inhomogeneity(23.6);
    assert_eq!(s.spin_offsets_mhz.len(), SPIN_GRID_POINTS);
    assert!((s.spin_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((s.spin_offsets_mhz[20] - 2.5 * 0.0236).abs() < 1e-12);
    let b = single_bin().with_gaussian_beam(8);
    assert!((b.annuli[0].relative_rabi - (15.0_f64 / 16.0).sqrt()).abs() < 1e-12);
    b.validate().unwrap();
}

#[test]
fn strong_pulse_keeps_density_matrices_physical() {
    let g = DetuningGrid::symmetric(3.0, 0.05).unwrap();
    let p = SpectralProfile::from_fn(g, |f| 2.0 * (-(f / 1.5).powi(2)).exp()).unwrap();
    let spec = EnsembleSpec::from_profile(&p).with_slabs(4).with_gaussian_beam(3).with_coherence(20.0, 15.0);
    let mut seq = PulseSequence::new();
    seq.push(0.0, build_pulse(&PulseSpec::square(1.0, 12.0)).unwrap(), PulseRole::Probe).unwrap();
    for mode in [Mode::TwoLevel, Mode::Lambda] {
        let d = evolve_with_diagnostics(&spec, &seq, mode, &Integration::until(1.2, 0.004)).unwrap().diagnostics;
        assert!(d.max_trace_error <= 1e-9, "{d:?}");
        assert!(d.min_population >= -1e-9 && d.max_population <= 1.0 + 1e-9, "{d:?}");
        assert!(d.min_eigenvalue >= -1e-9, "{d:?}");
    }
}
