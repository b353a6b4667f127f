use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn afcmem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afcmem")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("manifest.txt")).unwrap()
}

fn run_into(scenario: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", scenario, "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    afcmem(&args)
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    for name in ["fig5a-afc-sweep", "enhancement-report", "fig4-afc-prep"] {
        let a = tmp.path().join(format!("{name}-a"));
        let b = tmp.path().join(format!("{name}-b"));
        assert!(run_into(name, &a, &[]).status.success());
        assert!(run_into(name, &b, &[]).status.success());
        assert_eq!(manifest(&a), manifest(&b), "{name}");
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = TempDir::new().unwrap();
    let one = tmp.path().join("one");
    let two = tmp.path().join("two");
    assert!(run_into("fig2-echo-decay", &one, &["--threads", "1"]).status.success());
    assert!(run_into("fig2-echo-decay", &two, &["--threads", "2"]).status.success());
    assert_eq!(manifest(&one), manifest(&two));
}

#[test]
fn report_checks_the_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert!(run_into("enhancement-report", &out, &[]).status.success());
    let o = afcmem(&["report", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("manifest ok: 2 files"), "{}", stdout(&o));
    assert!(stdout(&o).contains("mode_overlap = 0.779"));

    std::fs::write(out.join("report.txt"), "tampered\n").unwrap();
    let o = afcmem(&["report", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("digest mismatch for report.txt"), "{}", stderr(&o));
}

#[test]
fn empty_sequence_gives_zero_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "empty.ini", "[scenario]\nkind = bloch\n[ensemble]\nhalf_span_mhz = 2\nbin_khz = 20\nslabs = 2\n[engine]\nt_end_us = 0.5\n");
    let out = tmp.path().join("out");
    let o = run_into(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("pulses = 0\n"));
    assert!(stdout(&o).contains("output_energy = 0\n"), "{}", stdout(&o));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().count() > 100);
}

#[test]
fn unresolvable_comb_is_a_physics_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        &tmp,
        "fine.ini",
        "[scenario]\nkind = afc-sweep\n[ensemble]\nbin_khz = 10\ndelta_khz = 30\n[sequence.1]\nrole = input\n",
    );
    let o = afcmem(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("comb unresolvable: comb period spans 3.00 grid bins"), "{}", stderr(&o));
}

#[test]
fn missing_scheme_echoes_defaults() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        &tmp,
        "echo.ini",
        "[scenario]\nkind = echo-decay\n[ensemble]\nhalf_span_mhz = 8\nbin_khz = 20\nwindow_mhz = 12\n[sequence.1]\nrole = input\narea_pi = 0.5\nfwhm_ns = 200\n[sequence.2]\nrole = refocus\narea_pi = 1\nfwhm_ns = 200\n",
    );
    let o = afcmem(&["validate", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for line in ["scheme.ground_splittings_mhz = 10.2, 17.3", "scheme.t2_us = 49.9", "engine.dt_ns = 10", "status = valid"] {
        assert!(text.contains(line), "missing `{line}` in\n{text}");
    }
}

#[test]
fn schema_errors_name_line_and_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "bad.ini", "[scenario]\nkind = enhancement\n\n[beam]\nwaist_um = wide\n");
    let o = afcmem(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 5: [beam] waist_um: `wide` is not a number"), "{}", stderr(&o));

    let cfg = write(&tmp, "unknown.ini", "[scenario]\nkind = enhancement\n[beam]\nwaist = 3\n");
    let o = afcmem(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4: [beam] waist: unknown key"));

    let o = afcmem(&["run", "no-such-scenario"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn coarse_step_is_a_physics_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        &tmp,
        "coarse.ini",
        "[scenario]\nkind = bloch\n[ensemble]\nhalf_span_mhz = 8\nbin_khz = 20\nprofile = flat\nod = 1\n[engine]\ndt_ns = 200\nt_end_us = 2\n[sequence.1]\nrole = input\nfwhm_ns = 200\n",
    );
    let o = afcmem(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("too coarse"));
}

#[test]
fn fit_command_round_trips_and_flags_non_decay() {
    let tmp = TempDir::new().unwrap();
    let pts: String = [4.0, 8.0, 12.0, 16.0, 20.0]
        .iter()
        .map(|x: &f64| format!("{x},{}\n", 0.3 * (-2.0 * x / 40.0).exp()))
        .collect();
    let csv = write(&tmp, "decay.csv", &format!("x,y\n{pts}"));
    let o = afcmem(&["fit", &csv, "--model", "exponential"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t2: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("t2_us = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((t2 / 40.0 - 1.0).abs() < 1e-6, "{t2}");

    let flat = write(&tmp, "flat.csv", "x,y\n1,0.5\n2,0.5\n3,0.5\n4,0.5\n");
    let o = afcmem(&["fit", &flat, "--model", "exponential"]);
    assert_eq!(o.status.code(), Some(2), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn prepare_writes_profiles_only() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = afcmem(&["prepare", "fig5a-afc-sweep", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert!(m.contains("profile_delta_400khz.csv\t"));
    assert!(!m.contains("trace_"));
}

#[test]
fn sweep_builtin_gives_three_echoes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run_into("fig5a-afc-sweep", &out, &[]);
    assert!(o.status.success());
    let text = stdout(&o);
    for (d, t) in [(400, 2.5), (500, 2.0), (667, 1.5)] {
        let v: f64 = text
            .lines()
            .find_map(|l| l.strip_prefix(&format!("delta_{d}khz.storage_time_us = ")))
            .unwrap()
            .parse()
            .unwrap();
        assert!((v - t).abs() < 5e-3, "{d} kHz: {v}");
    }
    assert_eq!(manifest(&out).lines().filter(|l| l.starts_with("trace_delta_")).count(), 3);
}

#[test]
fn shipped_scenarios_validate() {
    for (name, _) in afcmem_cli::BUILTIN {
        let o = afcmem(&["validate", name]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        assert!(stdout(&o).ends_with("status = valid\n"));
    }
}

#[test]
fn emitted_csv_files_round_trip() {
    use afcmem::spectro::csv::{points_from_csv, profile_from_csv, profile_to_csv, trace_from_csv, trace_to_csv};
    let tmp = TempDir::new().unwrap();
    for name in ["fig4-afc-prep", "fig5a-afc-sweep", "fig2-echo-decay"] {
        let out = tmp.path().join(name);
        assert!(run_into(name, &out, &[]).status.success());
        for line in manifest(&out).lines() {
            let file = line.split('\t').next().unwrap();
            let text = std::fs::read_to_string(out.join(file)).unwrap();
            if file.starts_with("profile_") {
                let p = profile_from_csv(&text).unwrap();
                assert_eq!(profile_from_csv(&profile_to_csv(&p)).unwrap().od, p.od, "{file}");
            } else if file.starts_with("trace_") {
                let t = trace_from_csv(&text).unwrap();
                assert_eq!(trace_from_csv(&trace_to_csv(&t)).unwrap().intensity, t.intensity, "{file}");
            } else if file == "points.csv" {
                assert!(points_from_csv(&text).unwrap().len() >= 3);
            }
        }
    }
}

#[test]
fn list_names_builtins() {
    let o = afcmem(&["list"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), afcmem_cli::BUILTIN.len());
}
