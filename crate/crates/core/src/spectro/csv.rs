//! CSV serialisation of profiles and traces.
//!
//! Profiles: header `detuning_mhz,od`. Traces: header `time_us,intensity`,
//! or `time_us,intensity,re,im` when the complex field is present. Numbers
//! use the shortest round-trip decimal representation, lines end in `\n`.

use std::fmt::Write as _;

use super::profile::{DetuningGrid, SpectralProfile};
use super::trace::Trace;
use crate::error::{Error, Result};
use crate::C64;

pub const PROFILE_HEADER: &str = "detuning_mhz,od";
pub const TRACE_HEADER: &str = "time_us,intensity";
pub const TRACE_FIELD_HEADER: &str = "time_us,intensity,re,im";

pub fn profile_to_csv(p: &SpectralProfile) -> String {
    let mut s = String::with_capacity(p.len() * 24);
    s.push_str(PROFILE_HEADER);
    s.push('\n');
    for (f, od) in p.grid.values().zip(&p.od) {
        let _ = writeln!(s, "{f},{od}");
    }
    s
}

pub fn trace_to_csv(t: &Trace) -> String {
    let mut s = String::with_capacity(t.len() * 48);
    match &t.field {
        Some(field) => {
            s.push_str(TRACE_FIELD_HEADER);
            s.push('\n');
            for (i, (v, e)) in t.intensity.iter().zip(field).enumerate() {
                let _ = writeln!(s, "{},{v},{},{}", t.time(i), e.re, e.im);
            }
        }
        None => {
            s.push_str(TRACE_HEADER);
            s.push('\n');
            for (i, v) in t.intensity.iter().enumerate() {
                let _ = writeln!(s, "{},{v}", t.time(i));
            }
        }
    }
    s
}

/// Parse numeric rows after a fixed header, checking the column count.
fn rows(text: &str, headers: &[&str]) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or(Error::Csv {
        line: 1,
        reason: "empty file".into(),
    })?;
    let head = head.trim();
    let which = headers.iter().position(|h| *h == head).ok_or_else(|| Error::Csv {
        line: 1,
        reason: format!("unexpected header `{head}`, expected one of {headers:?}"),
    })?;
    let ncol = headers[which].split(',').count();
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| Error::Csv {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if vals.len() != ncol {
            return Err(Error::Csv {
                line: i + 1,
                reason: format!("{} columns, expected {ncol}", vals.len()),
            });
        }
        out.push(vals);
    }
    Ok((which, out))
}

/// Recover a uniform grid from sample positions.
fn uniform_axis(xs: &[f64], what: &'static str) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::Csv {
            line: 2,
            reason: format!("{what} needs at least two rows"),
        });
    }
    let step = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    for (i, x) in xs.iter().enumerate() {
        let expect = xs[0] + i as f64 * step;
        if (x - expect).abs() > 1e-6 * step.abs().max(1e-12) {
            return Err(Error::Csv {
                line: i + 2,
                reason: format!("{what} axis is not uniform"),
            });
        }
    }
    Ok((xs[0], step))
}

pub fn profile_from_csv(text: &str) -> Result<SpectralProfile> {
    let (_, rows) = rows(text, &[PROFILE_HEADER])?;
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let (start, step) = uniform_axis(&xs, "detuning")?;
    let grid = DetuningGrid::new(start, step, xs.len())?;
    SpectralProfile::new(grid, rows.iter().map(|r| r[1]).collect())
}

pub fn trace_from_csv(text: &str) -> Result<Trace> {
    let (which, rows) = rows(text, &[TRACE_HEADER, TRACE_FIELD_HEADER])?;
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let (start, step) = uniform_axis(&xs, "time")?;
    let mut t = Trace::from_intensity(start, step, rows.iter().map(|r| r[1]).collect())?;
    if which == 1 {
        t.field = Some(rows.iter().map(|r| C64::new(r[2], r[3])).collect());
    }
    Ok(t)
}

/// Two-column `x,y` point files used by the decay fits; any header line is
/// accepted.
pub fn points_from_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 2 {
            return Err(Error::Csv {
                line: i + 1,
                reason: format!("{} columns, expected 2", cols.len()),
            });
        }
        match (cols[0].trim().parse::<f64>(), cols[1].trim().parse::<f64>()) {
            (Ok(x), Ok(y)) => out.push((x, y)),
            _ if i == 0 => continue,
            _ => {
                return Err(Error::Csv {
                    line: i + 1,
                    reason: "non-numeric value".into(),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn profile_round_trips(ods in prop::collection::vec(0.0f64..20.0, 2..64), step in 0.001f64..1.0) {
            let grid = DetuningGrid::new(-3.0, step, ods.len()).unwrap();
            let p = SpectralProfile::new(grid, ods).unwrap();
            let back = profile_from_csv(&profile_to_csv(&p)).unwrap();
            prop_assert_eq!(&back.od, &p.od);
            prop_assert!((back.grid.step_mhz - step).abs() < 1e-9 * step.max(1.0));
        }

        #[test]
        fn trace_round_trips(re in prop::collection::vec(-5.0f64..5.0, 2..64)) {
            let field: Vec<C64> = re.iter().map(|&r| C64::new(r, 0.5 * r)).collect();
            let t = Trace::from_field(-1.25, 0.002, field);
            let back = trace_from_csv(&trace_to_csv(&t)).unwrap();
            prop_assert_eq!(&back.intensity, &t.intensity);
            prop_assert_eq!(&back.field, &t.field);
            prop_assert!((back.dt_us - 0.002).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_header_reports_line_one() {
        let e = profile_from_csv("f,od\n0,1\n").unwrap_err();
        assert!(matches!(e, Error::Csv { line: 1, .. }));
    }
}
