//! Recipe files: one `[segment]` section per pump segment, `key = value`
//! lines, `#` comments. Keys left out fall back to the hole-burner defaults.
//!
//! ```text
//! [segment]
//! pattern = sweep
//! lo_mhz = -9
//! hi_mhz = 9
//! duration_ms = 5
//!
//! [segment]
//! pattern = comb
//! bands_mhz = -1.0:-0.7, 0.1:0.4
//! duration_ms = 2
//! branching = 0.5 0.25 0.25; 0.3 0.3 0.4; 0.2 0.4 0.4
//! ```

use std::fmt::Write as _;

use super::{FrequencyPattern, PumpConfig, PumpRecipe, PumpSegment};
use crate::error::{Error, Result};

fn syntax(line: usize, reason: impl Into<String>) -> Error {
    Error::Syntax { line, reason: reason.into() }
}

fn number(line: usize, key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| syntax(line, format!("`{key}`: `{}` is not a number", v.trim())))
}

#[derive(Default)]
struct Draft {
    line: usize,
    pattern: Option<String>,
    frequency: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    bands: Option<Vec<(f64, f64)>>,
    duration: Option<f64>,
    rate: Option<f64>,
    linewidth: Option<f64>,
    branching: Option<[[f64; 3]; 3]>,
}

impl Draft {
    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "pattern" => self.pattern = Some(value.trim().to_ascii_lowercase()),
            "frequency_mhz" => self.frequency = Some(number(line, key, value)?),
            "lo_mhz" => self.lo = Some(number(line, key, value)?),
            "hi_mhz" => self.hi = Some(number(line, key, value)?),
            "duration_ms" => self.duration = Some(number(line, key, value)?),
            "rate_per_s" => self.rate = Some(number(line, key, value)?),
            "linewidth_khz" => self.linewidth = Some(number(line, key, value)?),
            "bands_mhz" => {
                let bands = value
                    .split(',')
                    .map(|b| {
                        let (lo, hi) = b
                            .split_once(':')
                            .ok_or_else(|| syntax(line, format!("band `{}` must be lo:hi", b.trim())))?;
                        Ok((number(line, key, lo)?, number(line, key, hi)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.bands = Some(bands);
            }
            "branching" => {
                let rows: Vec<&str> = value.split(';').collect();
                if rows.len() != 3 {
                    return Err(syntax(line, "branching needs three `;`-separated rows"));
                }
                let mut b = [[0.0; 3]; 3];
                for (r, row) in rows.iter().enumerate() {
                    let vals: Vec<&str> = row.split_whitespace().collect();
                    if vals.len() != 3 {
                        return Err(syntax(line, format!("branching row {r} needs three values")));
                    }
                    for (c, v) in vals.iter().enumerate() {
                        b[r][c] = number(line, key, v)?;
                    }
                }
                self.branching = Some(b);
            }
            other => return Err(syntax(line, format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    fn finish(self, defaults: &PumpConfig) -> Result<PumpSegment> {
        let line = self.line;
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| syntax(line, format!("segment missing `{key}`")));
        let pattern = match self.pattern.as_deref() {
            Some("fixed") => FrequencyPattern::Fixed(need(self.frequency, "frequency_mhz")?),
            Some("sweep") => FrequencyPattern::Sweep {
                lo: need(self.lo, "lo_mhz")?,
                hi: need(self.hi, "hi_mhz")?,
            },
            Some("comb") => FrequencyPattern::Comb(
                self.bands
                    .ok_or_else(|| syntax(line, "segment missing `bands_mhz`"))?,
            ),
            Some(other) => return Err(syntax(line, format!("unknown pattern `{other}`"))),
            None => return Err(syntax(line, "segment missing `pattern`")),
        };
        let seg = PumpSegment {
            pattern,
            duration_ms: need(self.duration, "duration_ms")?,
            rate_per_s: self.rate.unwrap_or(defaults.rate_per_s),
            branching: self.branching.unwrap_or(defaults.branching),
            linewidth_khz: self.linewidth.unwrap_or(defaults.pump_linewidth_khz),
        };
        seg.validate().map_err(|e| syntax(line, e.to_string()))?;
        if seg.duration_ms <= 0.0 {
            return Err(syntax(line, "duration_ms must be positive"));
        }
        Ok(seg)
    }
}

impl PumpRecipe {
    /// Parse a recipe file; omitted rate, branching and linewidth come from
    /// `defaults`.
    pub fn parse(text: &str, defaults: &PumpConfig) -> Result<PumpRecipe> {
        let mut segments = Vec::new();
        let mut draft: Option<Draft> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if content.starts_with('[') {
                if content != "[segment]" {
                    return Err(syntax(line, format!("unknown section `{content}`")));
                }
                if let Some(d) = draft.take() {
                    segments.push(d.finish(defaults)?);
                }
                draft = Some(Draft { line, ..Draft::default() });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| syntax(line, "expected `key = value`"))?;
            draft
                .as_mut()
                .ok_or_else(|| syntax(line, "key outside a [segment] section"))?
                .set(line, key.trim(), value)?;
        }
        if let Some(d) = draft {
            segments.push(d.finish(defaults)?);
        }
        let recipe = PumpRecipe { segments };
        recipe.validate()?;
        Ok(recipe)
    }

    /// Inverse of [`PumpRecipe::parse`]; every key is written explicitly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            out.push_str("[segment]\n");
            match &seg.pattern {
                FrequencyPattern::Fixed(f) => {
                    let _ = writeln!(out, "pattern = fixed\nfrequency_mhz = {f}");
                }
                FrequencyPattern::Sweep { lo, hi } => {
                    let _ = writeln!(out, "pattern = sweep\nlo_mhz = {lo}\nhi_mhz = {hi}");
                }
                FrequencyPattern::Comb(bands) => {
                    let b: Vec<String> = bands.iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect();
                    let _ = writeln!(out, "pattern = comb\nbands_mhz = {}", b.join(", "));
                }
            }
            let rows: Vec<String> = seg
                .branching
                .iter()
                .map(|r| format!("{} {} {}", r[0], r[1], r[2]))
                .collect();
            let _ = writeln!(
                out,
                "duration_ms = {}\nrate_per_s = {}\nlinewidth_khz = {}\nbranching = {}\n",
                seg.duration_ms,
                seg.rate_per_s,
                seg.linewidth_khz,
                rows.join("; ")
            );
        }
        out
    }
}
