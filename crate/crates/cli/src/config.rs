//! Scenario files: `[section]` headers, `key = value` lines, `#` comments.
//!
//! Every value remembers its line so schema errors can point at it. Keys are
//! consumed as the typed scenario is built; anything left over is reported as
//! unknown.

use std::cell::Cell;
use std::fmt;

use crate::error::CliError;

#[derive(Debug)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    used: Cell<bool>,
}

#[derive(Debug)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Default)]
pub struct Document {
    pub sections: Vec<Section>,
}

fn schema(line: usize, section: &str, key: &str, reason: impl Into<String>) -> CliError {
    CliError::Schema {
        line,
        field: if key.is_empty() { format!("[{section}]") } else { format!("[{section}] {key}") },
        reason: reason.into(),
    }
}

impl Document {
    pub fn parse(text: &str) -> Result<Document, CliError> {
        let mut doc = Document::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Schema { line, field: s.into(), reason: "unterminated section header".into() })?
                    .trim();
                if name.is_empty() {
                    return Err(CliError::Schema { line, field: s.into(), reason: "empty section name".into() });
                }
                if doc.sections.iter().any(|x| x.name == name) {
                    return Err(schema(line, name, "", "duplicate section"));
                }
                doc.sections.push(Section { name: name.to_string(), line, entries: Vec::new() });
                continue;
            }
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Schema { line, field: s.into(), reason: "expected `key = value`".into() })?;
            let sec = doc
                .sections
                .last_mut()
                .ok_or_else(|| CliError::Schema { line, field: k.trim().into(), reason: "key outside any section".into() })?;
            let key = k.trim().to_string();
            if sec.entries.iter().any(|e| e.key == key) {
                return Err(schema(line, &sec.name, &key, "duplicate key"));
            }
            sec.entries.push(Entry { key, value: v.trim().to_string(), line, used: Cell::new(false) });
        }
        Ok(doc)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Sections named `prefix.N`, sorted by `N`.
    pub fn numbered(&self, prefix: &str) -> Result<Vec<(usize, &Section)>, CliError> {
        let mut out = Vec::new();
        for s in &self.sections {
            if let Some(n) = s.name.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')) {
                let idx = n
                    .parse::<usize>()
                    .map_err(|_| schema(s.line, &s.name, "", format!("`{n}` is not a sequence number")))?;
                out.push((idx, s));
            }
        }
        out.sort_by_key(|(n, _)| *n);
        Ok(out)
    }

    /// Sections whose names are not in `known` (numbered sections match by prefix).
    pub fn check_sections(&self, known: &[&str]) -> Result<(), CliError> {
        for s in &self.sections {
            let base = s.name.split('.').next().unwrap_or("");
            let ok = known.iter().any(|k| *k == s.name || (*k == base && s.name.contains('.')));
            if !ok {
                return Err(schema(s.line, &s.name, "", "unknown section"));
            }
        }
        Ok(())
    }

    pub fn check_consumed(&self) -> Result<(), CliError> {
        for s in &self.sections {
            if let Some(e) = s.entries.iter().find(|e| !e.used.get()) {
                return Err(schema(e.line, &s.name, &e.key, "unknown key"));
            }
        }
        Ok(())
    }
}

/// Typed, consuming view of one section. A missing section reads as empty.
#[derive(Clone, Copy)]
pub struct Reader<'a> {
    name: &'a str,
    section: Option<&'a Section>,
}

impl<'a> Reader<'a> {
    pub fn new(doc: &'a Document, name: &'a str) -> Self {
        Reader { name, section: doc.section(name) }
    }

    pub fn of(section: &'a Section) -> Self {
        Reader { name: &section.name, section: Some(section) }
    }

    pub fn present(&self) -> bool {
        self.section.is_some()
    }

    pub fn name(&self) -> &str {
        self.name
    }

    pub fn line(&self) -> usize {
        self.section.map_or(0, |s| s.line)
    }

    fn entry(&self, key: &str) -> Option<&'a Entry> {
        let e = self.section?.entries.iter().find(|e| e.key == key)?;
        e.used.set(true);
        Some(e)
    }

    pub fn has(&self, key: &str) -> bool {
        self.section.is_some_and(|s| s.entries.iter().any(|e| e.key == key))
    }

    pub fn error(&self, key: &str, reason: impl Into<String>) -> CliError {
        let line = self
            .section
            .and_then(|s| s.entries.iter().find(|e| e.key == key))
            .map_or(self.line(), |e| e.line);
        schema(line, self.name, key, reason)
    }

    pub fn str_opt(&self, key: &str) -> Option<&'a str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    pub fn str_or(&self, key: &str, default: &'a str) -> &'a str {
        self.str_opt(key).unwrap_or(default)
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => parse_f64(&e.value)
                .map(Some)
                .ok_or_else(|| schema(e.line, self.name, key, format!("`{}` is not a number", e.value))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn positive_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.f64_or(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.error(key, format!("must be positive, got {v}")))
        }
    }

    pub fn non_negative_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.f64_or(key, default)?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(self.error(key, format!("must be >= 0, got {v}")))
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.entry(key) {
            None => Ok(default),
            Some(e) => e
                .value
                .parse::<usize>()
                .map_err(|_| schema(e.line, self.name, key, format!("`{}` is not a non-negative integer", e.value))),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.entry(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "on" => Ok(true),
                "false" | "no" | "off" => Ok(false),
                v => Err(schema(e.line, self.name, key, format!("`{v}` is not a boolean"))),
            },
        }
    }

    /// Comma-separated list of numbers.
    pub fn list_opt(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(e) = self.entry(key) else { return Ok(None) };
        e.value
            .split(',')
            .map(|x| {
                parse_f64(x.trim()).ok_or_else(|| schema(e.line, self.name, key, format!("`{}` is not a number", x.trim())))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        Ok(self.list_opt(key)?.unwrap_or_else(|| default.to_vec()))
    }

    pub fn pair_or(&self, key: &str, default: [f64; 2]) -> Result<[f64; 2], CliError> {
        match self.list_opt(key)? {
            None => Ok(default),
            Some(v) if v.len() == 2 => Ok([v[0], v[1]]),
            Some(v) => Err(self.error(key, format!("expected two values, got {}", v.len()))),
        }
    }

    pub fn choice<T: Copy>(&self, key: &str, default: T, options: &[(&str, T)]) -> Result<T, CliError> {
        match self.entry(key) {
            None => Ok(default),
            Some(e) => options.iter().find(|(n, _)| *n == e.value).map(|(_, v)| *v).ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                schema(e.line, self.name, key, format!("`{}` is not one of {}", e.value, names.join(", ")))
            }),
        }
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Accumulates the effective parameters of a scenario, defaults included.
#[derive(Debug, Default, Clone)]
pub struct Effective {
    lines: Vec<(String, String)>,
}

impl Effective {
    pub fn push(&mut self, section: &str, key: &str, value: impl fmt::Display) {
        self.lines.push((format!("{section}.{key}"), value.to_string()));
    }

    pub fn list(&mut self, section: &str, key: &str, values: &[f64]) {
        let v: Vec<String> = values.iter().map(|x| x.to_string()).collect();
        self.push(section, key, v.join(", "));
    }

    pub fn to_text(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_reports_lines() {
        let doc = Document::parse("# c\n[a]\nx = 1.5\n\n[b.2]\ny = 3, 4\n[b.1]\n").unwrap();
        let a = Reader::new(&doc, "a");
        assert_eq!(a.f64_or("x", 0.0).unwrap(), 1.5);
        let seq = doc.numbered("b").unwrap();
        assert_eq!(seq.iter().map(|(n, _)| *n).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(Reader::of(seq[1].1).list_or("y", &[]).unwrap(), vec![3.0, 4.0]);
        assert!(doc.check_consumed().is_ok());
    }

    #[test]
    fn bad_number_names_line_and_field() {
        let doc = Document::parse("[ensemble]\n\ndelta_khz = four\n").unwrap();
        let e = Reader::new(&doc, "ensemble").f64_opt("delta_khz").unwrap_err();
        assert_eq!(e.to_string(), "line 3: [ensemble] delta_khz: `four` is not a number");
    }

    #[test]
    fn leftover_keys_are_unknown() {
        let doc = Document::parse("[engine]\ndt_ns = 2\ndt_fs = 1\n").unwrap();
        Reader::new(&doc, "engine").f64_or("dt_ns", 1.0).unwrap();
        let e = doc.check_consumed().unwrap_err();
        assert_eq!(e.to_string(), "line 3: [engine] dt_fs: unknown key");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Document::parse("x = 1\n").is_err());
        assert!(Document::parse("[a\n").is_err());
        assert!(Document::parse("[a]\nnovalue\n").is_err());
        assert!(Document::parse("[a]\n[a]\n").is_err());
    }
}
