//! Sectioned key-value configuration with line tracking and environment
//! overrides.

use std::collections::BTreeMap;
use std::fmt;

/// Prefix of environment variables that override configuration keys, as
/// `COLDAMP_<SECTION>__<KEY>`.
pub const ENV_PREFIX: &str = "COLDAMP_";

/// Where a value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { line: usize },
    Env { var: String },
    Flag { name: String },
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { line } => write!(f, "line {line}"),
            Origin::Env { var } => write!(f, "environment variable {var}"),
            Origin::Flag { name } => write!(f, "flag --{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub origin: Origin,
}

/// A diagnostic tied to a location in the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub location: String,
    pub field: Option<String>,
    pub message: String,
}

impl Diagnostic {
    pub fn at_line(line: usize, message: impl Into<String>) -> Self {
        Self {
            location: format!("line {line}"),
            field: None,
            message: message.into(),
        }
    }

    pub fn field(section: &str, key: &str, origin: Option<&Origin>, message: impl Into<String>) -> Self {
        Self {
            location: origin.map_or_else(|| "configuration".to_string(), |o| o.to_string()),
            field: Some(format!("{section}.{key}")),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(k) => write!(f, "{}: `{k}`: {}", self.location, self.message),
            None => write!(f, "{}: {}", self.location, self.message),
        }
    }
}

/// Parsed configuration: section → key → entry. Keys before any section
/// header may be written as `section.key`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

fn strip_comment(line: &str) -> &str {
    let t = line.trim_start();
    if t.starts_with(';') || t.starts_with('#') {
        return "";
    }
    // Inline comments need whitespace before the marker so that values
    // such as URLs or `C#` survive.
    let bytes = line.as_bytes();
    for i in 1..bytes.len() {
        if (bytes[i] == b';' || bytes[i] == b'#') && bytes[i - 1].is_ascii_whitespace() {
            return &line[..i];
        }
    }
    line
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let mut cfg = Config::default();
        let mut diags = Vec::new();
        let mut section: Option<String> = None;
        // Keys under a malformed header are skipped rather than attributed
        // to the previous section.
        let mut skipping = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = strip_comment(raw).trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                match rest.strip_suffix(']') {
                    Some(name) if valid_name(name.trim()) => {
                        section = Some(name.trim().to_ascii_lowercase());
                        skipping = false;
                    }
                    _ => {
                        diags.push(Diagnostic::at_line(line, format!("malformed section header `{s}`")));
                        skipping = true;
                    }
                }
                continue;
            }
            if skipping {
                continue;
            }
            let Some((k, v)) = s.split_once('=') else {
                diags.push(Diagnostic::at_line(line, format!("expected `key = value`, found `{s}`")));
                continue;
            };
            let k = k.trim().to_ascii_lowercase();
            let mut v = v.trim();
            if v.len() >= 2 && ((v.starts_with('"') && v.ends_with('"')) || (v.starts_with('\'') && v.ends_with('\''))) {
                v = &v[1..v.len() - 1];
            }
            let (sec, key) = match (&section, k.split_once('.')) {
                (_, Some((a, b))) => (a.to_string(), b.to_string()),
                (Some(sec), None) => (sec.clone(), k.clone()),
                (None, None) => {
                    diags.push(Diagnostic::at_line(line, format!("key `{k}` appears before any [section]")));
                    continue;
                }
            };
            if !valid_name(&sec) || !valid_name(&key) {
                diags.push(Diagnostic::at_line(line, format!("invalid key name `{k}`")));
                continue;
            }
            let entries = cfg.sections.entry(sec.clone()).or_default();
            if let Some(prev) = entries.get(&key) {
                diags.push(Diagnostic::at_line(
                    line,
                    format!("duplicate key `{sec}.{key}` (first set at {})", prev.origin),
                ));
                continue;
            }
            entries.insert(
                key,
                Entry {
                    value: v.to_string(),
                    origin: Origin::File { line },
                },
            );
        }
        if diags.is_empty() {
            Ok(cfg)
        } else {
            Err(diags)
        }
    }

    /// Applies `COLDAMP_<SECTION>__<KEY>=value` overrides; returns the
    /// overridden `section.key` names in order.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<Vec<String>, Vec<Diagnostic>>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        vars.sort();
        let mut applied = Vec::new();
        let mut diags = Vec::new();
        for (var, value) in vars {
            let rest = &var[ENV_PREFIX.len()..];
            match rest.split_once("__") {
                Some((s, k)) if valid_name(s) && valid_name(k) => {
                    let (s, k) = (s.to_ascii_lowercase(), k.to_ascii_lowercase());
                    applied.push(format!("{s}.{k}"));
                    self.set(&s, &k, value, Origin::Env { var });
                }
                _ => diags.push(Diagnostic {
                    location: format!("environment variable {var}"),
                    field: None,
                    message: format!("expected {ENV_PREFIX}<SECTION>__<KEY>"),
                }),
            }
        }
        if diags.is_empty() {
            Ok(applied)
        } else {
            Err(diags)
        }
    }

    pub fn set(&mut self, section: &str, key: &str, value: String, origin: Origin) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), Entry { value, origin });
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.get(section).is_some_and(|s| !s.is_empty())
    }

    /// All `(section, key, entry)` triples in sorted order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, &Entry)> {
        self.sections
            .iter()
            .flat_map(|(s, m)| m.iter().map(move |(k, e)| (s.as_str(), k.as_str(), e)))
    }
}

/// Typed access that collects diagnostics instead of failing fast, so a
/// single pass reports every bad field.
pub struct Reader<'a> {
    cfg: &'a Config,
    pub diags: Vec<Diagnostic>,
}

impl<'a> Reader<'a> {
    pub fn new(cfg: &'a Config) -> Self {
        Self { cfg, diags: Vec::new() }
    }

    pub fn config(&self) -> &Config {
        self.cfg
    }

    pub fn error(&mut self, section: &str, key: &str, message: impl Into<String>) {
        let origin = self.cfg.get(section, key).map(|e| &e.origin);
        self.diags.push(Diagnostic::field(section, key, origin, message));
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.cfg.get(section, key).is_some()
    }

    pub fn string(&mut self, section: &str, key: &str) -> Option<String> {
        self.cfg.get(section, key).map(|e| e.value.clone())
    }

    pub fn require_string(&mut self, section: &str, key: &str) -> Option<String> {
        let v = self.string(section, key);
        if v.is_none() {
            self.error(section, key, "required key is missing");
        }
        v
    }

    pub fn f64(&mut self, section: &str, key: &str) -> Option<f64> {
        let e = self.cfg.get(section, key)?;
        match e.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                let msg = format!("expected a finite number, found `{}`", e.value);
                self.error(section, key, msg);
                None
            }
        }
    }

    pub fn require_f64(&mut self, section: &str, key: &str) -> Option<f64> {
        if !self.has(section, key) {
            self.error(section, key, "required key is missing");
            return None;
        }
        self.f64(section, key)
    }

    /// Number that must be positive (or non-negative with `allow_zero`).
    pub fn positive(&mut self, section: &str, key: &str, allow_zero: bool) -> Option<f64> {
        let v = self.f64(section, key)?;
        if v > 0.0 || (allow_zero && v == 0.0) {
            Some(v)
        } else {
            let what = if allow_zero { "non-negative" } else { "positive" };
            self.error(section, key, format!("must be {what}, found {v}"));
            None
        }
    }

    pub fn require_positive(&mut self, section: &str, key: &str, allow_zero: bool) -> Option<f64> {
        if !self.has(section, key) {
            self.error(section, key, "required key is missing");
            return None;
        }
        self.positive(section, key, allow_zero)
    }

    pub fn usize(&mut self, section: &str, key: &str) -> Option<usize> {
        let e = self.cfg.get(section, key)?;
        match e.value.parse::<usize>() {
            Ok(v) => Some(v),
            Err(_) => {
                let msg = format!("expected a non-negative integer, found `{}`", e.value);
                self.error(section, key, msg);
                None
            }
        }
    }

    pub fn u64(&mut self, section: &str, key: &str) -> Option<u64> {
        let e = self.cfg.get(section, key)?;
        match e.value.parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                let msg = format!("expected an unsigned 64-bit integer, found `{}`", e.value);
                self.error(section, key, msg);
                None
            }
        }
    }

    pub fn bool(&mut self, section: &str, key: &str) -> Option<bool> {
        let e = self.cfg.get(section, key)?;
        match e.value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Some(true),
            "false" | "no" | "off" | "0" => Some(false),
            _ => {
                let msg = format!("expected true or false, found `{}`", e.value);
                self.error(section, key, msg);
                None
            }
        }
    }

    /// One of `choices` (case-insensitive).
    pub fn choice(&mut self, section: &str, key: &str, choices: &[&'static str]) -> Option<&'static str> {
        let e = self.cfg.get(section, key)?;
        let v = e.value.to_ascii_lowercase();
        match choices.iter().find(|c| **c == v) {
            Some(c) => Some(c),
            None => {
                let msg = format!("expected one of {}, found `{}`", choices.join(", "), e.value);
                self.error(section, key, msg);
                None
            }
        }
    }

    /// Comma-separated list; `Some(vec![])` for an explicitly empty value.
    pub fn list(&mut self, section: &str, key: &str) -> Option<Vec<String>> {
        let e = self.cfg.get(section, key)?;
        Some(
            e.value
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        )
    }
}
