//! Text output: number formatting, CSV tables, key=value reports and atomic
//! file writes.
//!
//! Real numbers are written like C's `%.17g` and complex numbers like
//! `%.17g%+.17gi`, which is enough digits for an exact round trip.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::linalg::C64;

/// `%.17g`.
pub fn format_g17(x: f64) -> String {
    format_g(x, 17, false)
}

/// `%+.17g`.
pub fn format_g17_signed(x: f64) -> String {
    format_g(x, 17, true)
}

/// `%.17g%+.17gi`.
pub fn format_complex(z: C64) -> String {
    format!("{}{}i", format_g17(z.re), format_g17_signed(z.im))
}

fn format_g(x: f64, precision: usize, plus: bool) -> String {
    let sign = if x.is_sign_negative() {
        "-"
    } else if plus {
        "+"
    } else {
        ""
    };
    if x.is_nan() {
        return format!("{}nan", if plus { "+" } else { "" });
    }
    let a = x.abs();
    if a.is_infinite() {
        return format!("{sign}inf");
    }
    if a == 0.0 {
        return format!("{sign}0");
    }
    // exponent after rounding to `precision` significant digits
    let sci = format!("{:.*e}", precision - 1, a);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let body = if exp < -4 || exp >= precision as i32 {
        let m = strip_zeros(mantissa);
        let esign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{esign}{:02}", exp.abs())
    } else {
        let decimals = (precision as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, a)).to_string()
    };
    format!("{sign}{body}")
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses the output of [`format_complex`] (and plain reals).
pub fn parse_complex(s: &str) -> Option<C64> {
    let s = s.trim();
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|re| C64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    // split at the last sign that is not part of an exponent
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))?;
    let re = body[..split].parse::<f64>().ok()?;
    let im = body[split..].parse::<f64>().ok()?;
    Some(C64::new(re, im))
}

/// Ordered `key=value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvReport {
    entries: Vec<(String, String)>,
}

impl KvReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.push(key, format_g17(value))
    }

    pub fn extend(&mut self, other: &KvReport) -> &mut Self {
        self.entries.extend(other.entries.iter().cloned());
        self
    }

    /// Copy of `other` with every key prefixed.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &KvReport) -> &mut Self {
        for (k, v) in &other.entries {
            self.entries.push((format!("{prefix}{k}"), v.clone()));
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { entries }
    }
}

/// Simple CSV table; cells never contain commas so no quoting is needed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Self {
        let mut lines = text.lines();
        let header = lines
            .next()
            .map(|l| l.split(',').map(str::to_string).collect())
            .unwrap_or_default();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        Self { header, rows }
    }
}

/// Writes via a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}
