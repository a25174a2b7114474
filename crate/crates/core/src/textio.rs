//! Minimal line-oriented CSV handling shared by the file formats.
//!
//! All tables are plain comma-separated UTF-8 with a fixed header row;
//! blank lines and lines starting with `#` are skipped. Floats are written
//! with Rust's shortest round-trip formatting so that a write/read cycle is
//! lossless.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) struct Row<'a> {
    pub line: usize,
    pub fields: Vec<&'a str>,
}

impl Row<'_> {
    pub fn f64(&self, idx: usize, name: &str) -> Result<f64> {
        let raw = self.fields[idx].trim();
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::parse(self.line, format!("{name}: '{raw}' is not a number")))?;
        if !v.is_finite() {
            return Err(Error::parse(self.line, format!("{name}: '{raw}' is not finite")));
        }
        Ok(v)
    }

    pub fn str(&self, idx: usize) -> &str {
        self.fields[idx].trim()
    }
}

/// Splits `text` into data rows after validating the header.
pub(crate) fn rows<'a>(text: &'a str, header: &[&str]) -> Result<Vec<Row<'a>>> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if !seen_header {
            let names: Vec<&str> = fields.iter().map(|f| f.trim()).collect();
            if names != header {
                return Err(Error::parse(
                    line,
                    format!("expected header '{}', found '{}'", header.join(","), trimmed),
                ));
            }
            seen_header = true;
            continue;
        }
        if fields.len() != header.len() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        out.push(Row { line, fields });
    }
    if !seen_header {
        return Err(Error::parse(0, format!("missing header '{}'", header.join(","))));
    }
    Ok(out)
}

pub(crate) fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
