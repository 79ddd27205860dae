//! Deterministic artifact serialization.
//!
//! CSV floats are written with Rust's shortest round-trip `Display`
//! formatting, so identical runs produce byte-identical files — the
//! regression suites diff outputs directly. No quoting or escaping is
//! needed: headers are fixed identifiers and all cells are numbers.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// A numeric table destined for CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    /// Append a row; panics if the width disagrees with the header (a
    /// programming error, not a user input).
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "table row width must match header"
        );
        self.rows.push(row);
    }

    /// Render as CSV text (header line first, `\n` endings).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Write text to `dir/name`, creating the directory if needed.
pub fn write_text(dir: &Path, name: &str, text: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}
