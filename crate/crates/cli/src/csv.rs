//! CSV emission with deterministic, round-trip-exact number rendering.
//!
//! Real values are rendered with 17 significant digits (`{:.16e}`), which is
//! exact for IEEE-754 doubles, so reruns of the same configuration produce
//! byte-identical files and downstream consumers can compare them directly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// 17-significant-digit rendering of a double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// An in-memory CSV with a fixed header; rows must match the header width.
pub struct Csv {
    columns: usize,
    buf: String,
}

impl Csv {
    pub fn new(header: &str) -> Csv {
        let columns = header.split(',').count();
        let mut buf = String::with_capacity(256);
        buf.push_str(header);
        buf.push('\n');
        Csv { columns, buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(
            fields.len(),
            self.columns,
            "CSV row width does not match the header"
        );
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }

    /// Writes to the path, or to stdout when no path is given.
    pub fn write(self, path: Option<&Path>) -> io::Result<()> {
        let text = self.into_string();
        match path {
            Some(p) => fs::write(p, text),
            None => io::stdout().write_all(text.as_bytes()),
        }
    }
}
