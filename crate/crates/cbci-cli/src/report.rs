//! Plain-text report builder. Reports are a sequence of named sections;
//! key/value lines and table rows are tab-separated so the output stays
//! grep- and cut-friendly.

use std::fmt::Write;

#[derive(Debug, Default)]
pub struct Doc {
    body: String,
}

impl Doc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn section(&mut self, name: &str) {
        if !self.body.is_empty() {
            self.body.push('\n');
        }
        let _ = writeln!(self.body, "[{name}]");
    }

    pub fn table(&mut self, name: &str) {
        if !self.body.is_empty() {
            self.body.push('\n');
        }
        let _ = writeln!(self.body, "[table: {name}]");
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.body, "{key}\t{value}");
    }

    pub fn row<I, T>(&mut self, cells: I)
    where
        I: IntoIterator<Item = T>,
        T: std::fmt::Display,
    {
        let joined = cells
            .into_iter()
            .map(|cell| cell.to_string())
            .collect::<Vec<_>>()
            .join("\t");
        let _ = writeln!(self.body, "{joined}");
    }

    pub fn finish(self) -> String {
        self.body
    }
}

/// Fixed six-decimal rendering used for every distance and metric in reports.
pub fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

/// Makes a method or column name safe as a table-name suffix: alphanumerics
/// survive, everything else becomes an underscore, runs collapse.
pub fn sanitize(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut gap = false;
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
            gap = false;
        } else if !gap && !out.is_empty() {
            out.push('_');
            gap = true;
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}
