//! Byte-stable reports: a text rendering for people and a JSON twin.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    fn render(&self, out: &mut String) {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            padded.join("  ").trim_end().to_string()
        };
        let _ = writeln!(out, "## {}", self.title);
        let _ = writeln!(out, "{}", line(&self.columns));
        for row in &self.rows {
            let _ = writeln!(out, "{}", line(row));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub tables: Vec<Table>,
    /// Named per-metric series of `(t, value)` points.
    pub series: BTreeMap<String, Vec<(u64, f64)>>,
    /// Free-form result lines, e.g. `preferred: beta`.
    pub lines: Vec<String>,
}

impl Report {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Report {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash.into(),
            tables: Vec::new(),
            series: BTreeMap::new(),
            lines: Vec::new(),
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# uailab {} ({})", self.command, self.version);
        let _ = writeln!(out, "config sha256: {}", self.config_hash);
        for table in &self.tables {
            out.push('\n');
            table.render(&mut out);
        }
        for (name, points) in &self.series {
            let _ = writeln!(out, "\n## series {name}");
            for (t, v) in points {
                let _ = writeln!(out, "{t}  {v:.12}");
            }
        }
        if !self.lines.is_empty() {
            out.push('\n');
            for line in &self.lines {
                let _ = writeln!(out, "{line}");
            }
        }
        out
    }

    /// Writes `<stem>.txt` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let text = dir.join(format!("{stem}.txt"));
        std::fs::write(&text, self.render_text())?;
        let json = dir.join(format!("{stem}.json"));
        let mut body = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        body.push('\n');
        std::fs::write(&json, body)?;
        Ok(vec![text, json])
    }
}
