//! Line-oriented reports with a stable key order.
//!
//! Text form is `key=value` per line; embedded tables become
//! `name.columns=...` followed by `name.row.NNN=...`. CSV form writes the
//! scalar entries as `key,value` rows, then each table under its own header.

use std::fmt::Write as _;

use crate::config::OutputFormat;

pub const TOOL: &str = "bqdc";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Report {
    entries: Vec<(String, String)>,
    tables: Vec<Table>,
}

impl Report {
    /// Starts a report with the tool metadata and the command name.
    pub fn new(command: &str) -> Self {
        let mut r = Report::default();
        r.put("tool", TOOL);
        r.put("version", VERSION);
        r.put("command", command);
        r
    }

    pub fn put(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn put_f64(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.put(key, format!("{value:.6}"))
    }

    pub fn table(&mut self, name: &str, columns: &[&str], rows: Vec<Vec<String>>) -> &mut Self {
        self.tables.push(Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
        });
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn render(&self, format: OutputFormat) -> String {
        let mut out = String::new();
        match format {
            OutputFormat::Text => {
                for (k, v) in &self.entries {
                    let _ = writeln!(out, "{k}={v}");
                }
                for t in &self.tables {
                    let _ = writeln!(out, "{}.columns={}", t.name, t.columns.join(","));
                    for (i, row) in t.rows.iter().enumerate() {
                        let _ = writeln!(out, "{}.row.{i:03}={}", t.name, row.join(","));
                    }
                }
            }
            OutputFormat::Csv => {
                out.push_str("key,value\n");
                for (k, v) in &self.entries {
                    let _ = writeln!(out, "{},{}", csv_field(k), csv_field(v));
                }
                for t in &self.tables {
                    let _ = writeln!(out, "\n# {}", t.name);
                    let header: Vec<String> = t.columns.iter().map(|c| csv_field(c)).collect();
                    let _ = writeln!(out, "{}", header.join(","));
                    for row in &t.rows {
                        let cells: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
                        let _ = writeln!(out, "{}", cells.join(","));
                    }
                }
            }
        }
        out
    }
}

/// Quotes a CSV field when it contains a separator, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Half-width of the 95% Wald interval for a binomial proportion.
pub fn wald_radius(p: f64, trials: usize) -> f64 {
    1.96 * (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_layout_is_stable() {
        let mut r = Report::new("demo");
        r.put("seed", 3).put_f64("rate", 0.25);
        r.table("pts", &["a", "b"], vec![vec!["1".into(), "2".into()]]);
        assert_eq!(
            r.render(OutputFormat::Text),
            format!("tool=bqdc\nversion={VERSION}\ncommand=demo\nseed=3\nrate=0.250000\npts.columns=a,b\npts.row.000=1,2\n")
        );
        assert_eq!(r.get("rate"), Some("0.250000"));
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("x\"y"), "\"x\"\"y\"");
        let mut r = Report::new("demo");
        r.put("list", "1,2");
        assert!(r.render(OutputFormat::Csv).contains("list,\"1,2\"\n"));
    }

    #[test]
    fn radius() {
        assert!((wald_radius(0.5, 10_000) - 0.0098).abs() < 1e-12);
        assert_eq!(wald_radius(1.0, 10), 0.0);
    }
}
