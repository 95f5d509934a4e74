//! Plain CSV tables with a `#`-prefixed metadata header.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, e.g. `fig2a_swap_nbar1`.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Extra `key = value` lines for the header, after the configuration.
    pub metadata: Vec<(String, String)>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidParameter(format!("table {} has no column '{name}'", self.name)))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// CSV text. `config` is the serialized configuration, echoed line by line.
    pub fn to_csv(&self, config: &str) -> String {
        let mut out = String::new();
        writeln!(out, "# iongate {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(out, "# table = {}", self.name).unwrap();
        for line in config.lines().filter(|l| !l.trim().is_empty()) {
            writeln!(out, "# {line}").unwrap();
        }
        for (k, v) in &self.metadata {
            writeln!(out, "# {k} = {v}").unwrap();
        }
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    pub fn write(&self, dir: &Path, config: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.to_csv(config))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new("demo", &["t", "p"]);
        t.push(vec![0.0, 1.0]);
        t.push(vec![1e-3, f64::INFINITY]);
        t.meta("seed", 3);
        let text = t.to_csv("experiment = \"modes\"\n\n[lab]\n");
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# iongate "));
        assert_eq!(lines[2], "# experiment = \"modes\"");
        assert_eq!(lines[3], "# [lab]");
        assert_eq!(lines[4], "# seed = 3");
        assert_eq!(lines[5], "t,p");
        assert_eq!(lines[6], "0e0,1e0");
        assert_eq!(lines[7], "1e-3,inf");
        assert_eq!(t.column("p").unwrap()[0], 1.0);
        assert!(t.column("q").is_err());
    }

    #[test]
    fn writes_into_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        let t = Table::new("x", &["a"]);
        let p = t.write(&dir.path().join("sub"), "").unwrap();
        assert!(std::fs::read_to_string(p).unwrap().ends_with("a\n"));
    }
}
