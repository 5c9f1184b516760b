use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::status::Failure;

/// Provenance record written next to every CSV file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub output: String,
    pub started_at_unix_ms: u128,
    pub finished_at_unix_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

/// Creates the directory that will hold `path`, if any.
pub fn ensure_parent(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::invalid(format!("{}: {e}", dir.display())))
        }
        _ => Ok(()),
    }
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    csv.with_file_name(name)
}

/// Tracks one command run so each CSV it writes gets a manifest.
pub struct Run {
    command: &'static str,
    inputs: Vec<String>,
    seed: Option<u64>,
    started: u128,
}

impl Run {
    pub fn start(command: &'static str) -> Self {
        Self { command, inputs: Vec::new(), seed: None, started: now_ms() }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Writes `rows` under `header` to `path`, then its manifest.
    pub fn write_csv(&self, path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), Failure> {
        ensure_parent(path)?;
        let mut w = csv::Writer::from_path(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        let fail = |e: csv::Error| Failure::invalid(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(fail)?;
        for row in rows {
            w.write_record(row).map_err(fail)?;
        }
        w.flush().map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;

        let manifest = RunManifest {
            command: self.command.to_string(),
            inputs: self.inputs.clone(),
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            output: path.display().to_string(),
            started_at_unix_ms: self.started,
            finished_at_unix_ms: now_ms(),
        };
        let mpath = manifest_path(path);
        let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&mpath, body + "\n").map_err(|e| Failure::invalid(format!("{}: {e}", mpath.display())))
    }
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Left-aligned text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(cell);
            if i + 1 < cells.len() {
                s.push_str(&" ".repeat(w - cell.chars().count()));
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_next_to_the_csv() {
        assert_eq!(manifest_path(Path::new("out/plan.csv")), Path::new("out/plan.csv.manifest.json"));
    }

    #[test]
    fn table_pads_columns() {
        let t = table(&["a", "bb"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "a    bb\nxyz  1\n");
    }
}
