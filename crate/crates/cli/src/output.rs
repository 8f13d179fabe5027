//! Bundle directories: CSV tables with a config-echo header, plain text
//! reports and one JSON manifest, all written atomically.

use crate::config::RunConfig;
use crate::CliError;
use serde::Serialize;
use serde_json::{Map, Value};
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// Column-oriented table; cells are formatted with Rust's shortest
/// round-trip representation.
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| num(*v)).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    rows: Option<usize>,
    columns: Option<Vec<String>>,
}

pub struct Bundle<'a> {
    name: String,
    dir: PathBuf,
    cfg: &'a RunConfig,
    files: Vec<FileEntry>,
    results: Map<String, Value>,
}

impl<'a> Bundle<'a> {
    pub fn create(cfg: &'a RunConfig, name: &str) -> Result<Self, CliError> {
        let dir = cfg.out.join(name);
        std::fs::create_dir_all(&dir)?;
        Ok(Self { name: name.into(), dir, cfg, files: Vec::new(), results: Map::new() })
    }

    fn header(&self, extra: &[String]) -> String {
        let mut s = format!("# mpemba {} {}\n", env!("CARGO_PKG_VERSION"), self.name);
        for line in self.cfg.echo_lines().iter().chain(extra) {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }

    /// Writes `file` with the config header, optional extra header lines, then the table.
    pub fn csv(&mut self, file: &str, extra: &[String], table: &Table) -> Result<(), CliError> {
        let mut s = self.header(extra);
        s.push_str(&table.columns.join(","));
        s.push('\n');
        for row in &table.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        atomic_write(&self.dir.join(file), s.as_bytes())?;
        self.files.push(FileEntry { name: file.into(), rows: Some(table.len()), columns: Some(table.columns.clone()) });
        Ok(())
    }

    /// Writes a text file; `with_header` prefixes the commented config echo.
    pub fn text(&mut self, file: &str, body: &str, with_header: bool) -> Result<(), CliError> {
        let s = if with_header { format!("{}{body}", self.header(&[])) } else { body.to_string() };
        atomic_write(&self.dir.join(file), s.as_bytes())?;
        self.files.push(FileEntry { name: file.into(), rows: None, columns: None });
        Ok(())
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.into(), value.into());
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let manifest = serde_json::json!({
            "bundle": self.name,
            "generator": format!("mpemba-cli {}", env!("CARGO_PKG_VERSION")),
            "provenance": "theory curves from the Lindblad model; no experimental data",
            "units": "rates in units of omega1, times in units of 1/omega1, angles in radians",
            "config": self.cfg,
            "omega1_krad_per_s": self.cfg.omega1_angular_khz(),
            "files": self.files,
            "results": self.results,
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        atomic_write(&self.dir.join("manifest.json"), text.as_bytes())?;
        Ok(self.dir)
    }
}
