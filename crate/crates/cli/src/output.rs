use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) if *v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) => format!("{v:e}"),
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `# key: value` lines.
    pub notes: Vec<(String, String)>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: Vec<&'static str>) -> Self {
        Self { name: name.into(), header, rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }
}

pub struct Bundle {
    pub command: &'static str,
    pub tables: Vec<Table>,
    pub metadata: Value,
}

pub fn config_digest(config: &RunConfig) -> (String, String) {
    let text = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    (text, digest)
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_table(dir: &Path, t: &Table, header_lines: &[String]) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{}.csv", t.name));
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut out = BufWriter::new(file);
    for line in header_lines {
        writeln!(out, "# {line}").map_err(|e| io_err(&path, e))?;
    }
    for (k, v) in &t.notes {
        writeln!(out, "# {k}: {v}").map_err(|e| io_err(&path, e))?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(&t.header).map_err(csv_err)?;
    for row in &t.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Tables as CSV plus `<command>.json` holding the resolved config and all metadata.
/// Wall time goes only to the sidecar so the tables are reproducible byte for byte.
pub fn emit(dir: &Path, config: &RunConfig, bundle: &Bundle, wall_time: f64) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let (text, digest) = config_digest(config);
    let sidecar = format!("{}.json", bundle.command);
    let header = vec![
        format!("dressed {} {}", env!("CARGO_PKG_VERSION"), bundle.command),
        format!("config_sha256: {digest}"),
        format!("config: {text}"),
        format!("metadata: {sidecar}"),
        "units: frequencies, energies and rates in units of omega; times in units of 1/omega".to_string(),
    ];
    let mut files = Vec::new();
    for t in &bundle.tables {
        files.push(write_table(dir, t, &header)?);
    }
    let path = dir.join(&sidecar);
    let doc = json!({
        "command": bundle.command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "config_sha256": digest,
        "tables": bundle.tables.iter().map(|t| format!("{}.csv", t.name)).collect::<Vec<_>>(),
        "wall_time_s": wall_time,
        "metadata": bundle.metadata,
    });
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    writeln!(w).map_err(|e| io_err(&path, e))?;
    w.flush().map_err(|e| io_err(&path, e))?;
    files.push(path);
    Ok(files)
}
