//! Output directory handling: tables as CSV or JSON, plus the per-command
//! run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:e}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(v.to_string()),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

/// Column-named rows.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Self { headers: headers.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, Value> =
                    self.headers.iter().zip(r).map(|(h, c)| (h.to_string(), c.json())).collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// Collects the files a command writes and finally its manifest.
pub struct Run {
    command: String,
    dir: PathBuf,
    format: Format,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(command: &str, dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            command: command.to_string(),
            dir: dir.to_path_buf(),
            format,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn format(&self) -> Format {
        self.format
    }

    fn manifest_name(&self) -> String {
        format!("{}.manifest.json", self.command.replace(' ', "-"))
    }

    /// Records an input file for hashing in the manifest.
    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    fn write_file(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    /// Writes `<stem>.csv` or `<stem>.json` according to the format flag.
    pub fn table(&mut self, stem: &str, table: &Table) -> Result<PathBuf> {
        match self.format {
            Format::Csv => self.write_file(&format!("{stem}.csv"), table.to_csv().as_bytes()),
            Format::Json => {
                let doc = json!({ "manifest": self.manifest_name(), "data": table.to_json() });
                self.write_file(&format!("{stem}.json"), pretty(&doc)?.as_bytes())
            }
        }
    }

    /// Writes a JSON document regardless of the format flag.
    pub fn json<T: Serialize>(&mut self, stem: &str, value: &T) -> Result<PathBuf> {
        let doc = json!({ "manifest": self.manifest_name(), "data": value });
        self.write_file(&format!("{stem}.json"), pretty(&doc)?.as_bytes())
    }

    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        self.write_file(name, bytes)
    }

    /// Writes the manifest naming every output written so far.
    pub fn finish(self) -> Result<PathBuf> {
        let mut hashes = BTreeMap::new();
        for p in &self.inputs {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            hashes.insert(p.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        }
        let manifest = json!({
            "command": self.command,
            "arguments": std::env::args().skip(1).collect::<Vec<_>>(),
            "config_paths": self.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "input_sha256": hashes,
            "version": env!("CARGO_PKG_VERSION"),
            "timestamp": chrono::Utc::now().to_rfc3339(),
            "outputs": self.outputs,
        });
        let path = self.dir.join(self.manifest_name());
        fs::write(&path, pretty(&manifest)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn pretty(v: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}
