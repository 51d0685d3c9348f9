//! CSV tables and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::RunConfig;

/// One CSV cell. Floats use 17 significant digits in scientific notation so
/// every `f64` survives a text round trip.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn render(cell: &Cell) -> String {
    match cell {
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) => format_float(*v),
        Cell::Text(s) => s.clone(),
    }
}

pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = Self { path: path.to_path_buf(), out: BufWriter::new(file), columns: header.len() };
        writeln!(w.out, "{}", header.join(","))?;
        Ok(w)
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<()> {
        assert_eq!(cells.len(), self.columns, "row width differs from header in {}", self.path.display());
        let line: Vec<String> = cells.iter().map(render).collect();
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush().with_context(|| format!("writing {}", self.path.display()))?;
        Ok(self.path)
    }
}

pub const MANIFEST: &str = "manifest.txt";

/// Writes `manifest.txt` with the tool version, seed, effective thread
/// count and every resolved key.
pub fn write_manifest(dir: &Path, cfg: &RunConfig, threads: usize, files: &[PathBuf]) -> Result<()> {
    let path = dir.join(MANIFEST);
    let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "tool = kknled {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "subcommand = {}", cfg.subcommand)?;
    writeln!(out, "seed = {}", cfg.seed())?;
    writeln!(out, "threads_used = {threads}")?;
    writeln!(out, "# resolved configuration")?;
    for (k, v) in cfg.entries() {
        writeln!(out, "{k} = {v}")?;
    }
    writeln!(out, "# outputs")?;
    for f in files {
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        writeln!(out, "file = {name}")?;
    }
    out.flush()?;
    Ok(())
}
