//! Report files. Everything except `metadata.json` is a pure function of the
//! resolved config, so reruns are byte-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::{Format, OutputConfig};
use crate::error::Result;
use crate::fiber_grid::{write_binary, FiberGrid};

pub struct Writer {
    dir: PathBuf,
    formats: Vec<Format>,
    files: Vec<PathBuf>,
}

impl Writer {
    pub fn new(cfg: &OutputConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.dir)?;
        Ok(Writer {
            dir: cfg.dir.clone(),
            formats: cfg.formats.clone(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn into_files(self) -> Vec<PathBuf> {
        self.files
    }

    fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(file))
    }

    /// Pretty JSON document, written when the json format is enabled.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.wants(Format::Json) {
            return Ok(());
        }
        let mut out = self.create(name)?;
        serde_json::to_writer_pretty(&mut out, value)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }

    /// One compact JSON object per line.
    pub fn json_lines<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        if !self.wants(Format::Json) {
            return Ok(());
        }
        let mut out = self.create(name)?;
        for row in rows {
            serde_json::to_writer(&mut out, row)?;
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Per-node columns as `<stem>.csv` and `<stem>.dat`.
    pub fn fields(
        &mut self,
        stem: &str,
        grid: &FiberGrid,
        columns: &[(&str, &[f64])],
    ) -> Result<()> {
        if self.wants(Format::Csv) {
            let mut out = self.create(&format!("{stem}.csv"))?;
            grid.write_csv(&mut out, columns)?;
            out.flush()?;
        }
        if self.wants(Format::Gnuplot) {
            let mut out = self.create(&format!("{stem}.dat"))?;
            grid.write_gnuplot(&mut out, columns)?;
            out.flush()?;
        }
        Ok(())
    }

    /// Row-major little-endian `f64` field as `<stem>.bin`.
    pub fn binary(&mut self, stem: &str, values: &[f64]) -> Result<()> {
        if !self.wants(Format::Binary) {
            return Ok(());
        }
        let mut out = self.create(&format!("{stem}.bin"))?;
        write_binary(&mut out, values)?;
        out.flush()?;
        Ok(())
    }

    /// A table with string cells as `<stem>.csv` and `<stem>.dat`.
    pub fn table(&mut self, stem: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if self.wants(Format::Csv) {
            let mut out = self.create(&format!("{stem}.csv"))?;
            writeln!(out, "{}", header.join(","))?;
            for row in rows {
                writeln!(out, "{}", row.join(","))?;
            }
            out.flush()?;
        }
        if self.wants(Format::Gnuplot) {
            let mut out = self.create(&format!("{stem}.dat"))?;
            writeln!(out, "# {}", header.join(" "))?;
            for row in rows {
                writeln!(out, "{}", row.join(" "))?;
            }
            out.flush()?;
        }
        Ok(())
    }

    /// Run metadata, the only file that changes between identical runs.
    pub fn metadata(&mut self, task: &str, seed: u64, exit_code: i32) -> Result<()> {
        #[derive(Serialize)]
        struct Metadata<'a> {
            tool: &'a str,
            version: &'a str,
            task: &'a str,
            seed: u64,
            exit_code: i32,
            unix_time: u64,
        }
        let unix_time = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = Metadata {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            task,
            seed,
            exit_code,
            unix_time,
        };
        let mut out = self.create("metadata.json")?;
        serde_json::to_writer_pretty(&mut out, &meta)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }
}

/// Shortest round-trip representation for table cells.
pub fn cell(v: f64) -> String {
    format!("{v:e}")
}
