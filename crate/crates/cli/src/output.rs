use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

/// Writes artifacts into one directory, honouring `--format`.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    format: Format,
    written: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path, format: Format) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    fn wants_csv(&self) -> bool {
        matches!(self.format, Format::Csv | Format::Both)
    }

    fn wants_json(&self) -> bool {
        matches!(self.format, Format::Json | Format::Both)
    }

    /// Header row plus numeric rows; floats use shortest round-trip formatting.
    pub fn csv<I>(&mut self, name: &str, header: &[String], rows: I) -> io::Result<()>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        if !self.wants_csv() {
            return Ok(());
        }
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.serialize(row)?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        if !self.wants_json() {
            return Ok(());
        }
        self.always_json(name, value)
    }

    /// Written regardless of `--format` (resolved config, error payloads).
    pub fn always_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.dir.join(name), text)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
