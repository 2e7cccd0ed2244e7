//! Assembles CSV tables and JSON documents and writes them out.

use std::io::Write;

use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::CliError;

/// One titled table of a report.
pub struct Table {
    pub title: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub json: serde_json::Value,
}

impl Table {
    pub fn new<H, T>(title: &'static str, header: &[H], rows: Vec<Vec<String>>, json: &T) -> Self
    where
        H: AsRef<str>,
        T: Serialize + ?Sized,
    {
        Self {
            title,
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows,
            json: serde_json::to_value(json).expect("records serialise"),
        }
    }
}

#[derive(Default)]
pub struct Report {
    pub notes: Vec<String>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn render(&self, cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
        match cfg.format {
            Format::Csv => self.render_csv(cfg),
            Format::Json => {
                let mut doc = serde_json::Map::new();
                doc.insert("config".into(), serde_json::to_value(cfg).expect("config"));
                doc.insert(
                    "notes".into(),
                    serde_json::to_value(&self.notes).expect("notes"),
                );
                for t in &self.tables {
                    doc.insert(t.title.into(), t.json.clone());
                }
                let mut out = serde_json::to_vec_pretty(&doc).expect("json");
                out.push(b'\n');
                Ok(out)
            }
        }
    }

    fn render_csv(&self, cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        writeln!(out, "{}", cfg.header_line())?;
        for note in &self.notes {
            writeln!(out, "# note: {note}")?;
        }
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                writeln!(out)?;
                writeln!(out, "# {}", t.title)?;
            }
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&t.header).map_err(csv_err)?;
            for row in &t.rows {
                w.write_record(row).map_err(csv_err)?;
            }
            w.flush()?;
        }
        Ok(out)
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

pub fn emit(cfg: &RunConfig, report: &Report) -> Result<(), CliError> {
    let bytes = report.render(cfg)?;
    match &cfg.output {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}
