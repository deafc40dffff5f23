//! CSV and JSON emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{BenchError, Result};
use crate::runner::{ResultRow, RunOutput};

/// Column order of the CSV output.
pub const CSV_HEADER: &str = "method,mode,n_t,n_r,S,L,prior_deg,grid_mult,snr_db,trial,seed,nmse_db,iters,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Header line plus one line per row, LF-terminated.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| BenchError::Config(e.to_string()))
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    rows: &'a [ResultRow],
    summary: &'a [crate::runner::SummaryRow],
    failures: &'a [crate::runner::Failure],
    realizations: &'a [crate::runner::Realization],
    config: &'a crate::config::ExperimentConfig,
}

pub fn write_json<W: Write>(run: &RunOutput, out: W) -> Result<()> {
    let doc = JsonDoc {
        rows: &run.rows,
        summary: &run.summary,
        failures: &run.failures,
        realizations: &run.realizations,
        config: &run.config,
    };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn emit_results(run: &RunOutput, path: &Path, format: Format) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => write_csv(&run.rows, file),
        Format::Json => write_json(run, file),
    }
}
