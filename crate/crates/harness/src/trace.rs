//! CSV outputs. Every file starts with a `#schema=1` comment line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ggt_core::spectra::{DensityGrid, SpectrumSnapshot};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_LINE: &str = "#schema=1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub seed: u64,
    pub loss: f64,
    pub grad_norm: f64,
    /// Zero unless timing was enabled.
    pub step_time_ns: u64,
    pub backtracks: u32,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    }
    let mut f = BufWriter::new(File::create(path).map_err(HarnessError::io(path))?);
    writeln!(f, "{SCHEMA_LINE}").map_err(HarnessError::io(path))?;
    Ok(f)
}

/// Writes `#schema=1`, a header and the serialized rows.
pub fn write_csv<S: Serialize>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = S>,
) -> Result<()> {
    let f = create(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
    w.write_record(header).map_err(HarnessError::csv(path))?;
    for r in rows {
        w.serialize(r).map_err(HarnessError::csv(path))?;
    }
    w.flush().map_err(HarnessError::io(path))
}

pub const TRACE_HEADER: [&str; 6] = [
    "step",
    "seed",
    "loss",
    "grad_norm",
    "step_time_ns",
    "backtracks",
];

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    write_csv(path, &TRACE_HEADER, rows)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
    if text.lines().next() != Some(SCHEMA_LINE) {
        return Err(HarnessError::Trace {
            path: path.into(),
            reason: format!("first line must be `{SCHEMA_LINE}`"),
        });
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(HarnessError::csv(path))?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(HarnessError::Trace {
            path: path.into(),
            reason: format!("unexpected columns {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<TraceRow>, _>>()
        .map_err(HarnessError::csv(path))?;
    check_trace(&rows).map_err(|reason| HarnessError::Trace {
        path: path.into(),
        reason,
    })?;
    Ok(rows)
}

/// Steps must increase strictly within each seed.
pub fn check_trace(rows: &[TraceRow]) -> std::result::Result<(), String> {
    let mut last: std::collections::HashMap<u64, usize> = Default::default();
    for r in rows {
        if let Some(&prev) = last.get(&r.seed) {
            if r.step <= prev {
                return Err(format!(
                    "seed {}: step {} follows step {prev}",
                    r.seed, r.step
                ));
            }
        }
        last.insert(r.seed, r.step);
    }
    Ok(())
}

pub fn write_spectra(path: &Path, snapshots: &[SpectrumSnapshot<f64>]) -> Result<()> {
    let rows = snapshots.iter().flat_map(|s| {
        s.eigenvalues
            .iter()
            .enumerate()
            .map(move |(i, &v)| (s.step, i, v))
    });
    write_csv(path, &["step", "eig_index", "eigenvalue"], rows)
}

/// Bin edges are written as powers of ten, i.e. in eigenvalue units.
pub fn write_density(path: &Path, grid: &DensityGrid) -> Result<()> {
    let edges = &grid.edges;
    let rows = grid.rows.iter().flat_map(|row| {
        row.counts
            .iter()
            .enumerate()
            .map(move |(b, &c)| (row.step, 10f64.powf(edges[b]), 10f64.powf(edges[b + 1]), c))
    });
    write_csv(path, &["step", "bin_low", "bin_high", "count"], rows)
}
