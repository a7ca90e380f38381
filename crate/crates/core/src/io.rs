//! CSV and JSON files used by the command-line tool.
//!
//! Signals are stored as `t,value` with `t` the right endpoint of each cell.
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back reproduces the in-memory values bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, Signal};
use crate::harness::{RateRow, RateTable};
use crate::volterra::TableKernel;

const SPACING_TOL: f64 = 1e-9;

fn parse_rows(path: &Path, header: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let found = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    if found.len() != 2 || found[0] != *header[0] || found[1] != *header[1] {
        return Err(Error::Parse(format!(
            "{}: expected header `{},{}`",
            path.display(),
            header[0],
            header[1]
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| Error::Parse(format!("{}: row {} is short", path.display(), line + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{}: row {}: {e}", path.display(), line + 1)))
        };
        rows.push((field(0)?, field(1)?));
    }
    Ok(rows)
}

/// Reads a signal and reconstructs its grid from the time column.
pub fn read_signal(path: &Path) -> Result<Signal> {
    let rows = parse_rows(path, ["t", "value"])?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    let horizon = rows[n - 1].0;
    let grid = Grid::new(horizon, n)?;
    for (j, &(t, _)) in rows.iter().enumerate() {
        if j > 0 && t <= rows[j - 1].0 {
            return Err(Error::Parse(format!(
                "{}: time column is not increasing at row {}",
                path.display(),
                j + 1
            )));
        }
        if (t - grid.right_endpoint(j)).abs() > SPACING_TOL * horizon {
            return Err(Error::Parse(format!(
                "{}: row {} is off the uniform grid (t = {t})",
                path.display(),
                j + 1
            )));
        }
    }
    Signal::new(grid, rows.into_iter().map(|(_, v)| v).collect())
}

pub fn write_signal(path: &Path, signal: &Signal) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t,value")?;
    let grid = signal.grid();
    for (j, v) in signal.values().iter().enumerate() {
        writeln!(out, "{},{}", grid.right_endpoint(j), v)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a piecewise-constant kernel with header `t,k`.
pub fn read_table_kernel(path: &Path) -> Result<TableKernel> {
    let rows = parse_rows(path, ["t", "k"])?;
    let (breakpoints, values) = rows.into_iter().unzip();
    TableKernel::new(breakpoints, values)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

const RATE_HEADER: &str = "delta,alpha,error_l2,error_l1,work,seeds";

pub fn write_rate_table(path: &Path, table: &RateTable) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{RATE_HEADER}")?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.delta, r.alpha, r.error_l2, r.error_l1, r.work, r.seeds
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rate_table(path: &Path) -> Result<RateTable> {
    let parse_err = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(parse_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(parse_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.join(",") != RATE_HEADER {
        return Err(Error::Parse(format!(
            "{}: expected header `{RATE_HEADER}`",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(parse_err)?;
        let bad = |what: &str| {
            Error::Parse(format!("{}: row {}: bad {what}", path.display(), line + 1))
        };
        let num = |i: usize, what: &str| -> Result<f64> {
            record.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(what))
        };
        let seeds: u32 = record
            .get(5)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("seeds"))?;
        rows.push(RateRow {
            delta: num(0, "delta")?,
            alpha: num(1, "alpha")?,
            error_l2: num(2, "error_l2")?,
            error_l1: num(3, "error_l1")?,
            work: num(4, "work")?,
            seeds,
            failures: 0,
        });
    }
    Ok(RateTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let g = Grid::new(0.7, 13).unwrap();
        let s = Signal::from_fn(g, |j| (j as f64 * 1.3).sin() / 3.0).unwrap();
        write_signal(&path, &s).unwrap();
        let back = read_signal(&path).unwrap();
        assert_eq!(back.values(), s.values());
        assert!(back.grid().compatible(&g));
    }

    #[test]
    fn rejects_irregular_time_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "t,value\n0.25,1\n0.6,2\n0.75,3\n1,4\n").unwrap();
        assert!(matches!(read_signal(&path), Err(Error::Parse(_))));
        std::fs::write(&path, "t,value\n0.5,1\n0.25,2\n").unwrap();
        assert!(read_signal(&path).is_err());
        std::fs::write(&path, "time,value\n1,1\n").unwrap();
        assert!(read_signal(&path).is_err());
    }

    #[test]
    fn table_kernel_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        std::fs::write(&path, "t,k\n0,2\n0.5,1\n").unwrap();
        let k = read_table_kernel(&path).unwrap();
        assert_eq!(k.eval(0.7), 1.0);
        std::fs::write(&path, "t,k\n0.5,2\n0.5,1\n").unwrap();
        assert!(read_table_kernel(&path).is_err());
    }

    #[test]
    fn rate_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rates.csv");
        let table = RateTable {
            rows: vec![
                RateRow {
                    delta: 0.1,
                    alpha: 0.21544346900318834,
                    error_l2: 0.3,
                    error_l1: 0.25,
                    work: 1234.5,
                    seeds: 4,
                    failures: 0,
                },
                RateRow {
                    delta: 0.01,
                    alpha: 0.046,
                    error_l2: f64::NAN,
                    error_l1: f64::NAN,
                    work: f64::NAN,
                    seeds: 0,
                    failures: 0,
                },
            ],
        };
        write_rate_table(&path, &table).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("delta,alpha,error_l2,error_l1,work,seeds\n"));
        let back = read_rate_table(&path).unwrap();
        assert_eq!(back.rows[0], table.rows[0]);
        assert!(back.rows[1].error_l2.is_nan());
    }
}
