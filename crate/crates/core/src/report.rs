//! Benchmark report rows and their JSON / CSV encodings.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::NormOrder;
use crate::projection::ProjectionMode;

/// One (projection mode, norm) cell of a benchmark run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mode: ProjectionMode,
    pub p: NormOrder,
    pub epsilon: f64,
    pub queries: usize,
    pub mean_cost_s: f64,
    pub cost_l: u64,
    /// Mean over queries of `cost_l / cost_s`.
    pub mean_ratio: f64,
    /// Mean σ_0 … σ_t.
    pub mean_sigma: Vec<f64>,
    /// Absent when every observed σ was zero.
    pub fitted_const: Option<f64>,
    pub estimated_cost: Option<f64>,
    pub max_diversion: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::invalid(format!("unknown report format {s:?}"))),
        }
    }
}

impl ReportFormat {
    /// Guesses from a file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

const FIXED_COLUMNS: [&str; 10] = [
    "mode",
    "p",
    "epsilon",
    "queries",
    "mean_cost_s",
    "cost_l",
    "mean_ratio",
    "fitted_const",
    "estimated_cost",
    "max_diversion",
];

pub fn encode_report(rows: &[BenchRow], w: impl Write, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
            Ok(())
        }
        ReportFormat::Csv => encode_csv(rows, w),
    }
}

fn encode_csv(rows: &[BenchRow], w: impl Write) -> Result<()> {
    let levels = rows.first().map_or(0, |r| r.mean_sigma.len());
    if rows.iter().any(|r| r.mean_sigma.len() != levels) {
        return Err(Error::invalid("rows disagree on the number of levels"));
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..levels).map(|i| format!("sigma_{i}")));
    out.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let mut rec = vec![
            r.mode.to_string(),
            r.p.to_string(),
            r.epsilon.to_string(),
            r.queries.to_string(),
            r.mean_cost_s.to_string(),
            r.cost_l.to_string(),
            r.mean_ratio.to_string(),
            opt(r.fitted_const),
            opt(r.estimated_cost),
            r.max_diversion.to_string(),
        ];
        rec.extend(r.mean_sigma.iter().map(f64::to_string));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn decode_report(r: impl Read, format: ReportFormat) -> Result<Vec<BenchRow>> {
    match format {
        ReportFormat::Json => Ok(serde_json::from_reader(r)?),
        ReportFormat::Csv => decode_csv(r),
    }
}

fn decode_csv(r: impl Read) -> Result<Vec<BenchRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.len() < FIXED_COLUMNS.len()
        || header.iter().zip(FIXED_COLUMNS).any(|(a, b)| a != b)
    {
        return Err(Error::format("report csv", "header", "unexpected columns"));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |col: &str| Error::format("report csv", format!("line {line}"), format!("bad {col}"));
        let num = |i: usize| -> Result<f64> { record[i].parse().map_err(|_| bad(FIXED_COLUMNS[i])) };
        let opt = |i: usize| -> Result<Option<f64>> {
            if record[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        rows.push(BenchRow {
            mode: record[0].parse()?,
            p: record[1].parse()?,
            epsilon: num(2)?,
            queries: record[3].parse().map_err(|_| bad("queries"))?,
            mean_cost_s: num(4)?,
            cost_l: record[5].parse().map_err(|_| bad("cost_l"))?,
            mean_ratio: num(6)?,
            fitted_const: opt(7)?,
            estimated_cost: opt(8)?,
            max_diversion: num(9)?,
            mean_sigma: (FIXED_COLUMNS.len()..record.len())
                .map(|i| record[i].parse().map_err(|_| bad("sigma")))
                .collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

pub fn write_report(rows: &[BenchRow], path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    encode_report(rows, BufWriter::new(File::create(path)?), format)
}

pub fn read_report(path: impl AsRef<Path>, format: ReportFormat) -> Result<Vec<BenchRow>> {
    decode_report(BufReader::new(File::open(path)?), format)
}
