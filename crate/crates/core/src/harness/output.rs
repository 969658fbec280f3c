use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::{BootstrapMargins, DiagnosticsRecord, Sample};
use crate::error::{Error, Result};

pub const SERIES_FILE: &str = "series.csv";
pub const SUP_FILE: &str = "sup_series.csv";
pub const BOOTSTRAP_FILE: &str = "bootstrap_series.csv";
pub const REPORT_FILE: &str = "report.json";

/// Row of the bootstrap side file: the tier maxima and the bounds they face.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BootstrapRow {
    pub t: f64,
    pub ghost_low_max: f64,
    pub l2_low_max: f64,
    pub l2_high_max: f64,
    pub energy_bound: f64,
    pub low_bound: f64,
    pub high_bound: f64,
    pub margin_energy: f64,
    pub margin_l2_low: f64,
    pub margin_l2_high: f64,
}

impl BootstrapRow {
    pub fn from_sample(t: f64, sample: &Sample) -> Self {
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        let m: &BootstrapMargins = &sample.margins;
        Self {
            t,
            ghost_low_max: max(&sample.bootstrap_input.ghost_sqrt),
            l2_low_max: max(&sample.bootstrap_input.l2_low),
            l2_high_max: max(&sample.bootstrap_input.l2_high),
            energy_bound: m.energy_bound,
            low_bound: m.low_bound,
            high_bound: m.high_bound,
            margin_energy: m.energy,
            margin_l2_low: m.l2_low,
            margin_l2_high: m.l2_high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SupRow {
    pub t: f64,
    pub comp: usize,
    pub sup_u: f64,
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

pub fn write_rows<R: serde::Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes the main series; an empty run still gets the header line.
pub fn write_series(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    if records.is_empty() {
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(f, "{}", DiagnosticsRecord::COLUMNS.join(",")).map_err(|e| Error::io(path, e))?;
        return Ok(());
    }
    write_rows(path, records)
}

pub fn read_series(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{}: {other:?}", path.display())),
    })?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Reads `(t, value)` pairs from a CSV with a header row containing `t` and
/// `column`. With `comp` set, only rows of that component are kept; otherwise
/// values sharing a time are summed over components.
pub fn read_column(path: &Path, column: &str, comp: Option<usize>) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{}: {other:?}", path.display())),
    })?;
    let headers = r.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let t_idx = find("t").ok_or_else(|| Error::InvalidArgument(format!("{} has no `t` column", path.display())))?;
    let v_idx =
        find(column).ok_or_else(|| Error::InvalidArgument(format!("{} has no `{column}` column", path.display())))?;
    let c_idx = find("comp");
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::InvalidArgument(format!("cannot parse `{s}`: {e}")))
    };
    let mut out: Vec<(f64, f64)> = Vec::new();
    for row in r.records() {
        let row = row?;
        if let (Some(want), Some(ci)) = (comp, c_idx) {
            let c: usize = row[ci]
                .trim()
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("bad comp `{}`: {e}", &row[ci])))?;
            if c != want {
                continue;
            }
        }
        let t = parse(&row[t_idx])?;
        let v = parse(&row[v_idx])?;
        match out.last_mut() {
            Some(last) if comp.is_none() && last.0 == t => last.1 += v,
            _ => out.push((t, v)),
        }
    }
    Ok(out)
}
