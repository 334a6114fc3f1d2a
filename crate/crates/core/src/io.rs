//! Path CSV files with a JSON sidecar, and report emission.
//!
//! Floats are written with 17 significant digits so files round-trip
//! exactly and identical runs produce identical bytes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{prefix_sums, StoppedPath, TimeGrid};
use crate::verify::ConvergenceReport;

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    stop_index: usize,
    bump: Vec<f64>,
}

pub fn sidecar_path(csv: &FsPath) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `t,x_1..x_d` rows for every node plus the stop/bump sidecar.
pub fn write_path_csv(path: &StoppedPath, file: &FsPath) -> Result<()> {
    let mut w = csv::Writer::from_path(file)?;
    let d = path.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    let values = path.node_values();
    for i in 0..=path.grid().steps() {
        let mut row = vec![fmt_f64(path.grid().node(i))];
        row.extend((0..d).map(|j| fmt_f64(values[i * d + j])));
        w.write_record(&row)?;
    }
    w.flush()?;
    let side = Sidecar { stop_index: path.stop_index(), bump: path.bump().to_vec() };
    fs::write(sidecar_path(file), to_json(&side)?)?;
    Ok(())
}

/// Reads a path CSV. The grid is inferred from the time column, which must
/// start at 0 and be uniform. Without a sidecar the path is stopped at the
/// horizon.
pub fn read_path_csv(file: &FsPath) -> Result<StoppedPath> {
    let mut r = csv::Reader::from_path(file)?;
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(Error::Parse(format!("{}: header must be t,x_1,...,x_d", file.display())));
    }
    let d = headers.len() - 1;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{} row {}: {e}", file.display(), line + 1)))
        };
        times.push(parse(&rec[0])?);
        for j in 1..=d {
            samples.push(parse(&rec[j])?);
        }
    }
    if times.len() < 2 {
        return Err(Error::Parse(format!("{}: need at least two nodes", file.display())));
    }
    let steps = times.len() - 1;
    let grid = TimeGrid::new(times[steps], steps)?;
    for (i, &t) in times.iter().enumerate() {
        if (t - grid.node(i)).abs() > 1e-9 * grid.horizon().max(1.0) {
            return Err(Error::Parse(format!("{}: time column is not a uniform grid from 0", file.display())));
        }
    }
    let mut path = StoppedPath::new(grid, d, samples)?;
    let side = sidecar_path(file);
    if side.exists() {
        let meta: Sidecar = serde_json::from_str(&fs::read_to_string(&side)?)?;
        if meta.stop_index > steps {
            return Err(Error::Parse(format!("stop index {} exceeds {steps}", meta.stop_index)));
        }
        if !meta.bump.is_empty() && meta.bump.len() != d {
            return Err(Error::Dimension { expected: d, got: meta.bump.len() });
        }
        let values = path.stopped_at(meta.stop_index)?.node_values();
        let prefix = prefix_sums(&values, d);
        path = StoppedPath::from_parts(grid, d, values, prefix, meta.stop_index);
        if meta.bump.iter().any(|&b| b != 0.0) {
            path = path.bumped(&meta.bump)?;
        }
    }
    Ok(path)
}

/// `level,value,reference,error,stderr`; header only when empty.
pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("level,value,reference,error,stderr\n");
    for l in &report.levels {
        let row = [l.level, l.value, l.reference, l.error, l.stderr].map(fmt_f64).join(",");
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Generic table writer with a fixed header.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

struct Precise;

impl serde_json::ser::Formatter for Precise {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }
}

/// JSON with every float at 17 significant digits; fields keep declaration
/// order.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise);
    value.serialize(&mut ser)?;
    let mut s = String::from_utf8(buf).expect("serde_json writes UTF-8");
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::Level;

    #[test]
    fn json_floats_are_exact_and_nonfinite_is_null() {
        let s = to_json(&[0.1, f64::NAN, -2.0]).unwrap();
        assert_eq!(s, "[1.0000000000000001e-1,null,-2.0000000000000000e0]\n");
        let back: Vec<Option<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back[0], Some(0.1));
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = ConvergenceReport { levels: vec![], fitted_order: None, intercept: 0.0, intercept_stderr: 0.0 };
        assert_eq!(convergence_csv(&r), "level,value,reference,error,stderr\n");
        let r = ConvergenceReport {
            levels: vec![Level { level: 8.0, value: 0.5, reference: 0.0, error: 0.5, stderr: 0.0 }],
            ..r
        };
        assert_eq!(convergence_csv(&r).lines().count(), 2);
    }
}
