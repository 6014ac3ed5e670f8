//! Per-iteration CSV traces.
//!
//! Header: `t,max_violation,running_average,oracle_iterations,elapsed_seconds,violations`.
//! `violations` holds `f_i(x^t, u_i^t)` for every constraint, joined by `;`.
//! `running_average` is `max_i (1/t) sum_{s<=t} f_i(x^s, u_i^s)`.
//! `elapsed_seconds` is empty unless timing was requested.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use robustkit::robust::RunReport;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const HEADER: [&str; 6] = [
    "t",
    "max_violation",
    "running_average",
    "oracle_iterations",
    "elapsed_seconds",
    "violations",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub max_violation: f64,
    pub running_average: f64,
    pub oracle_iterations: usize,
    pub elapsed_seconds: Option<f64>,
    pub violations: String,
}

impl TraceRow {
    pub fn violations(&self) -> Result<Vec<f64>, std::num::ParseFloatError> {
        if self.violations.is_empty() {
            return Ok(Vec::new());
        }
        self.violations.split(';').map(str::parse).collect()
    }
}

pub fn rows_from_report(report: &RunReport, timing: bool) -> Vec<TraceRow> {
    let m = report.violations.first().map_or(0, Vec::len);
    let mut sums = vec![0.0; m];
    report
        .violations
        .iter()
        .enumerate()
        .map(|(idx, values)| {
            let t = idx + 1;
            for (s, v) in sums.iter_mut().zip(values) {
                *s += v;
            }
            let running = sums.iter().map(|s| s / t as f64).fold(f64::NEG_INFINITY, f64::max);
            TraceRow {
                t,
                max_violation: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                running_average: running,
                oracle_iterations: report.oracle_iterations[idx],
                elapsed_seconds: timing.then(|| report.elapsed[idx].as_secs_f64()),
                violations: values.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            }
        })
        .collect()
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let csv_err = |e: csv::Error| CliError::malformed(path, e);
    writer.write_record(HEADER).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer
        .into_inner()
        .map_err(|e| CliError::malformed(path, e))?
        .flush()
        .map_err(|e| CliError::io(path, e))
}

pub fn read_trace(path: &Path) -> CliResult<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::malformed(path, format!("{other:?}")),
    })?;
    let header = reader.headers().map_err(|e| CliError::malformed(path, e))?.clone();
    if header.iter().ne(HEADER) {
        return Err(CliError::malformed(
            path,
            format!(
                "unexpected trace header '{}'",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<TraceRow>, _>>()
        .map_err(|e| CliError::malformed(path, e))?;
    if let Some(row) = rows.iter().find(|r| r.violations().is_err()) {
        return Err(CliError::malformed(
            path,
            format!("unreadable violations at iteration {}", row.t),
        ));
    }
    if rows.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(CliError::malformed(path, "iteration column is not strictly increasing"));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let rows = vec![
            TraceRow {
                t: 1,
                max_violation: 0.25,
                running_average: 0.25,
                oracle_iterations: 3,
                elapsed_seconds: None,
                violations: "0.25;-0.5".into(),
            },
            TraceRow {
                t: 2,
                max_violation: 0.0,
                running_average: 0.125,
                oracle_iterations: 0,
                elapsed_seconds: Some(0.5),
                violations: "0;-0.5".into(),
            },
        ];
        write_trace(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,max_violation,running_average,oracle_iterations,elapsed_seconds,violations\n"));
        assert!(text.contains("\n1,0.25,0.25,3,,0.25;-0.5\n"));
        let back = read_trace(&path).unwrap();
        assert_eq!(back, rows);
        assert_eq!(back[0].violations().unwrap(), vec![0.25, -0.5]);
    }

    #[test]
    fn rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("other.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_trace(&path), Err(CliError::Malformed { .. })));
    }

    #[test]
    fn rejects_non_increasing_iterations() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        std::fs::write(&path, format!("{}\n2,0,0,0,,0\n2,0,0,0,,0\n", HEADER.join(","))).unwrap();
        assert!(read_trace(&path).is_err());
    }
}
