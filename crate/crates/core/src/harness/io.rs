use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{MetricsReport, SeedSummary};
use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Samples read from a `t,y1,...,yd` file.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub samples: Vec<(f64, Vector)>,
    /// Median time spacing (1 for a single row).
    pub h: f64,
}

impl Ingested {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.0).collect()
    }

    pub fn values(&self) -> Vec<Vector> {
        self.samples.iter().map(|s| s.1.clone()).collect()
    }
}

/// Reads a comma-separated stream with header `t,y1,...,yd`.
///
/// Times must be nondecreasing. Line numbers in errors count the header as line 1.
pub fn ingest_csv(path: &Path, expected_dim: usize) -> Result<Ingested> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, expected_dim)
}

pub fn ingest_reader(reader: impl std::io::Read, expected_dim: usize) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    if headers.len() != expected_dim + 1 {
        return Err(Error::DimMismatch {
            expected: expected_dim,
            got: headers.len().saturating_sub(1),
        });
    }
    let mut samples: Vec<(f64, Vector)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        if record.len() != expected_dim + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", expected_dim + 1, record.len()),
            });
        }
        let mut nums = Vec::with_capacity(record.len());
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite value {field:?}"),
                });
            }
            nums.push(v);
        }
        let t = nums[0];
        if samples.last().is_some_and(|(prev, _)| t < *prev) {
            return Err(Error::NonMonotoneTime(line));
        }
        samples.push((t, Vector::from_column_slice(&nums[1..])));
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut gaps: Vec<f64> = samples.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let h = if gaps.is_empty() {
        1.0
    } else {
        gaps.sort_by(f64::total_cmp);
        let m = gaps.len();
        if m % 2 == 1 {
            gaps[m / 2]
        } else {
            0.5 * (gaps[m / 2 - 1] + gaps[m / 2])
        }
    };
    Ok(Ingested { samples, h })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

/// Rounds to six significant digits and prints the shortest exact form.
pub fn fmt_sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.5e}").parse().unwrap_or(v);
    rounded.to_string()
}

pub const REPORT_HEADER: [&str; 9] = ["regime", "algorithm", "P", "C", "mean_err", "p25", "p75", "ae_bound", "wall_ms"];

/// One row per report, in the given order.
pub fn report_csv(reports: &[MetricsReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(REPORT_HEADER).map_err(wrap)?;
    for r in reports {
        w.write_record([
            r.regime.clone(),
            r.algorithm.clone(),
            r.p.to_string(),
            r.c.to_string(),
            fmt_sig6(r.mean_err),
            fmt_sig6(r.p25),
            fmt_sig6(r.p75),
            r.ae_bound.map(fmt_sig6).unwrap_or_default(),
            fmt_sig6(r.wall_ms),
        ])
        .map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(contents).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// Writes reports as a CSV table or a JSON array.
pub fn emit_report(reports: &[MetricsReport], format: ReportFormat, path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let body = match format {
        ReportFormat::Csv => report_csv(reports)?.into_bytes(),
        ReportFormat::Json => serde_json::to_vec_pretty(reports).map_err(|e| Error::Config(e.to_string()))?,
    };
    write_file(path, &body)
}

/// `k,err` rows of one run, for plotting.
pub fn emit_per_step(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut s = String::from("k,err\n");
    for (k, e) in report.per_step_err.iter().enumerate() {
        s.push_str(&format!("{k},{}\n", fmt_sig6(*e)));
    }
    write_file(path, s.as_bytes())
}

pub fn emit_seed_summary(rows: &[SeedSummary], path: &Path) -> Result<()> {
    let mut s = String::from("regime,algorithm,P,C,seeds,mean_err,min_mean_err,max_mean_err\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.regime,
            r.algorithm,
            r.p,
            r.c,
            r.seeds,
            fmt_sig6(r.mean_err),
            fmt_sig6(r.min_mean_err),
            fmt_sig6(r.max_mean_err)
        ));
    }
    write_file(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ingest_example() {
        let got = ingest_reader("t,y1\n0,1.0\n5,2.0".as_bytes(), 1).unwrap();
        assert_eq!(got.h, 5.0);
        assert_eq!(got.samples.len(), 2);
        assert_eq!(got.samples[0], (0.0, Vector::from_vec(vec![1.0])));
        assert_eq!(got.samples[1], (5.0, Vector::from_vec(vec![2.0])));
    }

    #[test]
    fn ingest_errors() {
        assert!(matches!(
            ingest_reader("t,y1\n0,1.0\n5,abc\n".as_bytes(), 1),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            ingest_reader("t,y1\n5,1.0\n0,2.0\n".as_bytes(), 1),
            Err(Error::NonMonotoneTime(3))
        ));
        assert!(matches!(
            ingest_reader("t,y1,y2\n0,1,2\n".as_bytes(), 1),
            Err(Error::DimMismatch { expected: 1, got: 2 })
        ));
        assert!(matches!(ingest_reader("t,y1\n0,1\n1\n".as_bytes(), 1), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(ingest_reader("t,y1\n".as_bytes(), 1), Err(Error::EmptyInput)));
    }

    #[test]
    fn median_spacing() {
        let got = ingest_reader("t,y\n0,0\n1,0\n3,0\n4,0\n10,0\n".as_bytes(), 1).unwrap();
        assert_eq!(got.h, 1.5);
    }

    #[test]
    fn six_digits() {
        assert_eq!(fmt_sig6(47.2), "47.2");
        assert_eq!(fmt_sig6(1.0 / 3.0), "0.333333");
        assert_eq!(fmt_sig6(1234567.0), "1234570");
        assert_eq!(fmt_sig6(0.0), "0");
    }
}
