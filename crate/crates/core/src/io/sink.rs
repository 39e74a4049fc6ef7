//! Per-step time-series records and the CSV sink.
//!
//! Header: `t,phase,i,i_ref,i_z,v_up,v_low,v_c_1..v_c_{2n},u_1..u_{2n},v_dc_link,i_dc_link,policy`.
//! One row per phase per recorded step; numbers use 17 significant digits so
//! a re-read reproduces every value bit-exactly.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::controller::SortPolicy;
use crate::error::{Error, Result};

/// Identifies a phase leg: converter number (1 or 2) and phase letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhaseLabel {
    pub mmc: u8,
    pub phase: u8,
}

impl PhaseLabel {
    pub fn new(mmc: u8, phase: u8) -> Self {
        PhaseLabel { mmc, phase }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.mmc, (b'a' + self.phase) as char)
    }
}

impl FromStr for PhaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        match bytes {
            [m @ b'1'..=b'9', p @ b'a'..=b'c'] => Ok(PhaseLabel::new(m - b'0', p - b'a')),
            _ => Err(Error::Contract(format!("bad phase label `{s}`"))),
        }
    }
}

/// Snapshot of one phase leg after a control step.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: f64,
    pub phase: PhaseLabel,
    pub i: f64,
    pub i_ref: f64,
    /// Circulating current: common-mode arm current minus the leg's DC share.
    pub i_z: f64,
    pub v_up: f64,
    pub v_low: f64,
    /// Capacitor voltages, upper arm then lower arm.
    pub v_c: Vec<f64>,
    pub u: Vec<bool>,
    /// DC voltage at the terminals of converter 1.
    pub v_dc_link: f64,
    /// DC current flowing toward converter 1.
    pub i_dc_link: f64,
    pub policy: SortPolicy,
}

pub trait TimeSeriesSink {
    fn write_row(&mut self, row: &Row) -> Result<()>;

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
#[derive(Debug, Default)]
pub struct NullSink;

impl TimeSeriesSink for NullSink {
    fn write_row(&mut self, _row: &Row) -> Result<()> {
        Ok(())
    }
}

/// Keeps rows in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub rows: Vec<Row>,
}

impl TimeSeriesSink for MemorySink {
    fn write_row(&mut self, row: &Row) -> Result<()> {
        self.rows.push(row.clone());
        Ok(())
    }
}

pub fn header(n_sm: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["t", "phase", "i", "i_ref", "i_z", "v_up", "v_low"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((1..=2 * n_sm).map(|k| format!("v_c_{k}")));
    cols.extend((1..=2 * n_sm).map(|k| format!("u_{k}")));
    cols.extend(["v_dc_link", "i_dc_link", "policy"].iter().map(|s| s.to_string()));
    cols
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    path: PathBuf,
    n_sm: usize,
    last: Option<(f64, PhaseLabel)>,
}

impl CsvSink<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, n_sm: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        CsvSink::new(BufWriter::new(file), path, n_sm)
    }
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W, path: impl Into<PathBuf>, n_sm: usize) -> Result<Self> {
        let mut sink = CsvSink {
            writer: csv::Writer::from_writer(inner),
            path: path.into(),
            n_sm,
            last: None,
        };
        let cols = header(n_sm);
        sink.writer
            .write_record(&cols)
            .map_err(|e| Error::Csv { path: sink.path.clone(), source: e })?;
        Ok(sink)
    }

    pub fn into_inner(self) -> Result<W> {
        let path = self.path;
        self.writer
            .into_inner()
            .map_err(|e| Error::io(path, e.into_error()))
    }
}

impl<W: Write> TimeSeriesSink for CsvSink<W> {
    fn write_row(&mut self, row: &Row) -> Result<()> {
        if row.v_c.len() != 2 * self.n_sm || row.u.len() != 2 * self.n_sm {
            return Err(Error::Contract(format!(
                "row has {} voltages / {} statuses, schema expects {}",
                row.v_c.len(),
                row.u.len(),
                2 * self.n_sm
            )));
        }
        let key = (row.t, row.phase);
        if let Some(last) = self.last {
            if key.0 < last.0 || (key.0 == last.0 && key.1 <= last.1) {
                return Err(Error::Contract(format!(
                    "row ({}, {}) does not follow ({}, {})",
                    key.0, key.1, last.0, last.1
                )));
            }
        }
        self.last = Some(key);

        let mut record = Vec::with_capacity(10 + 4 * self.n_sm);
        record.push(fmt_num(row.t));
        record.push(row.phase.to_string());
        for x in [row.i, row.i_ref, row.i_z, row.v_up, row.v_low] {
            record.push(fmt_num(x));
        }
        record.extend(row.v_c.iter().map(|&v| fmt_num(v)));
        record.extend(row.u.iter().map(|&u| if u { "1" } else { "0" }.to_string()));
        record.push(fmt_num(row.v_dc_link));
        record.push(fmt_num(row.i_dc_link));
        record.push(row.policy.to_string());
        self.writer
            .write_record(&record)
            .map_err(|e| Error::Csv { path: self.path.clone(), source: e })
    }

    fn finish(&mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Reads a time-series CSV back into rows, checking the header.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(usize, Vec<Row>)> {
    let path = path.as_ref();
    let csv_err = |e| Error::Csv { path: path.to_path_buf(), source: e };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let cols = reader.headers().map_err(csv_err)?.clone();
    let n_cols = cols.len();
    if n_cols < 10 || (n_cols - 10) % 4 != 0 {
        return Err(Error::Contract(format!("{}: unexpected column count {n_cols}", path.display())));
    }
    let n_sm = (n_cols - 10) / 4;
    let expected = header(n_sm);
    if cols.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Contract(format!("{}: header does not match schema", path.display())));
    }

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let bad = |what: &str| {
            Error::Contract(format!("{}: data row {}: bad {what}", path.display(), line + 1))
        };
        let num = |k: usize| -> Result<f64> {
            record[k].parse::<f64>().map_err(|_| bad(&expected[k]))
        };
        let m = 2 * n_sm;
        let v_c = (0..m).map(|k| num(7 + k)).collect::<Result<Vec<_>>>()?;
        let u = (0..m)
            .map(|k| match &record[7 + m + k] {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(bad(&expected[7 + m + k])),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row {
            t: num(0)?,
            phase: record[1].parse()?,
            i: num(2)?,
            i_ref: num(3)?,
            i_z: num(4)?,
            v_up: num(5)?,
            v_low: num(6)?,
            v_c,
            u,
            v_dc_link: num(7 + 2 * m)?,
            i_dc_link: num(8 + 2 * m)?,
            policy: record[9 + 2 * m].parse()?,
        });
    }
    Ok((n_sm, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, phase: PhaseLabel) -> Row {
        Row {
            t,
            phase,
            i: 1.0 / 3.0,
            i_ref: -2.5e-7,
            i_z: std::f64::consts::PI,
            v_up: 30e3,
            v_low: 29999.999999999996,
            v_c: vec![1e4, 1e4 + 1e-9],
            u: vec![true, false],
            v_dc_link: 6e4,
            i_dc_link: 219.7,
            policy: SortPolicy::F1V2,
        }
    }

    #[test]
    fn header_matches_schema() {
        let h = header(6).join(",");
        assert!(h.starts_with("t,phase,i,i_ref,i_z,v_up,v_low,v_c_1,"));
        assert!(h.contains("v_c_12,u_1,"));
        assert!(h.ends_with("u_12,v_dc_link,i_dc_link,policy"));
    }

    #[test]
    fn labels_round_trip() {
        let l = PhaseLabel::new(2, 1);
        assert_eq!(l.to_string(), "2b");
        assert_eq!("2b".parse::<PhaseLabel>().unwrap(), l);
        assert!("1d".parse::<PhaseLabel>().is_err());
    }

    #[test]
    fn rejects_out_of_order_rows() {
        let mut sink = CsvSink::new(Vec::new(), "mem", 1).unwrap();
        sink.write_row(&row(1.0, PhaseLabel::new(1, 0))).unwrap();
        sink.write_row(&row(1.0, PhaseLabel::new(1, 1))).unwrap();
        assert!(sink.write_row(&row(1.0, PhaseLabel::new(1, 1))).is_err());
        assert!(sink.write_row(&row(0.5, PhaseLabel::new(1, 2))).is_err());
    }

    #[test]
    fn rejects_wrong_width() {
        let mut sink = CsvSink::new(Vec::new(), "mem", 2).unwrap();
        assert!(matches!(
            sink.write_row(&row(1.0, PhaseLabel::new(1, 0))),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn write_then_read_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        let rows = vec![row(25e-6, PhaseLabel::new(1, 0)), row(25e-6, PhaseLabel::new(1, 1))];
        {
            let mut sink = CsvSink::create(&path, 1).unwrap();
            for r in &rows {
                sink.write_row(r).unwrap();
            }
            sink.finish().unwrap();
        }
        let (n, back) = read_csv(&path).unwrap();
        assert_eq!(n, 1);
        assert_eq!(back, rows);
    }
}
