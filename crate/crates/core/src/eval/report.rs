//! Metrics tables as CSV and as plot-ready series.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EvalError;

pub const CSV_HEADER: &str = "arch,bucket,fraction,acc_t,acc_ta,acc_tr,time_t_ms,time_ta_ms,time_tr_ms";

/// A trace-length bucket, or all events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    Length(usize),
    All,
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bucket::Length(n) => write!(f, "{n}"),
            Bucket::All => f.write_str("ALL"),
        }
    }
}

impl FromStr for Bucket {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "ALL" {
            return Ok(Bucket::All);
        }
        s.parse().map(Bucket::Length).map_err(|_| format!("bad bucket {s:?}"))
    }
}

impl Serialize for Bucket {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bucket {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Accuracies in percent, times in mean milliseconds per event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub arch: String,
    pub bucket: Bucket,
    /// Percentage of the training split the tagger saw.
    pub fraction: u32,
    pub acc_t: f64,
    pub acc_ta: f64,
    pub acc_tr: f64,
    pub time_t_ms: f64,
    pub time_ta_ms: f64,
    pub time_tr_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    PlotData,
}

/// One curve: `(x, y)` points under a name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x: String,
    pub y: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub v: u32,
    pub series: Vec<Series>,
}

impl MetricsTable {
    pub fn find(&self, arch: &str, bucket: Bucket, fraction: u32) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.arch == arch && r.bucket == bucket && r.fraction == fraction)
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        if self.rows.is_empty() {
            return Err(EvalError::Report("empty metrics table".into()));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| EvalError::Report(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Report(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| EvalError::Report(e.to_string()))?;
        if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
            return Err(EvalError::Report(format!("expected header {CSV_HEADER}")));
        }
        let rows = r
            .deserialize()
            .enumerate()
            .map(|(n, row)| row.map_err(|e| EvalError::Report(format!("row {}: {e}", n + 1))))
            .collect::<Result<Vec<MetricsRow>, _>>()?;
        Ok(MetricsTable { rows })
    }

    /// Accuracy and time against trace length (per arch and fraction, one
    /// curve per scenario) and accuracy against training fraction (`ALL`
    /// rows, per arch).
    pub fn plot_data(&self) -> Result<PlotData, EvalError> {
        if self.rows.is_empty() {
            return Err(EvalError::Report("empty metrics table".into()));
        }
        let mut groups: Vec<(String, u32)> = self.rows.iter().map(|r| (r.arch.clone(), r.fraction)).collect();
        groups.sort();
        groups.dedup();
        let mut series = Vec::new();
        type Pick = fn(&MetricsRow) -> f64;
        let acc: [(&str, Pick); 3] = [("T", |r| r.acc_t), ("T+A", |r| r.acc_ta), ("T+R", |r| r.acc_tr)];
        let time: [(&str, Pick); 3] = [("T", |r| r.time_t_ms), ("T+A", |r| r.time_ta_ms), ("T+R", |r| r.time_tr_ms)];
        for (arch, fraction) in &groups {
            let mut rows: Vec<&MetricsRow> = self
                .rows
                .iter()
                .filter(|r| &r.arch == arch && r.fraction == *fraction && r.bucket != Bucket::All)
                .collect();
            rows.sort_by_key(|r| r.bucket);
            let len = |r: &MetricsRow| match r.bucket {
                Bucket::Length(n) => n as f64,
                Bucket::All => unreachable!(),
            };
            for (scenario, f) in acc {
                series.push(Series {
                    name: format!("accuracy-vs-length/{arch}/{fraction}/{scenario}"),
                    x: "trace length".into(),
                    y: "accuracy (%)".into(),
                    points: rows.iter().map(|r| (len(r), f(r))).collect(),
                });
            }
            for (scenario, f) in time {
                series.push(Series {
                    name: format!("time-vs-length/{arch}/{fraction}/{scenario}"),
                    x: "trace length".into(),
                    y: "time per event (ms)".into(),
                    points: rows.iter().map(|r| (len(r), f(r))).collect(),
                });
            }
        }
        let mut archs: Vec<&str> = groups.iter().map(|(a, _)| a.as_str()).collect();
        archs.dedup();
        for arch in archs {
            let mut rows: Vec<&MetricsRow> = self.rows.iter().filter(|r| r.arch == arch && r.bucket == Bucket::All).collect();
            rows.sort_by_key(|r| r.fraction);
            for (scenario, f) in acc {
                series.push(Series {
                    name: format!("accuracy-vs-fraction/{arch}/{scenario}"),
                    x: "training fraction (%)".into(),
                    y: "accuracy (%)".into(),
                    points: rows.iter().map(|r| (r.fraction as f64, f(r))).collect(),
                });
            }
        }
        Ok(PlotData { v: 1, series })
    }

    pub fn render(&self, format: ReportFormat) -> Result<String, EvalError> {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::PlotData => {
                Ok(serde_json::to_string_pretty(&self.plot_data()?).expect("plot data serializes") + "\n")
            }
        }
    }

    pub fn write(&self, path: &Path, format: ReportFormat) -> Result<(), EvalError> {
        std::fs::write(path, self.render(format)?)?;
        Ok(())
    }
}
