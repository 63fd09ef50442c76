//! Stream ingestion and count-based windowing.
//!
//! A stream is an ordered sequence of [`Reading`]s. It is cut into
//! consecutive [`DataWindow`]s of a fixed reading count; a trailing short
//! window is kept and flagged `terminal` so replay is lossless.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One sensor sample. `value == None` is a missing measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Reading<T: Scalar> {
    pub timestamp: i64,
    pub value: Option<T>,
}

impl<T: Scalar> Reading<T> {
    pub fn new(timestamp: i64, value: Option<T>) -> Self {
        Self { timestamp, value }
    }

    pub fn present(timestamp: i64, value: T) -> Self {
        Self::new(timestamp, Some(value))
    }

    pub fn missing(timestamp: i64) -> Self {
        Self::new(timestamp, None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DataWindow<T: Scalar> {
    pub window_id: u64,
    pub readings: Vec<Reading<T>>,
    /// Set on a trailing window shorter than the configured length.
    #[serde(default)]
    pub terminal: bool,
}

impl<T: Scalar> DataWindow<T> {
    pub fn new(window_id: u64, readings: Vec<Reading<T>>) -> Self {
        Self {
            window_id,
            readings,
            terminal: false,
        }
    }

    /// Builds a window from bare values with timestamps `0..len`.
    pub fn from_values(window_id: u64, values: &[Option<T>]) -> Self {
        let readings = values
            .iter()
            .enumerate()
            .map(|(i, v)| Reading::new(i as i64, *v))
            .collect();
        Self::new(window_id, readings)
    }

    /// Window size N (missing readings included).
    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    /// Present values in order, plus the number of missing readings.
    pub fn values(&self) -> (Vec<T>, usize) {
        window_values(self)
    }

    pub fn present_values(&self) -> Vec<T> {
        self.readings.iter().filter_map(|r| r.value).collect()
    }

    pub fn last_timestamp(&self) -> Option<i64> {
        self.readings.last().map(|r| r.timestamp)
    }
}

/// Checks that timestamps never decrease.
pub fn check_ordered<T: Scalar>(readings: &[Reading<T>]) -> Result<()> {
    for (i, pair) in readings.windows(2).enumerate() {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(Error::Ordering {
                index: i + 1,
                previous: pair[0].timestamp,
                timestamp: pair[1].timestamp,
            });
        }
    }
    Ok(())
}

/// Cuts an ordered stream into windows of `window_len` readings.
pub fn segment_stream<T: Scalar>(
    readings: &[Reading<T>],
    window_len: usize,
) -> Result<Vec<DataWindow<T>>> {
    if window_len == 0 {
        return Err(Error::ZeroWindowLength);
    }
    check_ordered(readings)?;
    Ok(readings
        .chunks(window_len)
        .enumerate()
        .map(|(id, chunk)| DataWindow {
            window_id: id as u64,
            readings: chunk.to_vec(),
            terminal: chunk.len() < window_len,
        })
        .collect())
}

/// Concatenates windows back into the reading stream.
pub fn flatten<T: Scalar>(windows: &[DataWindow<T>]) -> Vec<Reading<T>> {
    windows
        .iter()
        .flat_map(|w| w.readings.iter().copied())
        .collect()
}

pub fn window_values<T: Scalar>(window: &DataWindow<T>) -> (Vec<T>, usize) {
    let present = window.present_values();
    let missing = window.len() - present.len();
    (present, missing)
}

#[derive(Deserialize)]
struct JsonReading {
    t: i64,
    v: Option<f64>,
}

/// Reads `timestamp,value` CSV. An empty value field is a missing reading.
pub fn read_csv<T: Scalar, R: std::io::Read>(source: R) -> Result<Vec<Reading<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        reason: e.to_string(),
    })?;
    if headers.len() < 2 || &headers[0] != "timestamp" || &headers[1] != "value" {
        return Err(Error::Parse {
            line: 1,
            reason: "expected header `timestamp,value`".into(),
        });
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?;
        let timestamp = record
            .get(0)
            .unwrap_or("")
            .parse::<i64>()
            .map_err(|e| Error::Parse {
                line,
                reason: format!("timestamp: {e}"),
            })?;
        let value = match record.get(1).unwrap_or("") {
            "" => None,
            s => Some(T::lit(s.parse::<f64>().map_err(|e| Error::Parse {
                line,
                reason: format!("value: {e}"),
            })?)),
        };
        out.push(Reading::new(timestamp, value));
    }
    Ok(out)
}

/// Reads line-delimited `{"t": <int>, "v": <number|null>}` objects. Blank lines are skipped.
pub fn read_jsonl<T: Scalar, R: BufRead>(source: R) -> Result<Vec<Reading<T>>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let r: JsonReading = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        out.push(Reading::new(r.t, r.v.map(T::lit)));
    }
    Ok(out)
}

/// Input encoding for [`read_stream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Csv,
    Jsonl,
}

impl StreamFormat {
    /// Guesses from a file extension; anything not `.jsonl`/`.json`/`.ndjson` is CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => StreamFormat::Jsonl,
            _ => StreamFormat::Csv,
        }
    }
}

pub fn read_stream<T: Scalar, R: BufRead>(source: R, format: StreamFormat) -> Result<Vec<Reading<T>>> {
    match format {
        StreamFormat::Csv => read_csv(source),
        StreamFormat::Jsonl => read_jsonl(source),
    }
}

pub fn write_csv<T: Scalar, W: Write>(readings: &[Reading<T>], mut sink: W) -> std::io::Result<()> {
    writeln!(sink, "timestamp,value")?;
    for r in readings {
        match r.value {
            Some(v) => writeln!(sink, "{},{}", r.timestamp, v)?,
            None => writeln!(sink, "{},", r.timestamp)?,
        }
    }
    Ok(())
}
