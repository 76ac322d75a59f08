//! NDJSON wire format for CSI series: one JSON object per line.
//!
//! A series file starts with a header describing the receiver, grid and
//! metadata, followed by one line per frame:
//!
//! ```text
//! {"series":{"rx":"asus1","center_freq_hz":2412000000.0,...,"meta":{...}}}
//! {"rx":"asus1","seq":0,"ts_us":0,"rssi_db":-41.0,"sc_idx":[-28,...],"csi_re":[...],"csi_im":[...]}
//! ```
//!
//! Numbers are written with round-trip precision, so
//! `read_series(write_series(s)) == s` bit-for-bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::frame::{CsiFrame, CsiSeries, FrameError};
use crate::grid::{GridError, SharedGrid, SubcarrierGrid};
use crate::Complex64;

/// Errors raised while encoding or decoding NDJSON series.
#[derive(Debug, Error)]
pub enum NdjsonError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: not valid JSON: {detail}")]
    Json { line: usize, detail: String },
    #[error("line {line}: field {field:?} {problem}")]
    Field {
        line: usize,
        field: &'static str,
        problem: String,
    },
    #[error("line {line}: sc_idx does not match the series grid")]
    GridMismatch { line: usize },
    #[error("missing series header line")]
    MissingHeader,
    #[error("series contains no frames")]
    EmptySeries,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Serialize)]
struct FrameLine<'a> {
    rx: &'a str,
    seq: u64,
    ts_us: u64,
    rssi_db: f64,
    sc_idx: &'a [i32],
    csi_re: Vec<f64>,
    csi_im: Vec<f64>,
}

#[derive(Serialize)]
struct SeriesHeader<'a> {
    series: SeriesHeaderBody<'a>,
}

#[derive(Serialize)]
struct SeriesHeaderBody<'a> {
    rx: &'a str,
    center_freq_hz: f64,
    bandwidth_hz: f64,
    sc_idx: &'a [i32],
    meta: &'a std::collections::BTreeMap<String, String>,
}

/// Encode one frame as a single NDJSON line (no trailing newline).
pub fn encode_frame(frame: &CsiFrame) -> Result<String, NdjsonError> {
    frame.validate()?;
    let line = FrameLine {
        rx: &frame.receiver_id,
        seq: frame.seq,
        ts_us: frame.ts_us,
        rssi_db: frame.rssi_db,
        sc_idx: frame.grid.indices(),
        csi_re: frame.csi.iter().map(|z| z.re).collect(),
        csi_im: frame.csi.iter().map(|z| z.im).collect(),
    };
    serde_json::to_string(&line).map_err(|e| NdjsonError::Json {
        line: 0,
        detail: e.to_string(),
    })
}

/// Decode one frame line against the grid it must conform to.
///
/// `line_no` is used only for error reporting.
pub fn decode_frame(
    line: &str,
    grid: &SharedGrid,
    line_no: usize,
) -> Result<CsiFrame, NdjsonError> {
    let value: Value = serde_json::from_str(line).map_err(|e| NdjsonError::Json {
        line: line_no,
        detail: e.to_string(),
    })?;
    let obj = value.as_object().ok_or(NdjsonError::Field {
        line: line_no,
        field: "frame",
        problem: "line is not a JSON object".into(),
    })?;

    let rx = str_field(obj, "rx", line_no)?;
    let seq = u64_field(obj, "seq", line_no)?;
    let ts_us = u64_field(obj, "ts_us", line_no)?;
    let rssi_db = f64_field(obj, "rssi_db", line_no)?;
    let sc_idx = i32_array_field(obj, "sc_idx", line_no)?;
    let csi_re = f64_array_field(obj, "csi_re", line_no)?;
    let csi_im = f64_array_field(obj, "csi_im", line_no)?;

    if sc_idx != grid.indices() {
        return Err(NdjsonError::GridMismatch { line: line_no });
    }
    if csi_re.len() != sc_idx.len() {
        return Err(NdjsonError::Field {
            line: line_no,
            field: "csi_re",
            problem: format!("has {} entries, expected {}", csi_re.len(), sc_idx.len()),
        });
    }
    if csi_im.len() != sc_idx.len() {
        return Err(NdjsonError::Field {
            line: line_no,
            field: "csi_im",
            problem: format!("has {} entries, expected {}", csi_im.len(), sc_idx.len()),
        });
    }
    let csi = csi_re
        .into_iter()
        .zip(csi_im)
        .map(|(re, im)| Complex64::new(re, im))
        .collect();
    Ok(CsiFrame::new(rx, seq, ts_us, rssi_db, grid.clone(), csi)?)
}

/// Write a full series (header plus one line per frame).
pub fn write_series<W: Write>(series: &CsiSeries, mut out: W) -> Result<(), NdjsonError> {
    series.validate()?;
    let first = series.frames.first().ok_or(NdjsonError::EmptySeries)?;
    let header = SeriesHeader {
        series: SeriesHeaderBody {
            rx: &first.receiver_id,
            center_freq_hz: first.grid.center_freq_hz(),
            bandwidth_hz: first.grid.bandwidth_hz(),
            sc_idx: first.grid.indices(),
            meta: &series.meta,
        },
    };
    let header_line = serde_json::to_string(&header).map_err(|e| NdjsonError::Json {
        line: 1,
        detail: e.to_string(),
    })?;
    writeln!(out, "{header_line}")?;
    for frame in &series.frames {
        writeln!(out, "{}", encode_frame(frame)?)?;
    }
    Ok(())
}

/// Read a series written by [`write_series`].
pub fn read_series<R: BufRead>(input: R) -> Result<CsiSeries, NdjsonError> {
    let mut lines = input.lines().enumerate();
    let (_, header_line) = lines.next().ok_or(NdjsonError::MissingHeader)?;
    let header_line = header_line?;
    let header: Value = serde_json::from_str(&header_line).map_err(|e| NdjsonError::Json {
        line: 1,
        detail: e.to_string(),
    })?;
    let body = header
        .get("series")
        .and_then(Value::as_object)
        .ok_or(NdjsonError::MissingHeader)?;
    let center = f64_field(body, "center_freq_hz", 1)?;
    let bandwidth = f64_field(body, "bandwidth_hz", 1)?;
    let sc_idx = i32_array_field(body, "sc_idx", 1)?;
    let grid = SubcarrierGrid::from_indices(center, bandwidth, sc_idx)?;
    let mut meta = std::collections::BTreeMap::new();
    if let Some(meta_val) = body.get("meta") {
        let map = meta_val.as_object().ok_or(NdjsonError::Field {
            line: 1,
            field: "meta",
            problem: "must be an object of strings".into(),
        })?;
        for (k, v) in map {
            let s = v.as_str().ok_or(NdjsonError::Field {
                line: 1,
                field: "meta",
                problem: format!("value for {k:?} must be a string"),
            })?;
            meta.insert(k.clone(), s.to_string());
        }
    }

    let mut frames = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        frames.push(decode_frame(&line, &grid, idx + 1)?);
    }
    if frames.is_empty() {
        return Err(NdjsonError::EmptySeries);
    }
    let mut series = CsiSeries::new(frames)?;
    series.meta = meta;
    Ok(series)
}

/// Write a series to a file (buffered).
pub fn write_series_file(series: &CsiSeries, path: &Path) -> Result<(), NdjsonError> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    write_series(series, &mut writer)?;
    writer.flush()?;
    Ok(())
}

/// Read a series from a file (buffered).
pub fn read_series_file(path: &Path) -> Result<CsiSeries, NdjsonError> {
    let file = File::open(path)?;
    read_series(BufReader::new(file))
}

fn field<'a>(
    obj: &'a serde_json::Map<String, Value>,
    name: &'static str,
    line: usize,
) -> Result<&'a Value, NdjsonError> {
    obj.get(name).ok_or(NdjsonError::Field {
        line,
        field: name,
        problem: "is missing".into(),
    })
}

fn str_field(
    obj: &serde_json::Map<String, Value>,
    name: &'static str,
    line: usize,
) -> Result<String, NdjsonError> {
    field(obj, name, line)?
        .as_str()
        .map(str::to_string)
        .ok_or(NdjsonError::Field {
            line,
            field: name,
            problem: "must be a string".into(),
        })
}

fn u64_field(
    obj: &serde_json::Map<String, Value>,
    name: &'static str,
    line: usize,
) -> Result<u64, NdjsonError> {
    field(obj, name, line)?.as_u64().ok_or(NdjsonError::Field {
        line,
        field: name,
        problem: "must be a non-negative integer".into(),
    })
}

fn f64_field(
    obj: &serde_json::Map<String, Value>,
    name: &'static str,
    line: usize,
) -> Result<f64, NdjsonError> {
    let v = field(obj, name, line)?.as_f64().ok_or(NdjsonError::Field {
        line,
        field: name,
        problem: "must be a finite number".into(),
    })?;
    if !v.is_finite() {
        return Err(NdjsonError::Field {
            line,
            field: name,
            problem: "must be a finite number".into(),
        });
    }
    Ok(v)
}

fn i32_array_field(
    obj: &serde_json::Map<String, Value>,
    name: &'static str,
    line: usize,
) -> Result<Vec<i32>, NdjsonError> {
    let arr = field(obj, name, line)?.as_array().ok_or(NdjsonError::Field {
        line,
        field: name,
        problem: "must be an array of integers".into(),
    })?;
    arr.iter()
        .map(|v| {
            v.as_i64()
                .and_then(|x| i32::try_from(x).ok())
                .ok_or(NdjsonError::Field {
                    line,
                    field: name,
                    problem: "must contain 32-bit integers".into(),
                })
        })
        .collect()
}

fn f64_array_field(
    obj: &serde_json::Map<String, Value>,
    name: &'static str,
    line: usize,
) -> Result<Vec<f64>, NdjsonError> {
    let arr = field(obj, name, line)?.as_array().ok_or(NdjsonError::Field {
        line,
        field: name,
        problem: "must be an array of numbers".into(),
    })?;
    arr.iter()
        .map(|v| {
            let x = v.as_f64().ok_or(NdjsonError::Field {
                line,
                field: name,
                problem: "must contain finite numbers".into(),
            })?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(NdjsonError::Field {
                    line,
                    field: name,
                    problem: "must contain finite numbers".into(),
                })
            }
        })
        .collect()
}
