//! Series CSV export/import, error logs and canonical JSON.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, SecondsFormat};
use kpiprobe_core::model::CanonicalValue;
use kpiprobe_core::series::DEFAULT_REQUEST_PERIOD_S;
use kpiprobe_core::{CollectError, CollectorDescriptor, Endpoint, ErrorKind, Field, KpiSeries, KpiSnapshot, Method, Timestamp};

use crate::config::RunRecord;

pub const SERIES_DIR: &str = "series";
pub const RUN_FILE: &str = "run.toml";
const ERRORS_SUFFIX: &str = ".errors.csv";
const ERROR_COLUMNS: [&str; 5] = ["timestamp", "mono_s", "kind", "detail", "raw_hex"];

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io { path: path.to_owned(), source }
}

fn format_err(path: &Path, message: impl Into<String>) -> ExportError {
    ExportError::Format { path: path.to_owned(), message: message.into() }
}

/// Series CSV header: iso8601 time, scenario-clock seconds, then the
/// canonical record names.
pub fn series_columns() -> Vec<&'static str> {
    let mut cols = vec!["timestamp", "mono_s", "method", "device", "ts_unix_ms"];
    cols.extend(Field::ALL.iter().map(|f| f.json_name()));
    cols
}

pub fn iso8601(unix_ms: i64) -> String {
    DateTime::from_timestamp_millis(unix_ms)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Millis, true))
        .unwrap_or_default()
}

pub fn format_mono(d: Duration) -> String {
    format!("{}.{:09}", d.as_secs(), d.subsec_nanos())
}

pub fn parse_mono(text: &str) -> Option<Duration> {
    let (secs, frac) = text.split_once('.').unwrap_or((text, ""));
    if frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let nanos: u32 = if frac.is_empty() { 0 } else { format!("{frac:0<9}").parse().ok()? };
    Some(Duration::new(secs.parse().ok()?, nanos))
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV of UTF-8 cells")
}

pub fn series_csv(series: &KpiSeries) -> String {
    let columns = series_columns();
    let mut w = writer();
    w.write_record(&columns).expect("in-memory write");
    for s in series.samples() {
        let record = s.canonical_record();
        let row: Vec<String> = columns
            .iter()
            .map(|&col| match col {
                "timestamp" => iso8601(s.timestamp.unix_ms),
                "mono_s" => format_mono(s.timestamp.mono),
                _ => record.iter().find(|(k, _)| *k == col).map(|(_, v)| v.to_cell()).unwrap_or_default(),
            })
            .collect();
        w.write_record(&row).expect("in-memory write");
    }
    finish(w)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02X}")).collect()
}

fn unhex(text: &str) -> Option<Vec<u8>> {
    if !text.len().is_multiple_of(2) {
        return None;
    }
    (0..text.len()).step_by(2).map(|i| u8::from_str_radix(text.get(i..i + 2)?, 16).ok()).collect()
}

pub fn errors_csv(series: &KpiSeries) -> String {
    let mut w = writer();
    w.write_record(ERROR_COLUMNS).expect("in-memory write");
    for e in &series.meta.errors {
        let (ts, mono) = e.at.map_or((String::new(), String::new()), |t| (iso8601(t.unix_ms), format_mono(t.mono)));
        let raw = e.raw.as_deref().map(hex).unwrap_or_default();
        w.write_record([ts, mono, e.kind.label().to_owned(), e.detail.clone(), raw]).expect("in-memory write");
    }
    finish(w)
}

/// Parse a series CSV. `name` is the file stem, used when the file has no
/// rows to take method and device from.
pub fn parse_series_csv(text: &str, name: &str, period_s: f64, path: &Path) -> Result<KpiSeries, ExportError> {
    let (device, method) = split_name(name).ok_or_else(|| format_err(path, format!("file name {name:?} is not <device>_<METHOD>")))?;
    let descriptor = CollectorDescriptor::new(method, device, period_s, Endpoint::Pipe(path.display().to_string()))
        .map_err(|e| format_err(path, e.to_string()))?;
    let mut series = KpiSeries::new(descriptor);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| format_err(path, e.to_string()))?.clone();
    for required in ["mono_s", "method", "device"] {
        if !headers.iter().any(|h| h == required) {
            return Err(format_err(path, format!("missing column {required}")));
        }
    }
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| format_err(path, format!("line {line}: {e}")))?;
        let cells = headers.iter().zip(row.iter());
        let mut snap = KpiSnapshot::from_canonical_text(cells.clone())
            .map_err(|e| format_err(path, format!("line {line}: {e}")))?;
        let mono_text = cells.clone().find(|(h, _)| *h == "mono_s").map(|(_, v)| v).unwrap_or("");
        let mono = parse_mono(mono_text).ok_or_else(|| format_err(path, format!("line {line}: bad mono_s {mono_text:?}")))?;
        snap.timestamp = Timestamp::new(mono, snap.timestamp.unix_ms);
        series.append(snap).map_err(|e| format_err(path, format!("line {line}: {e}")))?;
    }
    Ok(series)
}

pub fn parse_errors_csv(text: &str, path: &Path) -> Result<Vec<CollectError>, ExportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| format_err(path, format!("line {line}: {e}")))?;
        let cell = |i: usize| row.get(i).unwrap_or("");
        let kind = [
            ErrorKind::TransportDown,
            ErrorKind::Timeout,
            ErrorKind::AuthFailed,
            ErrorKind::ParseFailed,
            ErrorKind::DialectUnsupported,
            ErrorKind::ProtocolViolation,
        ]
        .into_iter()
        .find(|k| k.label() == cell(2))
        .ok_or_else(|| format_err(path, format!("line {line}: unknown error kind {:?}", cell(2))))?;
        let mut e = CollectError::new(kind, cell(3));
        if let Some(mono) = parse_mono(cell(1)) {
            let unix_ms = DateTime::parse_from_rfc3339(cell(0)).map(|t| t.timestamp_millis()).unwrap_or_default();
            e = e.at(Timestamp::new(mono, unix_ms));
        }
        if !cell(4).is_empty() {
            e = e.with_raw(unhex(cell(4)).ok_or_else(|| format_err(path, format!("line {line}: raw_hex is not hex")))?);
        }
        out.push(e);
    }
    Ok(out)
}

/// `cpe-a_AT_DEBUG` → (`cpe-a`, AtDebug).
pub fn split_name(name: &str) -> Option<(&str, Method)> {
    Method::ALL.into_iter().find_map(|m| {
        let device = name.strip_suffix(m.label())?.strip_suffix('_')?;
        (!device.is_empty()).then_some((device, m))
    })
}

/// Canonical flat JSON object of one snapshot; absent fields omitted.
pub fn snapshot_json(snap: &KpiSnapshot) -> String {
    use serde_json::{Map, Number, Value};
    let number = |s: &str| Value::Number(Number::from_str(s).expect("canonical decimals are JSON numbers"));
    let mut obj = Map::new();
    for (name, v) in snap.canonical_record() {
        let value = match v {
            CanonicalValue::Text(s) => Value::String(s),
            CanonicalValue::Number(s) => number(&s),
            CanonicalValue::Integer(i) => Value::from(i),
            CanonicalValue::NumberList(items) => {
                Value::Array(items.iter().map(|i| i.as_deref().map_or(Value::Null, number)).collect())
            }
        };
        obj.insert(name.to_owned(), value);
    }
    Value::Object(obj).to_string()
}

fn write(path: &Path, text: &str) -> Result<(), ExportError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Write `series/<name>.csv`, `series/<name>.errors.csv` and `run.toml`.
pub fn write_run(out: &Path, series: &[KpiSeries], record: &RunRecord) -> Result<Vec<PathBuf>, ExportError> {
    let dir = out.join(SERIES_DIR);
    let mut written = Vec::new();
    for s in series {
        let name = s.descriptor.name();
        let path = dir.join(format!("{name}.csv"));
        write(&path, &series_csv(s))?;
        write(&dir.join(format!("{name}{ERRORS_SUFFIX}")), &errors_csv(s))?;
        written.push(path);
    }
    write(&out.join(RUN_FILE), &record.to_toml())?;
    Ok(written)
}

/// Load every series of a run directory, sorted by name, with its error
/// log and the run record when present.
pub fn read_run(out: &Path) -> Result<(Vec<KpiSeries>, Option<RunRecord>), ExportError> {
    let run_path = out.join(RUN_FILE);
    let record = match fs::read_to_string(&run_path) {
        Ok(text) => Some(RunRecord::from_toml(&text).map_err(|e| format_err(&run_path, e.to_string()))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(ExportError::Io { path: run_path, source: e }),
    };
    let period = record.as_ref().map_or(DEFAULT_REQUEST_PERIOD_S, |r| r.period);
    let dir = out.join(SERIES_DIR);
    let entries = fs::read_dir(&dir).map_err(io_err(&dir))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".csv") && !name.ends_with(ERRORS_SUFFIX)
        })
        .collect();
    paths.sort();
    let mut series = Vec::new();
    for path in paths {
        let name = path.file_stem().and_then(|n| n.to_str()).unwrap_or("").to_owned();
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut s = parse_series_csv(&text, &name, period, &path)?;
        let err_path = dir.join(format!("{name}{ERRORS_SUFFIX}"));
        if let Ok(text) = fs::read_to_string(&err_path) {
            s.meta.errors = parse_errors_csv(&text, &err_path)?;
        }
        series.push(s);
    }
    Ok((series, record))
}
