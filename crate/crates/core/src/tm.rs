//! Test-manager remote-access framing and the L3 KPI report (command
//! `0x80A3`). Layout on the wire (see `docs/tm-wire.md`):
//!
//! ```text
//! +----------------+------------+----------------------+
//! | length: u32 BE | cmd: u16 BE| body (length-2 bytes)|
//! +----------------+------------+----------------------+
//! ```
//!
//! `length` counts the command word plus the body. A report body is ASCII
//! hex of UTF-8 `KEY=VALUE` lines separated by `\n`.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::CollectError;
use crate::model::{Band, Duplex, Field, KpiSnapshot, Method, Rat};
use crate::parse::{bad, parse_measure, parse_pci, parse_uint};
use crate::value::Grain;

pub const L3_REPORT: u16 = 0x80A3;
/// Default TM listener port.
pub const DEFAULT_PORT: u16 = 9925;
/// Default response timeout in seconds.
pub const DEFAULT_TIMEOUT_S: f64 = 3.0;
pub const HEADER_LEN: usize = 6;
/// Frames longer than this are treated as a protocol violation.
pub const MAX_FRAME_LEN: u32 = 1 << 20;
/// Grain of every dB/dBm value in the L3 report.
pub const L3_DB_GRAIN: Grain = Grain::HUNDREDTH;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmFrame {
    pub command: u16,
    pub body: Vec<u8>,
}

impl TmFrame {
    pub fn new(command: u16, body: impl Into<Vec<u8>>) -> Self {
        TmFrame { command, body: body.into() }
    }

    /// Value of the length field: command word plus body.
    pub fn length(&self) -> u32 {
        (self.body.len() + 2) as u32
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.body.len());
        out.extend_from_slice(&self.length().to_be_bytes());
        out.extend_from_slice(&self.command.to_be_bytes());
        out.extend_from_slice(&self.body);
        out
    }

    /// Decode exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<TmFrame, CollectError> {
        let mut dec = FrameDecoder::new();
        dec.feed(bytes);
        match dec.next_frame()? {
            Some(frame) if dec.buffered() == 0 => Ok(frame),
            Some(_) => Err(CollectError::protocol("trailing bytes after frame").with_raw(bytes)),
            None => Err(CollectError::protocol("incomplete frame").with_raw(bytes)),
        }
    }
}

/// Incremental frame reader: feed bytes as they arrive, pull whole frames.
#[derive(Debug, Clone, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Bytes still needed before the next frame can complete, if known.
    pub fn wanted(&self) -> usize {
        if self.buf.len() < 4 {
            return 4 - self.buf.len();
        }
        let len = u32::from_be_bytes([self.buf[0], self.buf[1], self.buf[2], self.buf[3]]) as usize;
        (4 + len).saturating_sub(self.buf.len())
    }

    pub fn next_frame(&mut self) -> Result<Option<TmFrame>, CollectError> {
        if self.buf.len() < 4 {
            return Ok(None);
        }
        let len = u32::from_be_bytes([self.buf[0], self.buf[1], self.buf[2], self.buf[3]]);
        if len < 2 {
            return Err(CollectError::protocol(format!("frame length {len} shorter than command word"))
                .with_raw(self.buf.clone()));
        }
        if len > MAX_FRAME_LEN {
            return Err(CollectError::protocol(format!("frame length {len} exceeds {MAX_FRAME_LEN}"))
                .with_raw(self.buf[..4].to_vec()));
        }
        let total = 4 + len as usize;
        if self.buf.len() < total {
            return Ok(None);
        }
        let command = u16::from_be_bytes([self.buf[4], self.buf[5]]);
        let body = self.buf[HEADER_LEN..total].to_vec();
        self.buf.drain(..total);
        Ok(Some(TmFrame { command, body }))
    }
}

/// The L3 report request: `00 00 00 02 80 A3`.
pub fn encode_l3_request() -> Vec<u8> {
    TmFrame::new(L3_REPORT, Vec::new()).encode()
}

/// Decoded L3 report: every parameter in arrival order, the recognized
/// subset promoted into a snapshot, and the rest kept as extras.
#[derive(Debug, Clone, PartialEq)]
pub struct L3Report {
    pub params: Vec<(String, String)>,
    pub snapshot: KpiSnapshot,
    pub extras: Vec<(String, String)>,
}

const RECOGNIZED: [(&str, Field); 9] = [
    ("RAT", Field::Rat),
    ("PCI", Field::Pci),
    ("BAND", Field::Band),
    ("SCS", Field::Scs),
    ("ARFCN", Field::Arfcn),
    ("RSRP", Field::Rsrp),
    ("RSRQ", Field::Rsrq),
    ("SINR", Field::Sinr),
    ("DUPLEX", Field::Duplex),
];

pub fn recognized_key(key: &str) -> Option<Field> {
    RECOGNIZED.iter().find(|(k, _)| *k == key).map(|(_, f)| *f)
}

/// Hex-decode a frame body into its `KEY=VALUE` parameters.
pub fn decode_l3_params(frame: &TmFrame) -> Result<Vec<(String, String)>, CollectError> {
    if frame.command != L3_REPORT {
        return Err(CollectError::protocol(format!(
            "expected command 0x{L3_REPORT:04X}, got 0x{:04X}",
            frame.command
        ))
        .with_raw(frame.encode()));
    }
    let bytes = hex::decode(&frame.body)
        .map_err(|e| CollectError::protocol(format!("body is not hex: {e}")).with_raw(frame.body.clone()))?;
    let text = core::str::from_utf8(&bytes)
        .map_err(|e| CollectError::parse(format!("report is not UTF-8: {e}")).with_raw(bytes.clone()))?;
    let mut params: Vec<(String, String)> = Vec::new();
    for (idx, line) in text.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CollectError::parse(format!("line {idx}: expected KEY=VALUE")).with_raw(bytes.clone()));
        };
        if key.is_empty() {
            return Err(CollectError::parse(format!("line {idx}: empty key")).with_raw(bytes.clone()));
        }
        if params.iter().any(|(k, _)| k == key) {
            return Err(CollectError::parse(format!("line {idx}: duplicate key {key}")).with_raw(bytes.clone()));
        }
        params.push((key.to_owned(), value.to_owned()));
    }
    Ok(params)
}

/// Decode an L3 report frame into a snapshot (dB/dBm grain 0.01) and extras.
pub fn decode_l3_response(frame: &TmFrame) -> Result<L3Report, CollectError> {
    let params = decode_l3_params(frame)?;
    let raw = hex::decode(&frame.body).unwrap_or_default();
    if params.is_empty() {
        return Err(CollectError::parse("empty report").with_raw(raw));
    }
    let mut snapshot = KpiSnapshot::new(Method::XcalL3, "");
    let mut extras = Vec::new();
    for (idx, (key, value)) in params.iter().enumerate() {
        match recognized_key(key) {
            Some(field) => apply(&mut snapshot, field, value)
                .map_err(|e| CollectError { detail: format!("line {idx}: {}", e.detail), ..e }.with_raw(raw.clone()))?,
            None => extras.push((key.clone(), value.clone())),
        }
    }
    snapshot.raw = raw;
    Ok(L3Report { params, snapshot, extras })
}

fn apply(snap: &mut KpiSnapshot, field: Field, text: &str) -> Result<(), CollectError> {
    match field {
        Field::Rat => snap.cell.rat = Some(Rat::from_label(text)),
        Field::Pci => snap.cell.pci = Some(parse_pci(text)?),
        Field::Band => snap.cell.band = Some(Band::parse(text).ok_or_else(|| bad(field, text))?),
        Field::Arfcn => snap.cell.arfcn = Some(parse_uint(text, field)?),
        Field::Duplex => snap.radio.duplex = Some(Duplex::parse(text).ok_or_else(|| bad(field, text))?),
        Field::Scs => snap.radio.scs = Some(parse_measure(text, field, Some(Grain::ONE))?),
        measured => snap.set_value(measured, Some(parse_measure(text, measured, Some(L3_DB_GRAIN))?)),
    }
    Ok(())
}

/// Report parameters for a snapshot, recognized keys first, then extras.
pub fn render_l3_params(snap: &KpiSnapshot, extras: &[(String, String)]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (key, field) in RECOGNIZED {
        let value = match field {
            Field::Rat => snap.cell.rat.as_ref().map(|r| r.raw.clone()),
            Field::Pci => snap.cell.pci.map(|v| v.to_string()),
            Field::Band => snap.cell.band.map(|b| b.to_string()),
            Field::Arfcn => snap.cell.arfcn.map(|v| v.to_string()),
            Field::Duplex => snap.radio.duplex.map(|d| d.label().to_owned()),
            measured => snap.value(measured).map(|v| v.to_decimal_string()),
        };
        if let Some(v) = value {
            out.push((key.to_owned(), v));
        }
    }
    out.extend(extras.iter().cloned());
    out
}

/// Response frame carrying `params`.
pub fn encode_l3_response(params: &[(String, String)]) -> TmFrame {
    let mut text = String::new();
    for (i, (k, v)) in params.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(k);
        text.push('=');
        text.push_str(v);
    }
    TmFrame::new(L3_REPORT, hex::encode_upper(text.as_bytes()).into_bytes())
}
