//! AT query dialects: command strings, reply framing, and the `KEY:VALUE`
//! response grammar (see `docs/at-grammar.md`).

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{CollectError, ErrorKind};
use crate::model::{Band, Duplex, Field, FreqRange, KpiSnapshot, Method, Rat};
use crate::parse::{bad, parse_digits, parse_measure, parse_pci, parse_rssi, parse_uint, render_rssi};
use crate::value::Grain;

/// Default per-command timeout in seconds.
pub const DEFAULT_COMMAND_TIMEOUT_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AtDialect {
    Debug,
    SgCellInfoEx,
}

impl AtDialect {
    /// Probe order used by dialect detection.
    pub const PROBE_ORDER: [AtDialect; 2] = [AtDialect::Debug, AtDialect::SgCellInfoEx];

    pub fn command(self) -> &'static str {
        match self {
            AtDialect::Debug => "AT^DEBUG?",
            AtDialect::SgCellInfoEx => "AT+SGCELLINFOEX?",
        }
    }

    pub fn method(self) -> Method {
        match self {
            AtDialect::Debug => Method::AtDebug,
            AtDialect::SgCellInfoEx => Method::AtSgCellInfoEx,
        }
    }

    pub fn from_command(command: &str) -> Option<AtDialect> {
        let c = command.trim();
        Self::PROBE_ORDER
            .into_iter()
            .find(|d| d.command().eq_ignore_ascii_case(c))
    }

    /// Response keys in emission order, with the field each one fills.
    pub fn keys(self) -> &'static [(&'static str, Field)] {
        match self {
            AtDialect::Debug => &[
                ("RAT", Field::Rat),
                ("MCC_MNC", Field::Mcc),
                ("NR_CELL_ID", Field::NrCellId),
                ("NR_TAC", Field::Tac),
                ("BAND", Field::Band),
                ("BANDWIDTH", Field::Bandwidth),
                ("DL_UL_CHANNEL", Field::Arfcn),
                ("RSSI", Field::Rssi),
                ("RSRP", Field::Rsrp),
                ("RSRQ", Field::Rsrq),
                ("SINR", Field::Sinr),
            ],
            AtDialect::SgCellInfoEx => &[
                ("RAT", Field::Rat),
                ("MCC_MNC", Field::Mcc),
                ("NR_CELL_ID", Field::NrCellId),
                ("NR_TAC", Field::Tac),
                ("PHYSICAL_CELL_ID", Field::Pci),
                ("BAND", Field::Band),
                ("BANDWIDTH", Field::Bandwidth),
                ("SUB_CARRIER_SPACING", Field::Scs),
                ("FREQUENCY_RANGE_TYPE", Field::FreqRangeType),
                ("DL_UL_CHANNEL", Field::Arfcn),
                ("RSRP", Field::Rsrp),
                ("RSRQ", Field::Rsrq),
                ("SINR", Field::Sinr),
                ("DUPLEX_MODE", Field::Duplex),
            ],
        }
    }

    /// Reporting grain of each measured field in this dialect.
    pub fn grain(self, field: Field) -> Option<Grain> {
        match (self, field) {
            (_, Field::Rsrp | Field::Rsrq) => Some(Grain::ONE),
            (AtDialect::Debug, Field::Sinr) => Some(Grain::TENTH),
            (AtDialect::SgCellInfoEx, Field::Sinr) => Some(Grain::HALF),
            (AtDialect::Debug, Field::Rssi | Field::Bandwidth) => Some(Grain::TENTH),
            (AtDialect::SgCellInfoEx, Field::Bandwidth | Field::Scs) => Some(Grain::ONE),
            _ => None,
        }
    }
}

impl fmt::Display for AtDialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.command())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtStatus {
    Ok,
    Error,
}

/// Classification of one received line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtLine {
    Terminator(AtStatus),
    Payload(String),
    Blank,
}

pub fn classify_line(line: &str) -> AtLine {
    let t = line.trim_end_matches(['\r', '\n']).trim();
    match t {
        "" => AtLine::Blank,
        "OK" => AtLine::Terminator(AtStatus::Ok),
        "ERROR" => AtLine::Terminator(AtStatus::Error),
        _ if t.starts_with("+CME ERROR") || t.starts_with("+CMS ERROR") => {
            AtLine::Terminator(AtStatus::Error)
        }
        _ => AtLine::Payload(t.to_owned()),
    }
}

/// Validate a command before it goes on the wire.
pub fn check_command(command: &str) -> Result<(), CollectError> {
    let c = command.trim();
    if c.is_empty() {
        return Err(CollectError::protocol("empty AT command"));
    }
    if c.contains(['\r', '\n']) {
        return Err(CollectError::protocol("AT command must be a single line"));
    }
    if !c.get(..2).is_some_and(|p| p.eq_ignore_ascii_case("AT")) {
        return Err(CollectError::protocol(format!("{c:?} is not an AT command")));
    }
    Ok(())
}

/// Turn a collected reply into a payload, mapping `ERROR` to
/// DIALECT_UNSUPPORTED.
pub fn finish_reply(command: &str, payload: Vec<String>, status: AtStatus) -> Result<Vec<String>, CollectError> {
    match status {
        AtStatus::Ok => Ok(payload),
        AtStatus::Error => Err(CollectError::new(
            ErrorKind::DialectUnsupported,
            format!("{command} answered ERROR"),
        )
        .with_raw(command.as_bytes())),
    }
}

/// Split a complete reply (optionally starting with the command echo) into
/// payload lines. Text after the terminator is ignored.
pub fn split_reply(command: &str, text: &str) -> Result<Vec<String>, CollectError> {
    let mut payload = Vec::new();
    for line in text.split('\n') {
        match classify_line(line) {
            AtLine::Blank => {}
            AtLine::Payload(p) if payload.is_empty() && p.eq_ignore_ascii_case(command.trim()) => {}
            AtLine::Payload(p) => payload.push(p),
            AtLine::Terminator(status) => return finish_reply(command, payload, status),
        }
    }
    Err(CollectError::protocol(format!("{} reply has no OK/ERROR terminator", command.trim())).with_raw(text.as_bytes()))
}

/// Parse a complete reply to `dialect`'s query.
pub fn parse_reply(dialect: AtDialect, text: &str) -> Result<KpiSnapshot, CollectError> {
    parse_dialect(dialect, &split_reply(dialect.command(), text)?)
}

fn split_pairs(lines: &[String]) -> Result<BTreeMap<String, String>, CollectError> {
    let raw = || lines.join("\r\n").into_bytes();
    let mut out = BTreeMap::new();
    for (idx, line) in lines.iter().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(CollectError::parse(format!("line {idx}: expected KEY:VALUE, got {line:?}")).with_raw(raw()));
        };
        let key = key.trim();
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_') {
            return Err(CollectError::parse(format!("line {idx}: malformed key {key:?}")).with_raw(raw()));
        }
        let value = value.trim();
        if value.is_empty() {
            return Err(CollectError::parse(format!("line {idx}: {key} has no value")).with_raw(raw()));
        }
        if out.insert(key.to_owned(), value.to_owned()).is_some() {
            return Err(CollectError::parse(format!("line {idx}: duplicate key {key}")).with_raw(raw()));
        }
    }
    Ok(out)
}

fn parse_dialect(dialect: AtDialect, lines: &[String]) -> Result<KpiSnapshot, CollectError> {
    let raw = lines.join("\r\n").into_bytes();
    let pairs = split_pairs(lines)?;
    if !pairs.contains_key("RAT") {
        return Err(CollectError::parse("missing mandatory RAT line").with_raw(raw));
    }
    let mut snap = KpiSnapshot::new(dialect.method(), "");
    for &(key, field) in dialect.keys() {
        let Some(text) = pairs.get(key) else { continue };
        apply(&mut snap, dialect, field, text).map_err(|e| e.or_raw(&raw))?;
    }
    snap.raw = raw;
    Ok(snap)
}

fn apply(snap: &mut KpiSnapshot, dialect: AtDialect, field: Field, text: &str) -> Result<(), CollectError> {
    match field {
        Field::Rat => snap.cell.rat = Some(Rat::from_label(text)),
        Field::Mcc => {
            let (mcc, mnc) = text.split_once(',').ok_or_else(|| bad(field, text))?;
            snap.cell.mcc = Some(parse_digits(mcc, Field::Mcc, 3..=3)?);
            snap.cell.mnc = Some(parse_digits(mnc, Field::Mnc, 2..=3)?);
        }
        Field::NrCellId => snap.cell.nr_cell_id = Some(parse_uint(text, field)?),
        Field::Tac => snap.cell.tac = Some(parse_uint(text, field)?),
        Field::Pci => snap.cell.pci = Some(parse_pci(text)?),
        Field::Band => snap.cell.band = Some(Band::parse(text).ok_or_else(|| bad(field, text))?),
        Field::Arfcn => snap.cell.arfcn = Some(parse_uint(text, field)?),
        Field::FreqRangeType => {
            snap.radio.freq_range_type = Some(FreqRange::parse(text).ok_or_else(|| bad(field, text))?)
        }
        Field::Duplex => snap.radio.duplex = Some(Duplex::parse(text).ok_or_else(|| bad(field, text))?),
        Field::Rssi => {
            let (declared, slots) = parse_rssi(text, dialect.grain(Field::Rssi))?;
            snap.radio.rssi_declared = Some(declared);
            snap.radio.rssi_branches = slots;
        }
        measured => {
            let v = parse_measure(text, measured, dialect.grain(measured))?;
            snap.set_value(measured, Some(v));
        }
    }
    Ok(())
}

/// Parse the payload of a successful `AT^DEBUG?` exchange.
pub fn parse_debug_response(lines: &[String]) -> Result<KpiSnapshot, CollectError> {
    parse_dialect(AtDialect::Debug, lines)
}

/// Parse the payload of a successful `AT+SGCELLINFOEX?` exchange.
pub fn parse_sgcellinfoex_response(lines: &[String]) -> Result<KpiSnapshot, CollectError> {
    parse_dialect(AtDialect::SgCellInfoEx, lines)
}

pub fn parse_response(dialect: AtDialect, lines: &[String]) -> Result<KpiSnapshot, CollectError> {
    parse_dialect(dialect, lines)
}

/// Payload lines (no terminator) for `snap` in `dialect`.
pub fn render_payload(dialect: AtDialect, snap: &KpiSnapshot) -> Vec<String> {
    let c = &snap.cell;
    let r = &snap.radio;
    let mut lines = Vec::new();
    for &(key, field) in dialect.keys() {
        let value = match field {
            Field::Rat => c.rat.as_ref().map(|r| r.raw.clone()),
            Field::Mcc => match (&c.mcc, &c.mnc) {
                (Some(mcc), Some(mnc)) => Some(format!("{mcc},{mnc}")),
                _ => None,
            },
            Field::NrCellId => c.nr_cell_id.map(|v| v.to_string()),
            Field::Tac => c.tac.map(|v| v.to_string()),
            Field::Pci => c.pci.map(|v| v.to_string()),
            Field::Band => c.band.map(|b| b.to_string()),
            Field::Arfcn => c.arfcn.map(|v| v.to_string()),
            Field::FreqRangeType => r.freq_range_type.map(|f| f.number().to_string()),
            Field::Duplex => r.duplex.map(|d| format!("{} NR5G", d.label())),
            Field::Rssi => snap
                .has(Field::Rssi)
                .then(|| render_rssi(r.rssi_declared.unwrap_or(0), &r.rssi_branches)),
            Field::Scs => r.scs.map(|v| v.to_decimal_string()),
            measured => snap.value(measured).map(|v| v.to_string()),
        };
        if let Some(v) = value {
            lines.push(format!("{key}:{v}"));
        }
    }
    lines
}

/// Complete CRLF-framed reply as the device sends it, ending in `OK`.
pub fn render_reply(dialect: AtDialect, snap: &KpiSnapshot) -> String {
    let mut out = String::new();
    for line in render_payload(dialect, snap) {
        out.push_str(&line);
        out.push_str("\r\n");
    }
    out.push_str("OK\r\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lines(s: &str) -> Vec<String> {
        s.lines().map(ToOwned::to_owned).collect()
    }

    #[test]
    fn line_classification() {
        assert_eq!(classify_line("OK\r\n"), AtLine::Terminator(AtStatus::Ok));
        assert_eq!(classify_line("ERROR"), AtLine::Terminator(AtStatus::Error));
        assert_eq!(classify_line("+CME ERROR: 4"), AtLine::Terminator(AtStatus::Error));
        assert_eq!(classify_line("  \r\n"), AtLine::Blank);
        assert_eq!(classify_line("RSRP:-79 dBm\r"), AtLine::Payload("RSRP:-79 dBm".into()));
    }

    #[test]
    fn empty_command_rejected_locally() {
        assert!(check_command("").is_err());
        assert!(check_command("   ").is_err());
        assert!(check_command("AT\r\nAT").is_err());
        assert!(check_command("DEBUG?").is_err());
        assert!(check_command("AT^DEBUG?").is_ok());
    }

    #[test]
    fn error_terminator_is_dialect_unsupported() {
        let err = finish_reply("AT^DEBUG?", vec![], AtStatus::Error).unwrap_err();
        assert_eq!(err.kind, ErrorKind::DialectUnsupported);
        assert_eq!(err.raw.as_deref(), Some(&b"AT^DEBUG?"[..]));
    }

    #[test]
    fn missing_rat_fails() {
        let err = parse_debug_response(&lines("RSRP:-79 dBm")).unwrap_err();
        assert_eq!(err.kind, ErrorKind::ParseFailed);
        assert!(err.detail.contains("RAT"));
    }

    #[test]
    fn non_numeric_rsrp_fails() {
        let err = parse_debug_response(&lines("RAT:NR5G_SA\nRSRP:abc")).unwrap_err();
        assert_eq!(err.kind, ErrorKind::ParseFailed);
        assert!(err.raw.is_some());
    }

    #[test]
    fn truncated_line_carries_payload() {
        let err = parse_sgcellinfoex_response(&lines("RAT:5G\nPHYSICAL_CELL_ID:2\nRSR")).unwrap_err();
        assert_eq!(err.kind, ErrorKind::ParseFailed);
        assert!(err.detail.starts_with("line 2"));
        assert_eq!(err.raw.as_deref(), Some(&b"RAT:5G\r\nPHYSICAL_CELL_ID:2\r\nRSR"[..]));
    }

    #[test]
    fn duplicate_keys_fail() {
        assert!(parse_debug_response(&lines("RAT:NR5G_SA\nRAT:LTE")).is_err());
    }

    #[test]
    fn off_grain_sinr_fails() {
        assert!(parse_sgcellinfoex_response(&lines("RAT:5G\nSINR:14.3 dB")).is_err());
        assert!(parse_sgcellinfoex_response(&lines("RAT:5G\nSINR:14.5 dB")).is_ok());
    }

    #[test]
    fn unknown_keys_are_ignored() {
        let snap = parse_debug_response(&lines("RAT:NR5G_SA\nTEMPERATURE:41\nPHYSICAL_CELL_ID:7")).unwrap();
        assert_eq!(snap.cell.pci, None);
        assert_eq!(snap.populated_fields(), [Field::Rat]);
    }

    #[test]
    fn reply_ends_with_ok() {
        let mut snap = KpiSnapshot::new(Method::AtDebug, "");
        snap.cell.rat = Some(Rat::from_label("NR5G_SA"));
        assert_eq!(render_reply(AtDialect::Debug, &snap), "RAT:NR5G_SA\r\nOK\r\n");
    }
}
