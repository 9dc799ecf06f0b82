//! Unified KPI schema shared by every extraction method.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use core::time::Duration;

use crate::value::{Grain, MeasurementValue, Unit, ValueError};

/// How a snapshot was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Web,
    AtDebug,
    AtSgCellInfoEx,
    XcalL3,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Web, Method::AtDebug, Method::AtSgCellInfoEx, Method::XcalL3];

    pub fn label(self) -> &'static str {
        match self {
            Method::Web => "WEB",
            Method::AtDebug => "AT_DEBUG",
            Method::AtSgCellInfoEx => "AT_SGCELLINFOEX",
            Method::XcalL3 => "XCAL_L3",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownLabel(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown label {:?}", self.0)
    }
}

impl core::error::Error for UnknownLabel {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RatKind {
    Nr5gSa,
    Nr5gNsa,
    Lte,
    Unknown,
}

impl RatKind {
    pub fn label(self) -> &'static str {
        match self {
            RatKind::Nr5gSa => "NR5G_SA",
            RatKind::Nr5gNsa => "NR5G_NSA",
            RatKind::Lte => "LTE",
            RatKind::Unknown => "UNKNOWN",
        }
    }
}

/// Radio access technology. The same network state is labelled "5G",
/// "NR5G_SA" or "5GNR" depending on the method, so the raw label is kept.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rat {
    pub kind: RatKind,
    pub raw: String,
}

impl Rat {
    pub fn from_label(raw: &str) -> Rat {
        let norm = raw.trim().to_ascii_uppercase();
        let kind = match norm.as_str() {
            "NR5G_SA" | "5G" | "5GNR" | "NR" | "NR5G" | "5G_SA" | "NR_SA" => RatKind::Nr5gSa,
            "NR5G_NSA" | "5G_NSA" | "NR_NSA" | "EN-DC" | "ENDC" => RatKind::Nr5gNsa,
            "LTE" | "4G" | "E-UTRA" => RatKind::Lte,
            _ => RatKind::Unknown,
        };
        Rat {
            kind,
            raw: raw.trim().to_owned(),
        }
    }
}

/// NR operating band, e.g. `n258`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Band {
    pub number: u16,
    /// Whether the source wrote the band with an `n` prefix.
    pub n_prefix: bool,
}

impl Band {
    pub const MAX: u16 = 1024;

    pub fn parse(text: &str) -> Option<Band> {
        let t = text.trim();
        let (n_prefix, digits) = match t.strip_prefix(['n', 'N']) {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.len() > 5 {
            return None;
        }
        let number: u16 = digits.parse().ok()?;
        (1..=Band::MAX).contains(&number).then_some(Band { number, n_prefix })
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n_prefix {
            write!(f, "n{}", self.number)
        } else {
            write!(f, "{}", self.number)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FreqRange {
    Fr1,
    Fr2,
}

impl FreqRange {
    pub fn parse(text: &str) -> Option<FreqRange> {
        match text.trim().to_ascii_uppercase().as_str() {
            "1" | "FR1" => Some(FreqRange::Fr1),
            "2" | "FR2" => Some(FreqRange::Fr2),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FreqRange::Fr1 => "FR1",
            FreqRange::Fr2 => "FR2",
        }
    }

    pub fn number(self) -> u8 {
        match self {
            FreqRange::Fr1 => 1,
            FreqRange::Fr2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Duplex {
    Tdd,
    Fdd,
}

impl Duplex {
    /// Accepts the leading token only, so "TDD NR5G" reads as TDD.
    pub fn parse(text: &str) -> Option<Duplex> {
        let first = text.split_whitespace().next()?;
        match first.to_ascii_uppercase().as_str() {
            "TDD" => Some(Duplex::Tdd),
            "FDD" => Some(Duplex::Fdd),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Duplex::Tdd => "TDD",
            Duplex::Fdd => "FDD",
        }
    }
}

/// Every field a snapshot can carry, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Rat,
    Mcc,
    Mnc,
    NrCellId,
    Tac,
    Pci,
    Band,
    Bandwidth,
    Scs,
    FreqRangeType,
    Arfcn,
    Rssi,
    Rsrp,
    Rsrq,
    Snr,
    Sinr,
    Duplex,
}

impl Field {
    pub const ALL: [Field; 17] = [
        Field::Rat,
        Field::Mcc,
        Field::Mnc,
        Field::NrCellId,
        Field::Tac,
        Field::Pci,
        Field::Band,
        Field::Bandwidth,
        Field::Scs,
        Field::FreqRangeType,
        Field::Arfcn,
        Field::Rssi,
        Field::Rsrp,
        Field::Rsrq,
        Field::Snr,
        Field::Sinr,
        Field::Duplex,
    ];

    /// Fields carried as [`MeasurementValue`]s (RSSI is a list of them).
    pub const MEASURED: [Field; 6] = [
        Field::Bandwidth,
        Field::Scs,
        Field::Rsrp,
        Field::Rsrq,
        Field::Snr,
        Field::Sinr,
    ];

    /// Short key used in selector maps and raw field maps.
    pub fn key(self) -> &'static str {
        match self {
            Field::Rat => "rat",
            Field::Mcc => "mcc",
            Field::Mnc => "mnc",
            Field::NrCellId => "nr_cell_id",
            Field::Tac => "tac",
            Field::Pci => "pci",
            Field::Band => "band",
            Field::Bandwidth => "bandwidth",
            Field::Scs => "scs",
            Field::FreqRangeType => "freq_range_type",
            Field::Arfcn => "arfcn",
            Field::Rssi => "rssi",
            Field::Rsrp => "rsrp",
            Field::Rsrq => "rsrq",
            Field::Snr => "snr",
            Field::Sinr => "sinr",
            Field::Duplex => "duplex",
        }
    }

    /// Name in the canonical flat JSON/CSV record.
    pub fn json_name(self) -> &'static str {
        match self {
            Field::Bandwidth => "bandwidth_mhz",
            Field::Scs => "scs_khz",
            Field::Rssi => "rssi_branches",
            Field::Rsrp => "rsrp_dbm",
            Field::Rsrq => "rsrq_db",
            Field::Snr => "snr_db",
            Field::Sinr => "sinr_db",
            other => other.key(),
        }
    }

    /// Human label used in diagnostics.
    pub fn label(self) -> &'static str {
        match self {
            Field::Rat => "RAT",
            Field::Mcc => "MCC",
            Field::Mnc => "MNC",
            Field::NrCellId => "NR Cell ID",
            Field::Tac => "NR TAC",
            Field::Pci => "Physical Cell ID",
            Field::Band => "Band",
            Field::Bandwidth => "Bandwidth",
            Field::Scs => "Sub-Carrier Spacing",
            Field::FreqRangeType => "Frequency Range Type",
            Field::Arfcn => "DL/UL Channel",
            Field::Rssi => "RSSI",
            Field::Rsrp => "RSRP",
            Field::Rsrq => "RSRQ",
            Field::Snr => "SNR",
            Field::Sinr => "SINR",
            Field::Duplex => "Duplex Mode",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            Field::Rssi | Field::Rsrp => Unit::Dbm,
            Field::Rsrq | Field::Snr | Field::Sinr => Unit::Db,
            Field::Bandwidth => Unit::Mhz,
            Field::Scs => Unit::Khz,
            _ => Unit::None,
        }
    }

    pub fn from_key(key: &str) -> Option<Field> {
        Field::ALL
            .into_iter()
            .find(|f| f.key() == key || f.json_name() == key)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Cell identity rows of the comparison table. Every field is optional
/// because each method exposes a different subset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellIdentity {
    pub rat: Option<Rat>,
    pub mcc: Option<String>,
    pub mnc: Option<String>,
    pub nr_cell_id: Option<u64>,
    pub tac: Option<u32>,
    pub pci: Option<u16>,
    pub band: Option<Band>,
    pub arfcn: Option<u32>,
}

/// Radio measurement rows. Absent means "the method does not expose it",
/// never zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RadioMetrics {
    /// Per-branch RSSI slots as reported; blank slots are `None`.
    pub rssi_branches: Vec<Option<MeasurementValue>>,
    /// Branch count declared by the source, when it declares one.
    pub rssi_declared: Option<u8>,
    pub rsrp: Option<MeasurementValue>,
    pub rsrq: Option<MeasurementValue>,
    pub snr: Option<MeasurementValue>,
    pub sinr: Option<MeasurementValue>,
    pub bandwidth: Option<MeasurementValue>,
    pub scs: Option<MeasurementValue>,
    pub freq_range_type: Option<FreqRange>,
    pub duplex: Option<Duplex>,
}

/// Monotonic instant plus wall-clock time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    /// Time since the scenario origin on the monotonic clock.
    pub mono: Duration,
    pub unix_ms: i64,
}

impl Timestamp {
    pub fn new(mono: Duration, unix_ms: i64) -> Self {
        Timestamp { mono, unix_ms }
    }

    pub fn mono_secs(&self) -> f64 {
        self.mono.as_secs_f64()
    }
}

/// One timestamped reading from one method on one device.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiSnapshot {
    pub timestamp: Timestamp,
    pub method: Method,
    pub device: String,
    pub cell: CellIdentity,
    pub radio: RadioMetrics,
    /// Original response, kept for audit.
    pub raw: Vec<u8>,
}

impl KpiSnapshot {
    pub fn new(method: Method, device: impl Into<String>) -> Self {
        KpiSnapshot {
            timestamp: Timestamp::default(),
            method,
            device: device.into(),
            cell: CellIdentity::default(),
            radio: RadioMetrics::default(),
            raw: Vec::new(),
        }
    }

    pub fn with_device(mut self, device: impl Into<String>) -> Self {
        self.device = device.into();
        self
    }

    pub fn with_timestamp(mut self, timestamp: Timestamp) -> Self {
        self.timestamp = timestamp;
        self
    }

    /// Equality on what was measured, ignoring timestamp and raw payload.
    pub fn kpi_eq(&self, other: &KpiSnapshot) -> bool {
        self.method == other.method
            && self.device == other.device
            && self.cell == other.cell
            && self.radio == other.radio
    }

    pub fn has(&self, field: Field) -> bool {
        let c = &self.cell;
        let r = &self.radio;
        match field {
            Field::Rat => c.rat.is_some(),
            Field::Mcc => c.mcc.is_some(),
            Field::Mnc => c.mnc.is_some(),
            Field::NrCellId => c.nr_cell_id.is_some(),
            Field::Tac => c.tac.is_some(),
            Field::Pci => c.pci.is_some(),
            Field::Band => c.band.is_some(),
            Field::Arfcn => c.arfcn.is_some(),
            Field::Rssi => r.rssi_declared.is_some() || !r.rssi_branches.is_empty(),
            Field::FreqRangeType => r.freq_range_type.is_some(),
            Field::Duplex => r.duplex.is_some(),
            measured => self.value(measured).is_some(),
        }
    }

    pub fn populated_fields(&self) -> Vec<Field> {
        Field::ALL.into_iter().filter(|f| self.has(*f)).collect()
    }

    /// Scalar measured value of `field`, if it is a scalar measurement.
    pub fn value(&self, field: Field) -> Option<MeasurementValue> {
        let r = &self.radio;
        match field {
            Field::Rsrp => r.rsrp,
            Field::Rsrq => r.rsrq,
            Field::Snr => r.snr,
            Field::Sinr => r.sinr,
            Field::Bandwidth => r.bandwidth,
            Field::Scs => r.scs,
            _ => None,
        }
    }

    pub fn set_value(&mut self, field: Field, value: Option<MeasurementValue>) {
        let r = &mut self.radio;
        match field {
            Field::Rsrp => r.rsrp = value,
            Field::Rsrq => r.rsrq = value,
            Field::Snr => r.snr = value,
            Field::Sinr => r.sinr = value,
            Field::Bandwidth => r.bandwidth = value,
            Field::Scs => r.scs = value,
            _ => {}
        }
    }

    /// Flat canonical record; absent fields are omitted.
    pub fn canonical_record(&self) -> Vec<(&'static str, CanonicalValue)> {
        let mut out = Vec::new();
        let c = &self.cell;
        let r = &self.radio;
        let num = |v: &MeasurementValue| CanonicalValue::Number(v.to_decimal_string());
        if let Some(rat) = &c.rat {
            out.push(("rat", CanonicalValue::Text(rat.raw.clone())));
        }
        if let Some(mcc) = &c.mcc {
            out.push(("mcc", CanonicalValue::Text(mcc.clone())));
        }
        if let Some(mnc) = &c.mnc {
            out.push(("mnc", CanonicalValue::Text(mnc.clone())));
        }
        if let Some(id) = c.nr_cell_id {
            out.push(("nr_cell_id", CanonicalValue::Integer(id as i64)));
        }
        if let Some(tac) = c.tac {
            out.push(("tac", CanonicalValue::Integer(tac as i64)));
        }
        if let Some(pci) = c.pci {
            out.push(("pci", CanonicalValue::Integer(pci as i64)));
        }
        if let Some(band) = c.band {
            out.push(("band", CanonicalValue::Integer(band.number as i64)));
        }
        if let Some(bw) = &r.bandwidth {
            out.push(("bandwidth_mhz", num(bw)));
        }
        if let Some(scs) = &r.scs {
            out.push(("scs_khz", num(scs)));
        }
        if let Some(fr) = r.freq_range_type {
            out.push(("freq_range_type", CanonicalValue::Text(fr.label().to_owned())));
        }
        if let Some(arfcn) = c.arfcn {
            out.push(("arfcn", CanonicalValue::Integer(arfcn as i64)));
        }
        if self.has(Field::Rssi) {
            out.push((
                "rssi_branches",
                CanonicalValue::NumberList(
                    r.rssi_branches
                        .iter()
                        .map(|b| b.as_ref().map(|v| v.to_decimal_string()))
                        .collect(),
                ),
            ));
        }
        for (name, v) in [("rsrp_dbm", &r.rsrp), ("rsrq_db", &r.rsrq), ("snr_db", &r.snr), ("sinr_db", &r.sinr)] {
            if let Some(v) = v {
                out.push((name, num(v)));
            }
        }
        if let Some(d) = r.duplex {
            out.push(("duplex", CanonicalValue::Text(d.label().to_owned())));
        }
        out.push(("method", CanonicalValue::Text(self.method.label().to_owned())));
        out.push(("device", CanonicalValue::Text(self.device.clone())));
        out.push(("ts_unix_ms", CanonicalValue::Integer(self.timestamp.unix_ms)));
        out
    }

    /// Rebuild a snapshot from canonical text cells (CSV import). Grains are
    /// inferred from the decimals shown; the declared RSSI count is not part
    /// of the canonical record and stays unset.
    pub fn from_canonical_text<'a, I>(cells: I) -> Result<KpiSnapshot, CanonicalError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut snap = KpiSnapshot::new(Method::Web, "");
        let mut have_method = false;
        for (name, text) in cells {
            if text.is_empty() {
                continue;
            }
            let bad = || CanonicalError::new(name, text);
            match name {
                "rat" => snap.cell.rat = Some(Rat::from_label(text)),
                "mcc" => snap.cell.mcc = Some(text.to_owned()),
                "mnc" => snap.cell.mnc = Some(text.to_owned()),
                "nr_cell_id" => snap.cell.nr_cell_id = Some(text.parse().map_err(|_| bad())?),
                "tac" => snap.cell.tac = Some(text.parse().map_err(|_| bad())?),
                "pci" => snap.cell.pci = Some(text.parse().map_err(|_| bad())?),
                "band" => snap.cell.band = Some(Band::parse(text).ok_or_else(bad)?),
                "arfcn" => snap.cell.arfcn = Some(text.parse().map_err(|_| bad())?),
                "freq_range_type" => {
                    snap.radio.freq_range_type = Some(FreqRange::parse(text).ok_or_else(bad)?)
                }
                "duplex" => snap.radio.duplex = Some(Duplex::parse(text).ok_or_else(bad)?),
                "rssi_branches" => {
                    let mut slots = Vec::new();
                    for part in text.split(';') {
                        let part = part.trim();
                        if part.is_empty() {
                            slots.push(None);
                        } else {
                            slots.push(Some(
                                parse_shown_decimal(part, Unit::Dbm).map_err(|_| bad())?,
                            ));
                        }
                    }
                    if slots.iter().all(Option::is_none) {
                        slots.clear();
                    }
                    snap.radio.rssi_branches = slots;
                }
                "method" => {
                    snap.method = text.parse().map_err(|_| bad())?;
                    have_method = true;
                }
                "device" => snap.device = text.to_owned(),
                "ts_unix_ms" => snap.timestamp.unix_ms = text.parse().map_err(|_| bad())?,
                // Columns outside the canonical record are ignored.
                other => {
                    if let Some(field) = Field::from_key(other).filter(|f| Field::MEASURED.contains(f)) {
                        let v = parse_shown_decimal(text, field.unit()).map_err(|_| bad())?;
                        snap.set_value(field, Some(v));
                    }
                }
            }
        }
        if !have_method {
            return Err(CanonicalError::new("method", ""));
        }
        Ok(snap)
    }
}

/// Parse a decimal literal, taking its grain from the number of decimals shown.
pub fn parse_shown_decimal(text: &str, unit: Unit) -> Result<MeasurementValue, ValueError> {
    let (mantissa, scale) = crate::value::parse_decimal(text)?;
    if scale > crate::value::MAX_GRAIN_SCALE {
        return Err(ValueError::GrainTooFine);
    }
    MeasurementValue::from_scaled(mantissa, scale, Grain::from_decimals(scale)?, unit)
}

/// A value in the canonical flat record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CanonicalValue {
    Text(String),
    /// Decimal literal, exactly as the value's grain renders it.
    Number(String),
    Integer(i64),
    /// Per-branch decimal literals; `None` for blank branches.
    NumberList(Vec<Option<String>>),
}

impl CanonicalValue {
    /// Single-cell text form used by CSV export.
    pub fn to_cell(&self) -> String {
        match self {
            CanonicalValue::Text(s) | CanonicalValue::Number(s) => s.clone(),
            CanonicalValue::Integer(i) => i.to_string(),
            CanonicalValue::NumberList(items) => items
                .iter()
                .map(|i| i.as_deref().unwrap_or(""))
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalError {
    pub column: String,
    pub text: String,
}

impl CanonicalError {
    fn new(column: &str, text: &str) -> Self {
        CanonicalError {
            column: column.to_owned(),
            text: text.to_owned(),
        }
    }
}

impl fmt::Display for CanonicalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.text.is_empty() {
            write!(f, "missing mandatory column {:?}", self.column)
        } else {
            write!(f, "bad value {:?} in column {:?}", self.text, self.column)
        }
    }
}

impl core::error::Error for CanonicalError {}
