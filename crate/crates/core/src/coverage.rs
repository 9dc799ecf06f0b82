//! Which fields each (method, device) pair exposes, and snapshot validation
//! against that coverage.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{Field, KpiSnapshot, Method};
use crate::value::Unit;

pub const CPE_A: &str = "cpe-a";
pub const CPE_B: &str = "cpe-b";

pub const RSRP_RANGE: (f64, f64) = (-156.0, -31.0);
pub const RSRQ_RANGE: (f64, f64) = (-43.0, 20.0);
pub const SINR_RANGE: (f64, f64) = (-23.0, 40.0);
pub const PCI_MAX: u16 = 1007;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageMatrix {
    entries: BTreeMap<(Method, String), BTreeSet<Field>>,
}

impl CoverageMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, method: Method, device: &str, fields: impl IntoIterator<Item = Field>) {
        self.entries
            .insert((method, device.to_owned()), fields.into_iter().collect());
    }

    pub fn get(&self, method: Method, device: &str) -> Option<&BTreeSet<Field>> {
        self.entries.get(&(method, device.to_owned()))
    }

    pub fn covers(&self, method: Method, device: &str, field: Field) -> bool {
        self.get(method, device).is_some_and(|s| s.contains(&field))
    }

    pub fn entries(&self) -> impl Iterator<Item = (Method, &str, &BTreeSet<Field>)> {
        self.entries.iter().map(|((m, d), s)| (*m, d.as_str(), s))
    }

    /// The five columns of the method comparison: the two web dashboards,
    /// the two AT dialects (CPE-A answers `AT^DEBUG?`, CPE-B answers
    /// `AT+SGCELLINFOEX?`) and the L3 report, which is common to both devices.
    pub fn reference() -> Self {
        use Field::*;
        let mut m = CoverageMatrix::new();
        m.insert(
            Method::Web,
            CPE_A,
            [Rat, Mcc, Mnc, NrCellId, Pci, Band, Bandwidth, Arfcn, Rsrp, Rsrq, Snr],
        );
        m.insert(Method::Web, CPE_B, [Rat, Pci, Band, Rsrp, Rsrq, Sinr]);
        m.insert(
            Method::AtDebug,
            CPE_A,
            [Rat, Mcc, Mnc, NrCellId, Tac, Band, Bandwidth, Arfcn, Rssi, Rsrp, Rsrq, Sinr],
        );
        m.insert(
            Method::AtSgCellInfoEx,
            CPE_B,
            [
                Rat, Mcc, Mnc, NrCellId, Tac, Pci, Band, Bandwidth, Scs, FreqRangeType, Arfcn, Rsrp,
                Rsrq, Sinr, Duplex,
            ],
        );
        let l3 = [Rat, Pci, Band, Scs, Arfcn, Rsrp, Rsrq, Sinr, Duplex];
        m.insert(Method::XcalL3, CPE_A, l3);
        m.insert(Method::XcalL3, CPE_B, l3);
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    NotCovered(Method),
    OutOfRange { value: f64, min: f64, max: f64 },
    WrongUnit { expected: Unit, found: Unit },
    Malformed(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: Field,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::NotCovered(m) => write!(f, "{} not covered by {}", self.field, m),
            ViolationKind::OutOfRange { value, min, max } => {
                write!(f, "{} = {} outside [{}, {}]", self.field, value, min, max)
            }
            ViolationKind::WrongUnit { expected, found } => {
                write!(f, "{} has unit {:?}, expected {:?}", self.field, found, expected)
            }
            ViolationKind::Malformed(why) => write!(f, "{}: {}", self.field, why),
        }
    }
}

/// Non-fatal findings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    RssiCountMismatch { declared: u8, slots: usize, present: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::RssiCountMismatch { declared, slots, present } => write!(
                f,
                "RSSI declares {declared} branches but reports {present} values in {slots} slots"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoCoverageEntry {
    pub method: Method,
    pub device: String,
}

impl fmt::Display for NoCoverageEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no coverage entry for ({}, {})", self.method, self.device)
    }
}

impl core::error::Error for NoCoverageEntry {}

pub fn validate_snapshot(
    snapshot: &KpiSnapshot,
    matrix: &CoverageMatrix,
) -> Result<ValidationReport, NoCoverageEntry> {
    let covered = matrix
        .get(snapshot.method, &snapshot.device)
        .ok_or_else(|| NoCoverageEntry {
            method: snapshot.method,
            device: snapshot.device.clone(),
        })?;
    let mut report = ValidationReport::default();
    let mut flag = |field: Field, kind: ViolationKind| report.violations.push(Violation { field, kind });

    for field in snapshot.populated_fields() {
        if !covered.contains(&field) {
            flag(field, ViolationKind::NotCovered(snapshot.method));
        }
    }

    let ranges = [
        (Field::Rsrp, RSRP_RANGE),
        (Field::Rsrq, RSRQ_RANGE),
        (Field::Sinr, SINR_RANGE),
        (Field::Snr, SINR_RANGE),
    ];
    for (field, (min, max)) in ranges {
        if let Some(v) = snapshot.value(field) {
            let x = v.value();
            if x < min || x > max {
                flag(field, ViolationKind::OutOfRange { value: x, min, max });
            }
        }
    }
    for field in Field::MEASURED {
        if let Some(v) = snapshot.value(field) {
            if v.unit() != field.unit() {
                flag(field, ViolationKind::WrongUnit { expected: field.unit(), found: v.unit() });
            }
        }
    }
    for v in snapshot.radio.rssi_branches.iter().flatten() {
        if v.unit() != Unit::Dbm {
            flag(Field::Rssi, ViolationKind::WrongUnit { expected: Unit::Dbm, found: v.unit() });
        }
    }

    let cell = &snapshot.cell;
    if let Some(pci) = cell.pci {
        if pci > PCI_MAX {
            flag(Field::Pci, ViolationKind::OutOfRange { value: pci as f64, min: 0.0, max: PCI_MAX as f64 });
        }
    }
    if let Some(band) = cell.band {
        if band.number == 0 || band.number > crate::model::Band::MAX {
            flag(Field::Band, ViolationKind::OutOfRange { value: band.number as f64, min: 1.0, max: 1024.0 });
        }
    }
    if let Some(mcc) = &cell.mcc {
        if mcc.len() != 3 || !mcc.bytes().all(|b| b.is_ascii_digit()) {
            flag(Field::Mcc, ViolationKind::Malformed("MCC must be 3 digits"));
        }
    }
    if let Some(mnc) = &cell.mnc {
        if !(2..=3).contains(&mnc.len()) || !mnc.bytes().all(|b| b.is_ascii_digit()) {
            flag(Field::Mnc, ViolationKind::Malformed("MNC must be 2 or 3 digits"));
        }
    }

    if let Some(declared) = snapshot.radio.rssi_declared {
        let slots = snapshot.radio.rssi_branches.len();
        let present = snapshot.radio.rssi_branches.iter().flatten().count();
        if declared as usize != present || (slots != 0 && declared as usize != slots) {
            report
                .warnings
                .push(Warning::RssiCountMismatch { declared, slots, present });
        }
    }
    Ok(report)
}
