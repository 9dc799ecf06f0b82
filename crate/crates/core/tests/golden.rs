mod common;

use common::*;
use kpiprobe_core::coverage::ViolationKind;
use kpiprobe_core::tm::{self, TmFrame};
use kpiprobe_core::{validate_snapshot, CoverageMatrix, Field, Method};

#[test]
fn every_column_parses_to_table_values() {
    for (method, device) in COLUMNS {
        let got = parse_fixture(method, device).unwrap_or_else(|e| panic!("{method}@{device}: {e}"));
        let want = expected(method, device);
        assert_eq!(got.cell, want.cell, "{method}@{device}");
        assert_eq!(got.radio, want.radio, "{method}@{device}");
        assert!(!got.raw.is_empty());
    }
}

#[test]
fn at_debug_headline_values() {
    let s = parse_fixture(Method::AtDebug, kpiprobe_core::CPE_A).unwrap();
    assert_eq!(s.radio.rsrp.unwrap().to_string(), "-79 dBm");
    assert_eq!(s.radio.rsrq.unwrap().to_string(), "-11 dB");
    assert_eq!(s.radio.sinr.unwrap().to_string(), "14.0 dB");
    assert_eq!(s.radio.bandwidth.unwrap().to_string(), "200.0 MHz");
    assert_eq!(s.cell.nr_cell_id, Some(16400395));
    assert_eq!(s.cell.tac, Some(1000));
    assert_eq!(s.cell.arfcn, Some(2058427));
    let rssi: Vec<_> = s.radio.rssi_branches.iter().map(|b| b.map(|v| v.value())).collect();
    assert_eq!(rssi, [Some(-84.3), Some(-78.6), None, None]);
}

#[test]
fn xcal_headline_values_and_extras() {
    let report = tm::decode_l3_response(&TmFrame::decode(&xcal_frame()).unwrap()).unwrap();
    let r = &report.snapshot.radio;
    assert_eq!(r.rsrp.unwrap().to_decimal_string(), "-78.02");
    assert_eq!(r.rsrq.unwrap().to_decimal_string(), "-11.17");
    assert_eq!(r.sinr.unwrap().to_decimal_string(), "14.21");
    let keys: Vec<_> = report.extras.iter().map(|(k, _)| k.as_str()).collect();
    assert_eq!(keys, ["SSB_INDEX", "DL_MCS", "DL_BLER"]);
}

#[test]
fn rat_labels_differ_but_normalize() {
    let kinds: Vec<_> = COLUMNS
        .iter()
        .map(|(m, d)| parse_fixture(*m, d).unwrap().cell.rat.unwrap())
        .collect();
    let raws: Vec<_> = kinds.iter().map(|r| r.raw.as_str()).collect();
    assert_eq!(raws, ["5G", "5G", "NR5G_SA", "5G", "5GNR"]);
    assert!(kinds.iter().all(|r| r.kind == kinds[0].kind));
}

#[test]
fn golden_snapshots_validate() {
    let matrix = CoverageMatrix::reference();
    for (method, device) in COLUMNS {
        let report = validate_snapshot(&parse_fixture(method, device).unwrap(), &matrix).unwrap();
        assert!(report.is_ok(), "{method}@{device}: {:?}", report.violations);
    }
}

#[test]
fn every_cross_column_mutation_is_rejected() {
    let matrix = CoverageMatrix::reference();
    let mut mutations = 0;
    for (method, device) in COLUMNS {
        let golden = expected(method, device);
        for field in Field::ALL.into_iter().filter(|f| !matrix.covers(method, device, *f)) {
            let mut mutated = golden.clone();
            copy_field(&donor(field), &mut mutated, field);
            let report = validate_snapshot(&mutated, &matrix).unwrap();
            assert_eq!(report.violations.len(), 1, "{method}@{device} + {field}");
            assert_eq!(report.violations[0].field, field);
            assert_eq!(report.violations[0].kind, ViolationKind::NotCovered(method));
            mutations += 1;
        }
    }
    assert!(mutations >= 25, "{mutations}");
}

#[test]
fn rssi_on_xcal_message() {
    let matrix = CoverageMatrix::reference();
    let mut s = expected(Method::XcalL3, kpiprobe_core::CPE_A);
    s.radio.rssi_branches = vec![Some(mv("-80.0", kpiprobe_core::Grain::TENTH, kpiprobe_core::Unit::Dbm))];
    let report = validate_snapshot(&s, &matrix).unwrap();
    assert_eq!(report.violations[0].to_string(), "RSSI not covered by XCAL_L3");
}
