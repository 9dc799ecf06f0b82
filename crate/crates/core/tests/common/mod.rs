#![allow(dead_code)]

use kpiprobe_core::at::{self, AtDialect};
use kpiprobe_core::model::{Band, Duplex, FreqRange, Rat};
use kpiprobe_core::tm::{self, TmFrame};
use kpiprobe_core::web::{self, WebLayout};
use kpiprobe_core::{CollectError, Field, Grain, KpiSnapshot, MeasurementValue, Method, Unit, CPE_A, CPE_B};

pub const WEB_CPE_A: &str = include_str!("../../../../fixtures/web_cpe_a.html");
pub const WEB_CPE_B: &str = include_str!("../../../../fixtures/web_cpe_b.html");
pub const AT_DEBUG: &str = include_str!("../../../../fixtures/at_debug.txt");
pub const AT_SGCELLINFOEX: &str = include_str!("../../../../fixtures/at_sgcellinfoex.txt");
pub const XCAL_L3_HEX: &str = include_str!("../../../../fixtures/xcal_l3.hex");

/// The five columns of the comparison table.
pub const COLUMNS: [(Method, &str); 5] = [
    (Method::Web, CPE_A),
    (Method::Web, CPE_B),
    (Method::AtDebug, CPE_A),
    (Method::AtSgCellInfoEx, CPE_B),
    (Method::XcalL3, CPE_A),
];

pub fn xcal_frame() -> Vec<u8> {
    let text = XCAL_L3_HEX.trim();
    (0..text.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&text[i..i + 2], 16).expect("fixture is hex"))
        .collect()
}

/// Parse the canned response of one column.
pub fn parse_fixture(method: Method, device: &str) -> Result<KpiSnapshot, CollectError> {
    let snap = match method {
        Method::Web => {
            let layout = WebLayout::for_device(device).unwrap();
            let html = if device == CPE_A { WEB_CPE_A } else { WEB_CPE_B };
            web::parse_page(html, &layout.selector_map(), device)?
        }
        Method::AtDebug => at::parse_reply(AtDialect::Debug, AT_DEBUG)?,
        Method::AtSgCellInfoEx => at::parse_reply(AtDialect::SgCellInfoEx, AT_SGCELLINFOEX)?,
        Method::XcalL3 => tm::decode_l3_response(&TmFrame::decode(&xcal_frame())?)?.snapshot,
    };
    Ok(snap.with_device(device))
}

pub fn mv(text: &str, grain: Grain, unit: Unit) -> MeasurementValue {
    MeasurementValue::parse_decimal(text, grain, unit).unwrap()
}

fn band(number: u16, n_prefix: bool) -> Option<Band> {
    Some(Band { number, n_prefix })
}

/// Table values of one column, built by hand.
pub fn expected(method: Method, device: &str) -> KpiSnapshot {
    let mut s = KpiSnapshot::new(method, device);
    let (c, r) = (&mut s.cell, &mut s.radio);
    match (method, device) {
        (Method::Web, CPE_A) => {
            c.rat = Some(Rat::from_label("5G"));
            c.mcc = Some("286".into());
            c.mnc = Some("01".into());
            c.nr_cell_id = Some(16400395);
            c.pci = Some(2);
            c.band = band(258, true);
            c.arfcn = Some(2058427);
            r.bandwidth = Some(mv("200.0", Grain::TENTH, Unit::Mhz));
            r.rsrp = Some(mv("-78.1", Grain::TENTH, Unit::Dbm));
            r.rsrq = Some(mv("-11.6", Grain::TENTH, Unit::Db));
            r.snr = Some(mv("12", Grain::ONE, Unit::Db));
        }
        (Method::Web, _) => {
            c.rat = Some(Rat::from_label("5G"));
            c.pci = Some(2);
            c.band = band(258, true);
            r.rsrp = Some(mv("-80", Grain::ONE, Unit::Dbm));
            r.rsrq = Some(mv("-11", Grain::ONE, Unit::Db));
            r.sinr = Some(mv("12.0", Grain::TENTH, Unit::Db));
        }
        (Method::AtDebug, _) => {
            c.rat = Some(Rat::from_label("NR5G_SA"));
            c.mcc = Some("286".into());
            c.mnc = Some("01".into());
            c.nr_cell_id = Some(16400395);
            c.tac = Some(1000);
            c.band = band(258, true);
            c.arfcn = Some(2058427);
            r.bandwidth = Some(mv("200.0", Grain::TENTH, Unit::Mhz));
            r.rssi_declared = Some(3);
            r.rssi_branches = vec![
                Some(mv("-84.3", Grain::TENTH, Unit::Dbm)),
                Some(mv("-78.6", Grain::TENTH, Unit::Dbm)),
                None,
                None,
            ];
            r.rsrp = Some(mv("-79", Grain::ONE, Unit::Dbm));
            r.rsrq = Some(mv("-11", Grain::ONE, Unit::Db));
            r.sinr = Some(mv("14.0", Grain::TENTH, Unit::Db));
        }
        (Method::AtSgCellInfoEx, _) => {
            c.rat = Some(Rat::from_label("5G"));
            c.mcc = Some("286".into());
            c.mnc = Some("01".into());
            c.nr_cell_id = Some(16400398);
            c.tac = Some(1000);
            c.pci = Some(2);
            c.band = band(258, false);
            c.arfcn = Some(2058427);
            r.bandwidth = Some(mv("200", Grain::ONE, Unit::Mhz));
            r.scs = Some(mv("120", Grain::ONE, Unit::Khz));
            r.freq_range_type = Some(FreqRange::Fr2);
            r.rsrp = Some(mv("-80", Grain::ONE, Unit::Dbm));
            r.rsrq = Some(mv("-11", Grain::ONE, Unit::Db));
            r.sinr = Some(mv("14.5", Grain::HALF, Unit::Db));
            r.duplex = Some(Duplex::Tdd);
        }
        (Method::XcalL3, _) => {
            c.rat = Some(Rat::from_label("5GNR"));
            c.pci = Some(2);
            c.band = band(258, false);
            c.arfcn = Some(2058427);
            r.scs = Some(mv("120", Grain::ONE, Unit::Khz));
            r.rsrp = Some(mv("-78.02", Grain::HUNDREDTH, Unit::Dbm));
            r.rsrq = Some(mv("-11.17", Grain::HUNDREDTH, Unit::Db));
            r.sinr = Some(mv("14.21", Grain::HUNDREDTH, Unit::Db));
            r.duplex = Some(Duplex::Tdd);
        }
    }
    s
}

/// Copy one field's value from `from` into `to`.
pub fn copy_field(from: &KpiSnapshot, to: &mut KpiSnapshot, field: Field) {
    let (fc, tc) = (&from.cell, &mut to.cell);
    match field {
        Field::Rat => tc.rat = fc.rat.clone(),
        Field::Mcc => tc.mcc = fc.mcc.clone(),
        Field::Mnc => tc.mnc = fc.mnc.clone(),
        Field::NrCellId => tc.nr_cell_id = fc.nr_cell_id,
        Field::Tac => tc.tac = fc.tac,
        Field::Pci => tc.pci = fc.pci,
        Field::Band => tc.band = fc.band,
        Field::Arfcn => tc.arfcn = fc.arfcn,
        Field::FreqRangeType => to.radio.freq_range_type = from.radio.freq_range_type,
        Field::Duplex => to.radio.duplex = from.radio.duplex,
        Field::Rssi => {
            to.radio.rssi_declared = from.radio.rssi_declared;
            to.radio.rssi_branches = from.radio.rssi_branches.clone();
        }
        measured => to.set_value(measured, from.value(measured)),
    }
}

/// A golden snapshot of some column that carries `field`.
pub fn donor(field: Field) -> KpiSnapshot {
    COLUMNS
        .iter()
        .map(|(m, d)| expected(*m, d))
        .find(|s| s.has(field))
        .expect("every field appears in some column")
}

/// Render `snap` in its method's wire format and parse it back.
pub fn wire_roundtrip(snap: &KpiSnapshot) -> Result<KpiSnapshot, CollectError> {
    let device = snap.device.as_str();
    let back = match snap.method {
        Method::Web => {
            let layout = WebLayout::for_device(device).unwrap();
            web::parse_page(&layout.render_page(snap), &layout.selector_map(), device)?
        }
        Method::AtDebug => at::parse_reply(AtDialect::Debug, &at::render_reply(AtDialect::Debug, snap))?,
        Method::AtSgCellInfoEx => {
            at::parse_reply(AtDialect::SgCellInfoEx, &at::render_reply(AtDialect::SgCellInfoEx, snap))?
        }
        Method::XcalL3 => {
            let bytes = tm::encode_l3_response(&tm::render_l3_params(snap, &[])).encode();
            tm::decode_l3_response(&TmFrame::decode(&bytes)?)?.snapshot
        }
    };
    Ok(back.with_device(device))
}
