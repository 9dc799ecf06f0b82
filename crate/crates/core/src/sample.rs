//! Random schema-valid snapshots, for round-trip and load testing.

use alloc::string::String;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::coverage::{CoverageMatrix, PCI_MAX, RSRP_RANGE, RSRQ_RANGE, SINR_RANGE};
use crate::model::{Band, Duplex, Field, FreqRange, KpiSnapshot, Method, Rat};
use crate::scenario::{Interface, InterfaceProfile};
use crate::value::{Grain, MeasurementValue};

const RAT_LABELS: [&str; 7] = ["5G", "NR5G_SA", "5GNR", "NR5G_NSA", "LTE", "NR", "5G_SA"];
const SCS_KHZ: [f64; 5] = [15.0, 30.0, 60.0, 120.0, 240.0];

/// Grain at which (method, device) reports `field`.
pub fn reporting_grain(method: Method, device: &str, field: Field) -> Option<Grain> {
    let interface = match method {
        Method::Web => Interface::Web,
        Method::AtDebug | Method::AtSgCellInfoEx => Interface::At,
        Method::XcalL3 => Interface::Tm,
    };
    let device = match method {
        Method::AtDebug => crate::CPE_A,
        Method::AtSgCellInfoEx => crate::CPE_B,
        _ => device,
    };
    InterfaceProfile::reference(interface, device)?.grains.get(&field).copied()
}

fn below(rng: &mut impl RngCore, n: u64) -> u64 {
    rng.next_u64() % n
}

fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * (hi - lo)
}

fn digits(rng: &mut impl RngCore, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + below(rng, 10) as u8)).collect()
}

fn measure(rng: &mut impl RngCore, field: Field, grain: Grain) -> MeasurementValue {
    let (lo, hi) = match field {
        Field::Rsrp => RSRP_RANGE,
        Field::Rsrq => RSRQ_RANGE,
        Field::Sinr | Field::Snr | Field::Rssi => SINR_RANGE,
        Field::Bandwidth => (5.0, 400.0),
        _ => (0.0, 1.0),
    };
    let (lo, hi) = if field == Field::Rssi { (-120.0, -25.0) } else { (lo, hi) };
    let g = grain.as_f64();
    // Stay a grain inside the bounds so rounding never leaves the range.
    let v = uniform(rng, lo + g, hi - g);
    MeasurementValue::quantize(v, grain, field.unit()).expect("finite value on a valid grain")
}

/// A snapshot populating every field (method, device) covers, with values
/// drawn at that method's reporting grain.
pub fn random_snapshot(rng: &mut impl RngCore, method: Method, device: &str) -> KpiSnapshot {
    let mut snap = KpiSnapshot::new(method, device);
    let coverage = CoverageMatrix::reference().get(method, device).cloned().unwrap_or_default();
    for field in coverage {
        let c = &mut snap.cell;
        match field {
            Field::Rat => c.rat = Some(Rat::from_label(RAT_LABELS[below(rng, RAT_LABELS.len() as u64) as usize])),
            Field::Mcc => c.mcc = Some(digits(rng, 3)),
            Field::Mnc => {
                let len = 2 + below(rng, 2) as usize;
                c.mnc = Some(digits(rng, len))
            }
            Field::NrCellId => c.nr_cell_id = Some(below(rng, 1 << 36)),
            Field::Tac => c.tac = Some(below(rng, 1 << 24) as u32),
            Field::Pci => c.pci = Some(below(rng, PCI_MAX as u64 + 1) as u16),
            Field::Band => {
                c.band = Some(Band {
                    number: 1 + below(rng, Band::MAX as u64) as u16,
                    n_prefix: below(rng, 2) == 0,
                })
            }
            Field::Arfcn => c.arfcn = Some(below(rng, 3_279_166) as u32),
            Field::FreqRangeType => {
                snap.radio.freq_range_type = Some(if below(rng, 2) == 0 { FreqRange::Fr1 } else { FreqRange::Fr2 })
            }
            Field::Duplex => snap.radio.duplex = Some(if below(rng, 2) == 0 { Duplex::Tdd } else { Duplex::Fdd }),
            Field::Scs => {
                let grain = reporting_grain(method, device, field).unwrap_or(Grain::ONE);
                let khz = SCS_KHZ[below(rng, SCS_KHZ.len() as u64) as usize];
                snap.radio.scs = Some(MeasurementValue::quantize(khz, grain, field.unit()).expect("scs on grain"));
            }
            Field::Rssi => {
                let grain = reporting_grain(method, device, field).unwrap_or(Grain::TENTH);
                let mut slots: Vec<Option<MeasurementValue>> = Vec::new();
                for _ in 0..4 {
                    let filled = below(rng, 3) != 0;
                    slots.push(filled.then(|| measure(rng, Field::Rssi, grain)));
                }
                if slots.iter().all(Option::is_none) {
                    slots.clear();
                }
                snap.radio.rssi_declared = Some(below(rng, 5) as u8);
                snap.radio.rssi_branches = slots;
            }
            measured => {
                let grain = reporting_grain(method, device, measured).unwrap_or(Grain::HUNDREDTH);
                snap.set_value(measured, Some(measure(rng, measured, grain)));
            }
        }
    }
    snap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::validate_snapshot;
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;

    #[test]
    fn random_snapshots_validate() {
        let matrix = CoverageMatrix::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (method, device, fields) in matrix.entries() {
            for _ in 0..200 {
                let snap = random_snapshot(&mut rng, method, device);
                let report = validate_snapshot(&snap, &matrix).unwrap();
                assert!(report.violations.is_empty(), "{:?}", report.violations);
                assert_eq!(snap.populated_fields().len(), fields.len());
            }
        }
    }
}
