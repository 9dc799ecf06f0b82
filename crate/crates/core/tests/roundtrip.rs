mod common;

use common::*;
use kpiprobe_core::sample::random_snapshot;
use kpiprobe_core::tm::{self, FrameDecoder, TmFrame};
use kpiprobe_core::{CoverageMatrix, KpiSnapshot};
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

fn check(snap: &KpiSnapshot) -> Result<(), TestCaseError> {
    let back = wire_roundtrip(snap).map_err(|e| TestCaseError::fail(format!("{e}")))?;
    prop_assert_eq!(&back.cell, &snap.cell);
    prop_assert_eq!(&back.radio, &snap.radio);
    Ok(())
}

proptest! {
    #[test]
    fn every_column_roundtrips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (method, device, _) in CoverageMatrix::reference().entries() {
            check(&random_snapshot(&mut rng, method, device))?;
        }
    }

    #[test]
    fn frames_roundtrip(command in any::<u16>(), body in proptest::collection::vec(any::<u8>(), 0..512)) {
        let frame = TmFrame::new(command, body);
        prop_assert_eq!(TmFrame::decode(&frame.encode()).unwrap(), frame);
    }

    #[test]
    fn byte_at_a_time_matches_whole_buffer(
        frames in proptest::collection::vec((any::<u16>(), proptest::collection::vec(any::<u8>(), 0..64)), 1..8),
    ) {
        let frames: Vec<_> = frames.into_iter().map(|(c, b)| TmFrame::new(c, b)).collect();
        let stream: Vec<u8> = frames.iter().flat_map(TmFrame::encode).collect();
        let mut dec = FrameDecoder::new();
        let mut got = Vec::new();
        for b in &stream {
            dec.feed(std::slice::from_ref(b));
            while let Some(f) = dec.next_frame().unwrap() {
                got.push(f);
            }
        }
        prop_assert_eq!(got, frames);
        prop_assert_eq!(dec.buffered(), 0);
    }
}

#[test]
fn table_fixtures_roundtrip() {
    for (method, device) in COLUMNS {
        let golden = expected(method, device);
        let back = wire_roundtrip(&golden).unwrap();
        assert_eq!(back.cell, golden.cell, "{method}@{device}");
        assert_eq!(back.radio, golden.radio, "{method}@{device}");
    }
}

#[test]
fn l3_request_bytes() {
    assert_eq!(tm::encode_l3_request(), [0x00, 0x00, 0x00, 0x02, 0x80, 0xA3]);
}
