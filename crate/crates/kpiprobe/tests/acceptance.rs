//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use kpiprobe::export::{read_run, SERIES_DIR};
use kpiprobe_core::analysis::{estimate_grain, estimate_refresh_period, tracking_error};
use kpiprobe_core::at::{self, AtDialect};
use kpiprobe_core::sample::random_snapshot;
use kpiprobe_core::tm::{self, FrameDecoder, TmFrame};
use kpiprobe_core::web::{self, WebLayout};
use kpiprobe_core::{
    validate_snapshot, CollectError, CoverageMatrix, Field, Grain, KpiSeries, Method, ViolationKind, CPE_A, CPE_B,
};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use tempfile::TempDir;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn golden_fixtures() -> Outcome {
    let start = Instant::now();
    for (method, device) in COLUMNS {
        let got = parse_fixture(method, device).map_err(|e| format!("{method}@{device}: {e}"))?;
        let want = expected(method, device);
        ensure(got.cell == want.cell && got.radio == want.radio, || {
            format!("{method}@{device}: got {:?} want {:?}", got.radio, want.radio)
        })?;
    }
    let at = parse_fixture(Method::AtDebug, CPE_A).unwrap();
    let shown = |f: Field| at.value(f).map(|v| v.to_decimal_string()).unwrap_or_default();
    ensure(
        shown(Field::Rsrp) == "-79" && shown(Field::Rsrq) == "-11" && shown(Field::Sinr) == "14.0",
        || "AT^DEBUG headline values".into(),
    )?;
    let xcal = parse_fixture(Method::XcalL3, CPE_A).unwrap();
    let shown = |f: Field| xcal.value(f).map(|v| v.to_decimal_string()).unwrap_or_default();
    ensure(
        shown(Field::Rsrp) == "-78.02" && shown(Field::Rsrq) == "-11.17" && shown(Field::Sinr) == "14.21",
        || "XCAL headline values".into(),
    )?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("5 columns exact in {:.2?}", start.elapsed()))
}

fn coverage_conformance() -> Outcome {
    let start = Instant::now();
    let matrix = CoverageMatrix::reference();
    let mut counts = Vec::new();
    for (method, device) in COLUMNS {
        let report = validate_snapshot(&parse_fixture(method, device).unwrap(), &matrix).map_err(|e| e.to_string())?;
        ensure(report.is_ok(), || format!("{method}@{device} golden rejected: {:?}", report.violations))?;
        let golden = expected(method, device);
        let mut per_column = 0;
        for field in Field::ALL.into_iter().filter(|f| !matrix.covers(method, device, *f)) {
            let mut mutated = golden.clone();
            copy_field(&donor(field), &mut mutated, field);
            let report = validate_snapshot(&mutated, &matrix).map_err(|e| e.to_string())?;
            let caught = report.violations.len() == 1
                && report.violations[0].field == field
                && report.violations[0].kind == ViolationKind::NotCovered(method);
            ensure(caught, || format!("{method}@{device} + {field} not rejected"))?;
            per_column += 1;
        }
        counts.push(per_column.to_string());
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!("5 golden accepted, blank-cell mutations rejected per column: {}", counts.join("/")))
}

fn wire_roundtrips() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let matrix = CoverageMatrix::reference();
    let entries: Vec<_> = matrix.entries().map(|(m, d, _)| (m, d)).collect();
    for (method, device) in &entries {
        for i in 0..1000 {
            let snap = random_snapshot(&mut rng, *method, device);
            let back = wire_roundtrip(&snap).map_err(|e| format!("{method}@{device} #{i}: {e}"))?;
            ensure(back.cell == snap.cell && back.radio == snap.radio, || {
                format!("{method}@{device} #{i}: {snap:?} came back as {back:?}")
            })?;
        }
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("{} x 1000 snapshots, 0 failures", entries.len()))
}

fn tm_framing() -> Outcome {
    let start = Instant::now();
    let request = tm::encode_l3_request();
    ensure(request == [0x00, 0x00, 0x00, 0x02, 0x80, 0xA3], || format!("request bytes {request:02X?}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let frames: Vec<TmFrame> = (0..100)
        .map(|_| {
            let mut body = vec![0u8; (rng.next_u32() % 300) as usize];
            rng.fill_bytes(&mut body);
            TmFrame::new(rng.next_u32() as u16, body)
        })
        .collect();
    let stream: Vec<u8> = frames.iter().flat_map(TmFrame::encode).collect();
    let drain = |dec: &mut FrameDecoder, out: &mut Vec<TmFrame>| -> Result<(), String> {
        while let Some(f) = dec.next_frame().map_err(|e| e.to_string())? {
            out.push(f);
        }
        Ok(())
    };
    let mut whole = Vec::new();
    let mut dec = FrameDecoder::new();
    dec.feed(&stream);
    drain(&mut dec, &mut whole)?;
    let mut bytewise = Vec::new();
    let mut dec = FrameDecoder::new();
    for b in &stream {
        dec.feed(std::slice::from_ref(b));
        drain(&mut dec, &mut bytewise)?;
    }
    ensure(whole == frames && bytewise == whole, || "byte-at-a-time decoding differs".into())?;
    for f in &frames {
        ensure(TmFrame::decode(&f.encode()).as_ref() == Ok(f), || "single-frame decode differs".into())?;
    }
    within(start, Duration::from_secs(5))?;
    Ok(format!("request exact, 100 frames ({} bytes) identical", stream.len()))
}

fn pipeline(out: &Path, extra: &[&str]) -> Result<Vec<KpiSeries>, String> {
    let mut args = vec!["kpiprobe", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    args.push("all");
    let run = Command::new(env!("CARGO_BIN_EXE_kpiprobe"))
        .args(&args[1..])
        .env("KPIPROBE_LOG", "off")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(run.status.success(), || {
        format!("pipeline {extra:?} failed: {}", String::from_utf8_lossy(&run.stderr).trim())
    })?;
    let (series, _) = read_run(out).map_err(|e| e.to_string())?;
    Ok(series)
}

fn find<'a>(series: &'a [KpiSeries], method: Method, device: &str) -> Result<&'a KpiSeries, String> {
    series
        .iter()
        .find(|s| s.descriptor.method == method && s.descriptor.device == device)
        .ok_or_else(|| format!("no {method}@{device} series"))
}

fn at_method(device: &str) -> Method {
    if device == CPE_B {
        Method::AtSgCellInfoEx
    } else {
        Method::AtDebug
    }
}

fn refresh_rates(series: &[KpiSeries]) -> Outcome {
    let mut shown = Vec::new();
    for device in [CPE_A, CPE_B] {
        for (method, want, tol) in [(at_method(device), 0.25, 0.1), (Method::XcalL3, 1.0, 0.25)] {
            let s = find(series, method, device)?;
            let got = estimate_refresh_period(s, Field::Rsrp).map_err(|e| format!("{method}@{device}: {e}"))?;
            ensure((got - want).abs() <= tol, || format!("{method}@{device}: {got:.3} s, want {want} ± {tol}"))?;
            shown.push(format!("{method}@{device}={got:.3}s"));
        }
    }
    Ok(shown.join(" "))
}

fn resolutions(series: &[KpiSeries]) -> Outcome {
    let mut shown = Vec::new();
    for (method, device, want) in [
        (Method::AtDebug, CPE_A, Grain::ONE),
        (Method::XcalL3, CPE_A, Grain::HUNDREDTH),
        (Method::Web, CPE_A, Grain::TENTH),
        (Method::Web, CPE_B, Grain::ONE),
    ] {
        let est = estimate_grain(find(series, method, device)?, Field::Rsrp).map_err(|e| e.to_string())?;
        ensure(est.grain == want && !est.warning, || format!("{method}@{device}: {} want {want}", est.grain))?;
        shown.push(format!("{method}@{device}={}", est.grain));
    }
    Ok(shown.join(" "))
}

fn lag_ordering(tmp: &Path) -> Outcome {
    let mut failures: Vec<String> = Vec::new();
    let mut legs = [0usize; 4];
    let mut worst = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 1..=10u64 {
        let out = tmp.join(format!("seed-{seed}"));
        let series = pipeline(&out, &["--seed", &seed.to_string(), "--noise", "off"])?;
        let (_, record) = read_run(&out).map_err(|e| e.to_string())?;
        let truth = record.ok_or("run.toml missing")?.model();
        for device in [CPE_A, CPE_B] {
            let track = |m: Method| -> Result<(f64, f64), String> {
                let t = tracking_error(find(&series, m, device)?, &truth, Field::Rsrp).map_err(|e| e.to_string())?;
                Ok((t.lag, t.rmse))
            };
            let (web, at, xcal) = (track(Method::Web)?, track(at_method(device))?, track(Method::XcalL3)?);
            worst = (worst.0.min(web.0 - at.0.max(xcal.0)), worst.1.max(xcal.1 - at.1));
            let tag = format!("seed {seed} {device}");
            let checks = [
                (web.0 > at.0, format!("lag web {:.2} !> at {:.2}", web.0, at.0)),
                (web.0 > xcal.0, format!("lag web {:.2} !> xcal {:.2}", web.0, xcal.0)),
                (at.1 < web.1, format!("rmse at {:.3} !< web {:.3}", at.1, web.1)),
                (xcal.1 < at.1, format!("rmse xcal {:.3} !< at {:.3}", xcal.1, at.1)),
            ];
            for (i, (ok, what)) in checks.into_iter().enumerate() {
                if !ok {
                    legs[i] += 1;
                    failures.push(format!("{tag}: {what}"));
                }
            }
        }
    }
    let summary = format!(
        "failed seeds x devices per leg: lag web>at {}, lag web>xcal {}, rmse at<web {}, rmse xcal<at {}; min lag margin web-max(at,xcal) {:.2} s, max rmse(xcal)-rmse(at) {:.3}",
        legs[0], legs[1], legs[2], legs[3], worst.0, worst.1
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; first: {}", failures[0]))
    }
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for name in ["report.csv", "report.txt"] {
        files.push((name.to_string(), fs::read(dir.join(name)).unwrap_or_default()));
    }
    let mut series: Vec<_> = fs::read_dir(dir.join(SERIES_DIR)).map(|d| d.flatten().map(|e| e.path()).collect()).unwrap_or_default();
    series.sort();
    for p in series {
        files.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
    }
    files
}

fn determinism(first: &Path, tmp: &Path) -> Outcome {
    let second = tmp.join("seed-42-again");
    pipeline(&second, &["--seed", "42"])?;
    let (a, b) = (artifacts(first), artifacts(&second));
    ensure(a.len() >= 8, || format!("only {} artifacts", a.len()))?;
    ensure(a.iter().map(|f| &f.0).eq(b.iter().map(|f| &f.0)), || "file sets differ".into())?;
    for (x, y) in a.iter().zip(&b) {
        ensure(x.1 == y.1, || format!("{} differs", x.0))?;
    }
    Ok(format!("{} files byte-identical", a.len()))
}

fn structured(r: Result<impl Sized, CollectError>, what: &str) -> Result<(), String> {
    match r {
        Err(e) if e.detail.is_empty() => Err(format!("{what}: {} error without detail", e.kind)),
        _ => Ok(()),
    }
}

fn fuzz_one(bytes: &[u8]) -> Result<(), String> {
    let text = String::from_utf8_lossy(bytes);
    for device in [CPE_A, CPE_B] {
        let layout = WebLayout::for_device(device).unwrap();
        structured(web::parse_page(&text, &layout.selector_map(), device), "web")?;
    }
    for dialect in AtDialect::PROBE_ORDER {
        structured(at::parse_reply(dialect, &text), "at")?;
    }
    let mut dec = FrameDecoder::new();
    dec.feed(bytes);
    while let Some(frame) = dec.next_frame().map_err(|e| e.to_string()).unwrap_or(None) {
        structured(tm::decode_l3_response(&frame), "tm")?;
    }
    structured(tm::decode_l3_response(&TmFrame::new(tm::L3_REPORT, bytes.to_vec())), "tm")?;
    Ok(())
}

fn fuzz_parsers() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let seeds: Vec<Vec<u8>> = vec![
        WEB_CPE_A.as_bytes().to_vec(),
        WEB_CPE_B.as_bytes().to_vec(),
        AT_DEBUG.as_bytes().to_vec(),
        AT_SGCELLINFOEX.as_bytes().to_vec(),
        xcal_frame(),
    ];
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0;
    let mut first = None;
    for i in 0..10_000 {
        let bytes = if i % 2 == 0 {
            let mut b = vec![0u8; (rng.next_u32() % 1024) as usize];
            rng.fill_bytes(&mut b);
            b
        } else {
            let mut b = seeds[(rng.next_u32() as usize) % seeds.len()].clone();
            for _ in 0..1 + rng.next_u32() % 8 {
                let at = rng.next_u32() as usize % b.len();
                match rng.next_u32() % 3 {
                    0 => b[at] = rng.next_u32() as u8,
                    1 => b.truncate(at),
                    _ => b.insert(at, rng.next_u32() as u8),
                }
                if b.is_empty() {
                    break;
                }
            }
            b
        };
        match panic::catch_unwind(AssertUnwindSafe(|| fuzz_one(&bytes))) {
            Ok(Ok(())) => {}
            Ok(Err(e)) => {
                first.get_or_insert(format!("input {i}: {e}"));
                crashes += 1;
            }
            Err(_) => {
                first.get_or_insert(format!("input {i} panicked: {:02X?}", &bytes[..bytes.len().min(32)]));
                crashes += 1;
            }
        }
    }
    panic::set_hook(hook);
    ensure(crashes == 0, || format!("{crashes} bad outcomes; {}", first.unwrap_or_default()))?;
    within(start, Duration::from_secs(60))?;
    Ok(format!("10000 inputs, 0 crashes in {:.2?}", start.elapsed()))
}

fn main() {
    let tmp = TempDir::new().expect("temp dir");
    let base = tmp.path().join("seed-42");
    let started = Instant::now();
    let campaign = pipeline(&base, &["--seed", "42"]);
    let campaign_time = started.elapsed();
    let on_campaign = |f: fn(&[KpiSeries]) -> Outcome| -> Outcome {
        let series = campaign.as_ref().map_err(Clone::clone)?;
        f(series).map(|d| format!("{d} (30 s campaign in {campaign_time:.2?})"))
    };

    let results: Vec<(&str, Outcome)> = vec![
        ("golden fixtures", golden_fixtures()),
        ("coverage matrix conformance", coverage_conformance()),
        ("wire round-trips", wire_roundtrips()),
        ("TM framing", tm_framing()),
        ("refresh-rate reproduction", on_campaign(refresh_rates)),
        ("resolution reproduction", on_campaign(resolutions)),
        ("lag and rmse ordering, seeds 1-10", lag_ordering(tmp.path())),
        ("determinism, seed 42", determinism(&base, tmp.path())),
        ("parser robustness fuzz", fuzz_parsers()),
    ];

    println!();
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1)
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
