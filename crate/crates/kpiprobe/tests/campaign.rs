mod support;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use kpiprobe::campaign::{run_campaign, CampaignError, Recorder};
use kpiprobe::clock::{Clock, RealClock, SimClock};
use kpiprobe::collect::{AtCollector, AtTransport, Collector, WebCollector, WebSessionConfig, XcalClient, XcalCollector};
use kpiprobe_core::{
    CollectError, CollectorDescriptor, CoverageMatrix, Endpoint, ErrorKind, KpiSeries, KpiSnapshot, Method, CPE_A,
};
use support::*;

fn healthy(b: &Bench, period: f64) -> Vec<Box<dyn Collector>> {
    let host = "127.0.0.1";
    vec![
        Box::new(WebCollector::new(WebSessionConfig::new(&format!("http://{}", b.running.web), CPE_A), None, period).unwrap()),
        Box::new(AtCollector::new(AtTransport::new(host, b.running.at.port()), CPE_A, None, period).unwrap()),
        Box::new(XcalCollector::new(XcalClient::new(host, b.running.tm.port()), CPE_A, period).unwrap()),
    ]
}

#[test]
fn thirty_seconds_at_quarter_second() {
    let b = bench(CPE_A);
    let series = run_campaign(healthy(&b, 0.25), b.clock.clone(), 30.0).unwrap();
    assert_eq!(series.len(), 3);
    for s in &series {
        assert!((119..=121).contains(&s.len()), "{}: {}", s.descriptor.name(), s.len());
        assert!(s.meta.errors.is_empty(), "{:?}", s.meta.errors);
        let mono: Vec<_> = s.samples().iter().map(|x| x.timestamp.mono).collect();
        assert!(mono.windows(2).all(|w| w[0] < w[1]));
        assert!(s.meta.started_unix_ms.is_some() && s.meta.stopped_unix_ms.is_some());
    }
    assert_eq!(series[1].descriptor.method, Method::AtDebug);
}

#[test]
fn closed_endpoint_gives_empty_series_with_errors() {
    let clock = Arc::new(SimClock::new());
    let c = XcalCollector::new(XcalClient::new("127.0.0.1", closed_port()), CPE_A, 0.25).unwrap();
    let series = run_campaign(vec![Box::new(c)], clock, 2.0).unwrap();
    assert!(series[0].is_empty());
    assert!(series[0].meta.errors.iter().any(|e| e.kind == ErrorKind::TransportDown));
}

#[test]
fn one_period_gives_one_sample() {
    let b = bench(CPE_A);
    let series = run_campaign(healthy(&b, 0.25), b.clock.clone(), 0.25).unwrap();
    assert!(series.iter().all(|s| s.len() == 1));
}

#[test]
fn bad_arguments() {
    let clock: Arc<dyn Clock> = Arc::new(SimClock::new());
    assert_eq!(run_campaign(Vec::new(), clock.clone(), 1.0).unwrap_err(), CampaignError::Empty);
    let b = bench(CPE_A);
    for d in [0.0, -1.0, f64::NAN] {
        assert!(matches!(run_campaign(healthy(&b, 0.25), clock.clone(), d), Err(CampaignError::Duration(_))));
    }
}

/// Answers instantly with a fixed valid snapshot and records request times.
struct Fake {
    descriptor: CollectorDescriptor,
    calls: Arc<Mutex<Vec<f64>>>,
    fail: Option<ErrorKind>,
    work: Duration,
}

impl Fake {
    fn new(period: f64) -> Self {
        Fake {
            descriptor: CollectorDescriptor::new(Method::XcalL3, CPE_A, period, Endpoint::Pipe("fake".into())).unwrap(),
            calls: Arc::default(),
            fail: None,
            work: Duration::ZERO,
        }
    }
}

impl Collector for Fake {
    fn descriptor(&self) -> &CollectorDescriptor {
        &self.descriptor
    }

    fn poll(&mut self, clock: &dyn Clock) -> Result<KpiSnapshot, CollectError> {
        self.calls.lock().unwrap().push(clock.now_secs());
        clock.delay(self.work);
        if let Some(kind) = self.fail {
            return Err(CollectError::new(kind, "injected").with_raw(b"garbage".to_vec()));
        }
        let mut s = KpiSnapshot::new(Method::XcalL3, CPE_A);
        s.cell.pci = Some(2);
        Ok(s.with_timestamp(clock.stamp()))
    }
}

#[test]
fn real_clock_intervals_stay_within_ten_percent() {
    let fake = Fake::new(0.1);
    let calls = fake.calls.clone();
    let series = run_campaign(vec![Box::new(fake)], Arc::new(RealClock::new()), 2.0).unwrap();
    assert_eq!(series[0].len(), 20);
    let t = calls.lock().unwrap().clone();
    for w in t.windows(2) {
        let gap = w[1] - w[0];
        assert!((gap - 0.1).abs() <= 0.01, "interval {gap}");
    }
}

#[test]
fn parse_failures_stay_isolated() {
    let run = |inject: bool| {
        let b = bench(CPE_A);
        let mut collectors = healthy(&b, 0.25);
        if inject {
            let mut bad = Fake::new(0.25);
            bad.fail = Some(ErrorKind::ParseFailed);
            collectors.push(Box::new(bad));
        }
        run_campaign(collectors, b.clock.clone(), 10.0).unwrap()
    };
    let clean = run(false);
    let dirty = run(true);
    for (a, b) in clean.iter().zip(&dirty) {
        assert!(a.len().abs_diff(b.len()) <= 1);
    }
    let bad = &dirty[3];
    assert!(bad.is_empty());
    assert_eq!(bad.meta.errors.len(), 40);
    assert!(bad.meta.errors.iter().all(|e| e.kind == ErrorKind::ParseFailed && e.raw.is_some() && e.at.is_some()));
}

#[test]
fn slow_poll_skips_ticks_with_timeout_notes() {
    let mut fake = Fake::new(0.25);
    fake.work = Duration::from_millis(600);
    let calls = fake.calls.clone();
    let series = run_campaign(vec![Box::new(fake)], Arc::new(SimClock::new()), 3.0).unwrap();
    // Requests at 0, 0.75, 1.5, 2.25; two ticks skipped after each.
    assert_eq!(*calls.lock().unwrap(), vec![0.0, 0.75, 1.5, 2.25]);
    assert_eq!(series[0].len(), 4);
    let notes = &series[0].meta.errors;
    assert_eq!(notes.len(), 8);
    assert!(notes.iter().all(|e| e.kind == ErrorKind::Timeout && e.detail.contains("skipped")));
}

#[test]
fn recorder_rejects_invalid_and_out_of_order_samples() {
    let rec = Recorder::new(CoverageMatrix::reference());
    let desc = CollectorDescriptor::new(Method::XcalL3, CPE_A, 0.25, Endpoint::Pipe("x".into())).unwrap();
    let slot = rec.open(KpiSeries::new(desc));
    let at = |ms| kpiprobe_core::Timestamp::new(Duration::from_millis(ms), ms as i64);
    let mut good = KpiSnapshot::new(Method::XcalL3, CPE_A);
    good.cell.pci = Some(2);
    rec.record(slot, good.clone().with_timestamp(at(5000))).unwrap();
    let err = rec.record(slot, good.clone().with_timestamp(at(4000))).unwrap_err();
    assert_eq!(err.kind, ErrorKind::ProtocolViolation);
    let mut bad = good.with_timestamp(at(6000));
    bad.cell.tac = Some(1000);
    assert_eq!(rec.record(slot, bad).unwrap_err().kind, ErrorKind::ProtocolViolation);
    let series = rec.into_series();
    assert_eq!(series[0].len(), 1);
    assert_eq!(series[0].meta.errors.len(), 2);
}

#[test]
fn concurrent_appends_from_distinct_tasks() {
    let mut m = CoverageMatrix::reference();
    for i in 0..4 {
        m.insert(Method::XcalL3, &format!("cpe-{i}"), [kpiprobe_core::Field::Pci]);
    }
    let rec = Recorder::new(m);
    let slots: Vec<usize> = (0..4)
        .map(|i| {
            let d = CollectorDescriptor::new(Method::XcalL3, format!("cpe-{i}"), 0.25, Endpoint::Pipe("x".into())).unwrap();
            rec.open(KpiSeries::new(d))
        })
        .collect();
    std::thread::scope(|s| {
        for (i, &slot) in slots.iter().enumerate() {
            let rec = &rec;
            s.spawn(move || {
                for k in 1..=250u64 {
                    let mut snap = KpiSnapshot::new(Method::XcalL3, format!("cpe-{i}"));
                    snap.cell.pci = Some(2);
                    let ts = kpiprobe_core::Timestamp::new(Duration::from_millis(k), k as i64);
                    rec.record(slot, snap.with_timestamp(ts)).unwrap();
                }
            });
        }
    });
    assert!(rec.into_series().iter().all(|s| s.len() == 250));
}
