//! Fixed-rate polling campaigns and the series recorder.
//!
//! Requests go out at `k * period` for every `k * period < duration`. A tick
//! that falls while the previous poll is still in flight (by more than a
//! tenth of a period) is skipped and logged as a TIMEOUT note.

use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use kpiprobe_core::{validate_snapshot, CollectError, CoverageMatrix, ErrorKind, KpiSeries, KpiSnapshot};
use log::{debug, info, warn};

use crate::clock::Clock;
use crate::collect::Collector;

const TICK_EPSILON: f64 = 1e-9;
/// Lateness tolerated before a tick counts as overlapped, in periods.
const GRACE: f64 = 0.1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CampaignError {
    #[error("campaign duration must be positive and finite, got {0}")]
    Duration(f64),
    #[error("campaign has no collectors")]
    Empty,
}

/// Append-only sink shared by all collector tasks. Every sample is checked
/// against the coverage matrix before it is appended.
pub struct Recorder {
    matrix: CoverageMatrix,
    series: Mutex<Vec<KpiSeries>>,
}

impl Recorder {
    pub fn new(matrix: CoverageMatrix) -> Self {
        Recorder { matrix, series: Mutex::new(Vec::new()) }
    }

    /// Open a series and return its slot.
    pub fn open(&self, series: KpiSeries) -> usize {
        let mut all = self.series.lock().unwrap();
        all.push(series);
        all.len() - 1
    }

    pub fn record(&self, slot: usize, snapshot: KpiSnapshot) -> Result<(), CollectError> {
        let checked = match validate_snapshot(&snapshot, &self.matrix) {
            Ok(report) if report.is_ok() => {
                for w in &report.warnings {
                    debug!("{} {}: {w}", snapshot.device, snapshot.method);
                }
                Ok(())
            }
            Ok(report) => {
                let detail: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
                Err(CollectError::protocol(format!("invalid sample: {}", detail.join("; "))))
            }
            Err(e) => Err(CollectError::protocol(e.to_string())),
        };
        let mut all = self.series.lock().unwrap();
        let series = &mut all[slot];
        let result = checked.and_then(|_| series.append(snapshot.clone()));
        if let Err(e) = &result {
            series.log_error(e.clone().at(snapshot.timestamp).or_raw(&snapshot.raw));
        }
        result
    }

    pub fn log_error(&self, slot: usize, error: CollectError) {
        self.series.lock().unwrap()[slot].log_error(error);
    }

    fn with<R>(&self, slot: usize, f: impl FnOnce(&mut KpiSeries) -> R) -> R {
        f(&mut self.series.lock().unwrap()[slot])
    }

    pub fn into_series(self) -> Vec<KpiSeries> {
        self.series.into_inner().unwrap()
    }
}

/// Tick bookkeeping of one collector.
#[derive(Debug, Clone)]
struct Schedule {
    period: f64,
    ticks: u64,
    next: u64,
}

impl Schedule {
    fn new(period: f64, duration: f64) -> Self {
        let ticks = ((duration - TICK_EPSILON) / period).floor() as u64 + 1;
        Schedule { period, ticks, next: 0 }
    }

    fn at(&self, k: u64) -> f64 {
        k as f64 * self.period
    }

    /// Next tick not earlier than `busy_until`, plus the ticks skipped
    /// getting there.
    fn advance(&mut self, busy_until: f64) -> (Vec<u64>, Option<u64>) {
        let mut skipped = Vec::new();
        while self.next < self.ticks && self.at(self.next) + GRACE * self.period + TICK_EPSILON < busy_until {
            skipped.push(self.next);
            self.next += 1;
        }
        if self.next >= self.ticks {
            return (skipped, None);
        }
        let k = self.next;
        self.next += 1;
        (skipped, Some(k))
    }
}

fn skip_note(clock: &dyn Clock, k: u64, t: f64) -> CollectError {
    let mono = Duration::from_secs_f64(t);
    CollectError::new(ErrorKind::Timeout, format!("tick {k} at {t:.3} s skipped: previous poll still in flight"))
        .at(kpiprobe_core::Timestamp::new(mono, clock.unix_ms_at(mono)))
}

fn poll_once(collector: &mut dyn Collector, clock: &dyn Clock, recorder: &Recorder, slot: usize) {
    match collector.poll(clock) {
        Ok(snap) => {
            let _ = recorder.record(slot, snap);
        }
        Err(e) => {
            let e = if e.at.is_none() { e.at(clock.stamp()) } else { e };
            debug!("{}: {e}", collector.descriptor().name());
            recorder.log_error(slot, e);
        }
    }
}

fn prepare(collector: &mut dyn Collector, clock: &dyn Clock, recorder: &Recorder, slot: usize) {
    if let Err(e) = collector.prepare(clock) {
        warn!("{}: {e}", collector.descriptor().name());
        recorder.log_error(slot, e.at(clock.stamp()));
    }
}

/// Poll every collector at its own period for `duration_s` seconds and
/// return one series per collector, in input order. Per-poll failures are
/// logged in the series and never abort the campaign.
pub fn run_campaign(
    collectors: Vec<Box<dyn Collector>>,
    clock: Arc<dyn Clock>,
    duration_s: f64,
) -> Result<Vec<KpiSeries>, CampaignError> {
    run_campaign_with(collectors, clock, duration_s, CoverageMatrix::reference())
}

/// Like [`run_campaign`], validating samples against `matrix`.
pub fn run_campaign_with(
    collectors: Vec<Box<dyn Collector>>,
    clock: Arc<dyn Clock>,
    duration_s: f64,
    matrix: CoverageMatrix,
) -> Result<Vec<KpiSeries>, CampaignError> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(CampaignError::Duration(duration_s));
    }
    if collectors.is_empty() {
        return Err(CampaignError::Empty);
    }
    let recorder = Recorder::new(matrix);
    let slots: Vec<usize> = collectors
        .iter()
        .map(|c| recorder.open(KpiSeries::new(c.descriptor().clone())))
        .collect();
    let started = clock.unix_ms_at(clock.now());
    info!("campaign: {} collectors for {duration_s} s ({} clock)", collectors.len(), if clock.is_simulated() { "simulated" } else { "real" });

    let collectors = if clock.is_simulated() {
        run_simulated(collectors, &*clock, &recorder, &slots, duration_s)
    } else {
        run_threaded(collectors, clock.clone(), &recorder, &slots, duration_s)
    };

    let stopped = clock.unix_ms_at(clock.now());
    for (c, &slot) in collectors.iter().zip(&slots) {
        recorder.with(slot, |s| {
            s.descriptor = c.descriptor().clone();
            s.meta.started_unix_ms = Some(started);
            s.meta.stopped_unix_ms = Some(stopped);
            info!("{}: {} samples, {} errors", s.descriptor.name(), s.len(), s.meta.errors.len());
        });
    }
    Ok(recorder.into_series())
}

/// Single-threaded event loop over virtual time: each tick sets the clock,
/// the exchange's latency advances it, and the arrival time marks the
/// collector busy until then.
fn run_simulated(
    mut collectors: Vec<Box<dyn Collector>>,
    clock: &dyn Clock,
    recorder: &Recorder,
    slots: &[usize],
    duration_s: f64,
) -> Vec<Box<dyn Collector>> {
    let mut schedules: Vec<Schedule> = collectors
        .iter()
        .map(|c| Schedule::new(c.descriptor().period_s(), duration_s))
        .collect();
    let mut busy = vec![0.0f64; collectors.len()];
    for (i, c) in collectors.iter_mut().enumerate() {
        clock.jump_to(Duration::ZERO);
        prepare(c.as_mut(), clock, recorder, slots[i]);
    }
    let mut pending: Vec<Option<u64>> = Vec::with_capacity(collectors.len());
    for (i, s) in schedules.iter_mut().enumerate() {
        let (skipped, next) = s.advance(busy[i]);
        for k in skipped {
            recorder.log_error(slots[i], skip_note(clock, k, s.at(k)));
        }
        pending.push(next);
    }
    loop {
        let due = pending
            .iter()
            .enumerate()
            .filter_map(|(i, k)| k.map(|k| (schedules[i].at(k), i)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((t, i)) = due else { break };
        clock.jump_to(Duration::from_secs_f64(t.max(busy[i])));
        poll_once(collectors[i].as_mut(), clock, recorder, slots[i]);
        busy[i] = clock.now_secs();
        let (skipped, next) = schedules[i].advance(busy[i]);
        for k in skipped {
            recorder.log_error(slots[i], skip_note(clock, k, schedules[i].at(k)));
        }
        pending[i] = next;
    }
    collectors
}

/// One thread per collector, each sleeping until its next tick.
fn run_threaded(
    collectors: Vec<Box<dyn Collector>>,
    clock: Arc<dyn Clock>,
    recorder: &Recorder,
    slots: &[usize],
    duration_s: f64,
) -> Vec<Box<dyn Collector>> {
    thread::scope(|scope| {
        let handles: Vec<_> = collectors
            .into_iter()
            .zip(slots)
            .map(|(mut c, &slot)| {
                let clock = clock.clone();
                scope.spawn(move || {
                    let clock = &*clock;
                    prepare(c.as_mut(), clock, recorder, slot);
                    let mut schedule = Schedule::new(c.descriptor().period_s(), duration_s);
                    loop {
                        let (skipped, next) = schedule.advance(clock.now_secs());
                        for k in skipped {
                            recorder.log_error(slot, skip_note(clock, k, schedule.at(k)));
                        }
                        let Some(k) = next else { break };
                        clock.sleep_until(Duration::from_secs_f64(schedule.at(k)));
                        poll_once(c.as_mut(), clock, recorder, slot);
                    }
                    c
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("collector task panicked")).collect()
    })
}
