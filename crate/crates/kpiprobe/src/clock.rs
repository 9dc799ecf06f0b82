//! Time sources. The real clock sleeps; the simulated clock jumps, so a
//! 30 s campaign runs in well under a second and is fully deterministic.

use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use kpiprobe_core::Timestamp;

/// Wall-clock origin of simulated runs: 2024-01-01T00:00:00Z.
pub const SIM_EPOCH_UNIX_MS: i64 = 1_704_067_200_000;

pub trait Clock: Send + Sync {
    /// Time since the scenario origin.
    fn now(&self) -> Duration;
    /// Wall-clock time corresponding to `mono`.
    fn unix_ms_at(&self, mono: Duration) -> i64;
    /// Block (or jump) until `mono`; returns at once if already past it.
    fn sleep_until(&self, mono: Duration);
    /// Spend `d` doing work, e.g. a device's response latency.
    fn delay(&self, d: Duration);
    fn is_simulated(&self) -> bool;

    /// Move to `mono`. A simulated clock may go backwards; a real one can
    /// only wait.
    fn jump_to(&self, mono: Duration) {
        self.sleep_until(mono);
    }

    fn stamp(&self) -> Timestamp {
        let mono = self.now();
        Timestamp::new(mono, self.unix_ms_at(mono))
    }

    fn now_secs(&self) -> f64 {
        self.now().as_secs_f64()
    }
}

#[derive(Debug)]
pub struct RealClock {
    origin: Instant,
    origin_unix_ms: i64,
}

impl RealClock {
    pub fn new() -> Self {
        let unix = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        RealClock {
            origin: Instant::now(),
            origin_unix_ms: unix.as_millis() as i64,
        }
    }
}

impl Default for RealClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for RealClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn unix_ms_at(&self, mono: Duration) -> i64 {
        self.origin_unix_ms + mono.as_millis() as i64
    }

    fn sleep_until(&self, mono: Duration) {
        let now = self.now();
        if mono > now {
            std::thread::sleep(mono - now);
        }
    }

    fn delay(&self, d: Duration) {
        std::thread::sleep(d);
    }

    fn is_simulated(&self) -> bool {
        false
    }
}

/// Virtual time shared by the campaign driver and the emulator. The driver
/// sets the time of each request; the emulator's latency advances it.
#[derive(Debug)]
pub struct SimClock {
    now: Mutex<Duration>,
    epoch_unix_ms: i64,
}

impl SimClock {
    pub fn new() -> Self {
        Self::with_epoch(SIM_EPOCH_UNIX_MS)
    }

    pub fn with_epoch(epoch_unix_ms: i64) -> Self {
        SimClock {
            now: Mutex::new(Duration::ZERO),
            epoch_unix_ms,
        }
    }

    /// Jump to `mono`, forwards or backwards.
    pub fn set(&self, mono: Duration) {
        *self.now.lock().unwrap() = mono;
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SimClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn unix_ms_at(&self, mono: Duration) -> i64 {
        self.epoch_unix_ms + mono.as_millis() as i64
    }

    fn sleep_until(&self, mono: Duration) {
        let mut now = self.now.lock().unwrap();
        if mono > *now {
            *now = mono;
        }
    }

    fn delay(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }

    fn jump_to(&self, mono: Duration) {
        self.set(mono);
    }

    fn is_simulated(&self) -> bool {
        true
    }
}
