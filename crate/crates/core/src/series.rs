//! Collector descriptors and the append-only sample series.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{CollectError, ErrorKind};
use crate::model::{KpiSnapshot, Method};

/// Default request period for every collector.
pub const DEFAULT_REQUEST_PERIOD_S: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp { host: String, port: u16 },
    Pipe(String),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp { host, port } => write!(f, "{host}:{port}"),
            Endpoint::Pipe(path) => f.write_str(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectorDescriptor {
    pub method: Method,
    pub device: String,
    period_s: f64,
    pub endpoint: Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvalidPeriod(pub f64);

impl fmt::Display for InvalidPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "request period must be positive and finite, got {}", self.0)
    }
}

impl core::error::Error for InvalidPeriod {}

impl CollectorDescriptor {
    pub fn new(
        method: Method,
        device: impl Into<String>,
        period_s: f64,
        endpoint: Endpoint,
    ) -> Result<Self, InvalidPeriod> {
        if !(period_s.is_finite() && period_s > 0.0) {
            return Err(InvalidPeriod(period_s));
        }
        Ok(CollectorDescriptor {
            method,
            device: device.into(),
            period_s,
            endpoint,
        })
    }

    pub fn period_s(&self) -> f64 {
        self.period_s
    }

    /// Stable name used for output files, e.g. `cpe-a_AT_DEBUG`.
    pub fn name(&self) -> String {
        alloc::format!("{}_{}", self.device, self.method)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunMetadata {
    pub started_unix_ms: Option<i64>,
    pub stopped_unix_ms: Option<i64>,
    pub errors: Vec<CollectError>,
}

/// Samples of one collector run, strictly ordered by monotonic time.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiSeries {
    pub descriptor: CollectorDescriptor,
    samples: Vec<KpiSnapshot>,
    pub meta: RunMetadata,
}

impl KpiSeries {
    pub fn new(descriptor: CollectorDescriptor) -> Self {
        KpiSeries {
            descriptor,
            samples: Vec::new(),
            meta: RunMetadata::default(),
        }
    }

    pub fn samples(&self) -> &[KpiSnapshot] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Append a sample; its monotonic time must be after the last one.
    pub fn append(&mut self, snapshot: KpiSnapshot) -> Result<(), CollectError> {
        if let Some(last) = self.samples.last() {
            if snapshot.timestamp.mono <= last.timestamp.mono {
                return Err(CollectError::new(
                    ErrorKind::ProtocolViolation,
                    alloc::format!(
                        "out-of-order sample: {:?} is not after {:?}",
                        snapshot.timestamp.mono,
                        last.timestamp.mono
                    ),
                )
                .at(snapshot.timestamp));
            }
        }
        self.samples.push(snapshot);
        Ok(())
    }

    pub fn appended(mut self, snapshot: KpiSnapshot) -> Result<Self, CollectError> {
        self.append(snapshot)?;
        Ok(self)
    }

    pub fn log_error(&mut self, error: CollectError) {
        self.meta.errors.push(error);
    }
}
