//! Collector contract and the three backends.

pub mod at;
pub mod web;
pub mod xcal;

use std::io;

use kpiprobe_core::{CollectError, CollectorDescriptor, ErrorKind, KpiSnapshot};

use crate::clock::Clock;

pub use at::{AtCollector, AtTransport};
pub use web::{WebCollector, WebSessionConfig};
pub use xcal::{XcalClient, XcalCollector};

/// One KPI source polled by the campaign scheduler.
pub trait Collector: Send {
    fn descriptor(&self) -> &CollectorDescriptor;

    /// One-off setup before the first poll, e.g. login or dialect detection.
    fn prepare(&mut self, _clock: &dyn Clock) -> Result<(), CollectError> {
        Ok(())
    }

    /// One request/response exchange; the snapshot is stamped on arrival.
    fn poll(&mut self, clock: &dyn Clock) -> Result<KpiSnapshot, CollectError>;
}

/// Map a socket error onto the collector error taxonomy.
pub fn io_error(context: &str, e: &io::Error) -> CollectError {
    let kind = match e.kind() {
        io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => ErrorKind::Timeout,
        _ => ErrorKind::TransportDown,
    };
    CollectError::new(kind, format!("{context}: {e}"))
}
