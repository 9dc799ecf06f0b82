//! Core of kpiprobe: the unified KPI model, wire codecs for the three
//! extraction methods (web dashboard, AT commands, test-manager socket),
//! the rotating-CPE scenario model and the comparison metrics.
//!
//! Everything here is `no_std` with `alloc`; IO lives in the `kpiprobe`
//! crate.

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod at;
pub mod coverage;
pub mod error;
pub mod html;
pub mod model;
pub mod parse;
pub mod sample;
pub mod scenario;
pub mod series;
pub mod tm;
pub mod value;
pub mod web;

pub use coverage::{validate_snapshot, CoverageMatrix, ValidationReport, Violation, ViolationKind, CPE_A, CPE_B};
pub use error::{CollectError, ErrorKind};
pub use model::{Field, KpiSnapshot, Method, Timestamp};
pub use scenario::{Interface, InterfaceProfile, ScenarioModel};
pub use series::{CollectorDescriptor, Endpoint, KpiSeries};
pub use value::{Grain, MeasurementValue, Unit};
