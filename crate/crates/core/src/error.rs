use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::model::Timestamp;

/// Failure classes shared by every collector backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    TransportDown,
    Timeout,
    AuthFailed,
    ParseFailed,
    DialectUnsupported,
    ProtocolViolation,
}

impl ErrorKind {
    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::TransportDown => "TRANSPORT_DOWN",
            ErrorKind::Timeout => "TIMEOUT",
            ErrorKind::AuthFailed => "AUTH_FAILED",
            ErrorKind::ParseFailed => "PARSE_FAILED",
            ErrorKind::DialectUnsupported => "DIALECT_UNSUPPORTED",
            ErrorKind::ProtocolViolation => "PROTOCOL_VIOLATION",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A collection failure. Carries the payload that triggered it whenever one
/// exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectError {
    pub kind: ErrorKind,
    pub detail: String,
    pub at: Option<Timestamp>,
    pub raw: Option<Vec<u8>>,
}

impl CollectError {
    pub fn new(kind: ErrorKind, detail: impl Into<String>) -> Self {
        CollectError {
            kind,
            detail: detail.into(),
            at: None,
            raw: None,
        }
    }

    pub fn parse(detail: impl Into<String>) -> Self {
        Self::new(ErrorKind::ParseFailed, detail)
    }

    pub fn protocol(detail: impl Into<String>) -> Self {
        Self::new(ErrorKind::ProtocolViolation, detail)
    }

    pub fn with_raw(mut self, raw: impl Into<Vec<u8>>) -> Self {
        self.raw = Some(raw.into());
        self
    }

    /// Attach `raw` unless a more specific payload is already attached.
    pub fn or_raw(mut self, raw: &[u8]) -> Self {
        if self.raw.is_none() {
            self.raw = Some(raw.into());
        }
        self
    }

    pub fn at(mut self, at: Timestamp) -> Self {
        self.at = Some(at);
        self
    }
}

impl fmt::Display for CollectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.detail)
    }
}

impl core::error::Error for CollectError {}
