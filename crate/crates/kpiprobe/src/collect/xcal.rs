//! Test-manager client: frame the L3 report request and read one
//! length-prefixed response.

use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::{Mutex, TryLockError};
use std::time::{Duration, Instant};

use kpiprobe_core::tm::{self, FrameDecoder, L3Report, TmFrame};
use kpiprobe_core::{CollectError, CollectorDescriptor, Endpoint, ErrorKind, KpiSnapshot, Method};

use super::{io_error, Collector};
use crate::clock::Clock;

/// One connection to a TM endpoint. Polls are exclusive: a second poll
/// while one is in flight is rejected without touching the socket.
pub struct XcalClient {
    host: String,
    port: u16,
    pub timeout: Duration,
    conn: Mutex<Option<TcpStream>>,
}

impl XcalClient {
    pub fn new(host: &str, port: u16) -> Self {
        XcalClient {
            host: host.to_owned(),
            port,
            timeout: Duration::from_secs_f64(tm::DEFAULT_TIMEOUT_S),
            conn: Mutex::new(None),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn target(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }

    fn connect(&self) -> Result<TcpStream, CollectError> {
        let target = self.target();
        let addr = (self.host.as_str(), self.port)
            .to_socket_addrs()
            .map_err(|e| io_error(&target, &e))?
            .next()
            .ok_or_else(|| CollectError::new(ErrorKind::TransportDown, format!("{target}: no address")))?;
        let stream = TcpStream::connect_timeout(&addr, self.timeout).map_err(|e| io_error(&target, &e))?;
        stream.set_nodelay(true).map_err(|e| io_error(&target, &e))?;
        Ok(stream)
    }

    /// Request one L3 report.
    pub fn poll_l3(&self) -> Result<L3Report, CollectError> {
        let mut guard = match self.conn.try_lock() {
            Ok(g) => g,
            Err(TryLockError::WouldBlock) => {
                return Err(CollectError::protocol(format!("{}: L3 poll already in flight", self.target())))
            }
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
        };
        if guard.is_none() {
            *guard = Some(self.connect()?);
        }
        let stream = guard.as_mut().expect("connected above");
        let result = self.exchange(stream);
        if result.is_err() {
            *guard = None;
        }
        let frame = result?;
        tm::decode_l3_response(&frame)
    }

    fn exchange(&self, stream: &mut TcpStream) -> Result<TmFrame, CollectError> {
        let target = self.target();
        stream.write_all(&tm::encode_l3_request()).map_err(|e| io_error(&target, &e))?;
        let deadline = Instant::now() + self.timeout;
        let mut decoder = FrameDecoder::new();
        let mut received = Vec::new();
        let mut buf = [0u8; 4096];
        loop {
            if let Some(frame) = decoder.next_frame().map_err(|e| e.or_raw(&received))? {
                return Ok(frame);
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(CollectError::new(ErrorKind::Timeout, format!("{target}: no L3 report within {:?}", self.timeout))
                    .with_raw(received));
            }
            stream.set_read_timeout(Some(left)).map_err(|e| io_error(&target, &e))?;
            match stream.read(&mut buf) {
                Ok(0) => {
                    let detail = if received.is_empty() {
                        format!("{target}: connection closed")
                    } else {
                        format!("{target}: connection closed after {} of a frame's bytes", received.len())
                    };
                    return Err(CollectError::new(ErrorKind::TransportDown, detail).with_raw(received));
                }
                Ok(n) => {
                    decoder.feed(&buf[..n]);
                    received.extend_from_slice(&buf[..n]);
                }
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(io_error(&target, &e).with_raw(received)),
            }
        }
    }
}

pub struct XcalCollector {
    descriptor: CollectorDescriptor,
    client: XcalClient,
}

impl XcalCollector {
    pub fn new(client: XcalClient, device: &str, period_s: f64) -> Result<Self, String> {
        let endpoint = Endpoint::Tcp { host: client.host.clone(), port: client.port };
        let descriptor = CollectorDescriptor::new(Method::XcalL3, device, period_s, endpoint).map_err(|e| e.to_string())?;
        Ok(XcalCollector { descriptor, client })
    }

    pub fn client(&self) -> &XcalClient {
        &self.client
    }
}

impl Collector for XcalCollector {
    fn descriptor(&self) -> &CollectorDescriptor {
        &self.descriptor
    }

    fn poll(&mut self, clock: &dyn Clock) -> Result<KpiSnapshot, CollectError> {
        let report = self.client.poll_l3();
        let stamp = clock.stamp();
        let report = report.map_err(|e| e.at(stamp))?;
        Ok(report.snapshot.with_device(self.descriptor.device.clone()).with_timestamp(stamp))
    }
}
