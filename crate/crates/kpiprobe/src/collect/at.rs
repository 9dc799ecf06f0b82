//! AT collector: line-oriented command/response over TCP, with dialect
//! detection.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use kpiprobe_core::at::{self, AtDialect, AtLine};
use kpiprobe_core::{CollectError, CollectorDescriptor, Endpoint, ErrorKind, KpiSnapshot, Method};
use log::debug;

use super::{io_error, Collector};
use crate::clock::Clock;

const MAX_REPLY_LINES: usize = 256;

/// A TCP stand-in for the serial link. One command in flight at a time,
/// enforced by `&mut self`.
pub struct AtTransport {
    host: String,
    port: u16,
    pub timeout: Duration,
    conn: Option<(BufReader<TcpStream>, TcpStream)>,
}

impl AtTransport {
    pub fn new(host: &str, port: u16) -> Self {
        AtTransport {
            host: host.to_owned(),
            port,
            timeout: Duration::from_secs_f64(at::DEFAULT_COMMAND_TIMEOUT_S),
            conn: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn target(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }

    fn connect(&mut self) -> Result<&mut (BufReader<TcpStream>, TcpStream), CollectError> {
        if self.conn.is_none() {
            let target = self.target();
            let addr = (self.host.as_str(), self.port)
                .to_socket_addrs()
                .map_err(|e| io_error(&target, &e))?
                .next()
                .ok_or_else(|| CollectError::new(ErrorKind::TransportDown, format!("{target}: no address")))?;
            let stream = TcpStream::connect_timeout(&addr, self.timeout).map_err(|e| io_error(&target, &e))?;
            stream.set_nodelay(true).map_err(|e| io_error(&target, &e))?;
            let writer = stream.try_clone().map_err(|e| io_error(&target, &e))?;
            self.conn = Some((BufReader::new(stream), writer));
        }
        Ok(self.conn.as_mut().expect("connected above"))
    }

    /// Send one command and collect the payload lines up to OK/ERROR.
    pub fn send_command(&mut self, command: &str) -> Result<Vec<String>, CollectError> {
        at::check_command(command)?;
        let command = command.trim().to_owned();
        let result = self.exchange(&command);
        if result.as_ref().is_err_and(|e| e.kind != ErrorKind::DialectUnsupported) {
            // A late reply would be read as the answer to the next command.
            self.conn = None;
        }
        result
    }

    fn exchange(&mut self, command: &str) -> Result<Vec<String>, CollectError> {
        let target = self.target();
        let timeout = self.timeout;
        let (reader, writer) = self.connect()?;
        writer
            .write_all(format!("{command}\r\n").as_bytes())
            .map_err(|e| io_error(&target, &e))?;
        let deadline = Instant::now() + timeout;
        let mut payload = Vec::new();
        let mut received = String::new();
        let mut line = Vec::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(CollectError::new(ErrorKind::Timeout, format!("{command}: no reply within {timeout:?}"))
                    .with_raw(received.into_bytes()));
            }
            reader.get_ref().set_read_timeout(Some(left)).map_err(|e| io_error(&target, &e))?;
            match reader.read_until(b'\n', &mut line) {
                Ok(0) => {
                    return Err(CollectError::new(ErrorKind::TransportDown, format!("{target}: connection closed"))
                        .with_raw(received.into_bytes()))
                }
                Ok(_) if line.ends_with(b"\n") => {
                    let text = String::from_utf8_lossy(&line).into_owned();
                    line.clear();
                    received.push_str(&text);
                    match at::classify_line(&text) {
                        AtLine::Blank => {}
                        AtLine::Payload(p) if payload.is_empty() && p.eq_ignore_ascii_case(command) => {}
                        AtLine::Payload(p) => payload.push(p),
                        AtLine::Terminator(status) => {
                            return at::finish_reply(command, payload, status).map_err(|e| e.or_raw(received.as_bytes()))
                        }
                    }
                    if payload.len() > MAX_REPLY_LINES {
                        return Err(CollectError::protocol(format!("{command}: reply exceeds {MAX_REPLY_LINES} lines"))
                            .with_raw(received.into_bytes()));
                    }
                }
                Ok(_) => {}
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
                Err(e) => return Err(io_error(&target, &e).with_raw(received.into_bytes())),
            }
        }
    }

    /// Probe each dialect in order; the first answering OK wins.
    pub fn detect_dialect(&mut self) -> Result<AtDialect, CollectError> {
        let mut failures = Vec::new();
        for dialect in AtDialect::PROBE_ORDER {
            match self.send_command(dialect.command()) {
                Ok(_) => return Ok(dialect),
                Err(e) => failures.push(format!("{} ({})", dialect.command(), e.kind.label())),
            }
        }
        Err(CollectError::new(
            ErrorKind::DialectUnsupported,
            format!("{}: no dialect answered: {}", self.target(), failures.join(", ")),
        ))
    }
}

pub struct AtCollector {
    descriptor: CollectorDescriptor,
    transport: AtTransport,
    dialect: Option<AtDialect>,
}

impl AtCollector {
    /// Collector whose dialect is detected on first use, unless `dialect`
    /// pins it.
    pub fn new(transport: AtTransport, device: &str, dialect: Option<AtDialect>, period_s: f64) -> Result<Self, String> {
        let method = dialect.map_or(Method::AtDebug, AtDialect::method);
        let endpoint = Endpoint::Tcp { host: transport.host.clone(), port: transport.port };
        let descriptor = CollectorDescriptor::new(method, device, period_s, endpoint).map_err(|e| e.to_string())?;
        Ok(AtCollector { descriptor, transport, dialect })
    }

    pub fn dialect(&self) -> Option<AtDialect> {
        self.dialect
    }

    fn ensure_dialect(&mut self) -> Result<AtDialect, CollectError> {
        if let Some(d) = self.dialect {
            return Ok(d);
        }
        let d = self.transport.detect_dialect()?;
        debug!("{}: AT dialect {d}", self.descriptor.device);
        self.dialect = Some(d);
        self.descriptor.method = d.method();
        Ok(d)
    }
}

impl Collector for AtCollector {
    fn descriptor(&self) -> &CollectorDescriptor {
        &self.descriptor
    }

    fn prepare(&mut self, _clock: &dyn Clock) -> Result<(), CollectError> {
        self.ensure_dialect().map(|_| ())
    }

    fn poll(&mut self, clock: &dyn Clock) -> Result<KpiSnapshot, CollectError> {
        let dialect = self.ensure_dialect()?;
        let lines = self.transport.send_command(dialect.command())?;
        let stamp = clock.stamp();
        let raw = lines.join("\r\n").into_bytes();
        let snap = at::parse_response(dialect, &lines).map_err(|e| e.at(stamp).or_raw(&raw))?;
        let mut snap = snap.with_device(self.descriptor.device.clone()).with_timestamp(stamp);
        snap.raw = raw;
        Ok(snap)
    }
}
