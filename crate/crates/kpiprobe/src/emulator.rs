//! CPE emulator: one device's web dashboard, AT endpoint and test-manager
//! socket, all sampling the same scenario model on a shared clock.

use std::collections::BTreeSet;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use kpiprobe_core::at::{self, AtDialect};
use kpiprobe_core::scenario::{emulated_snapshot, Interface, InterfaceProfile, ScenarioError, UnsupportedBehavior};
use kpiprobe_core::tm::{self, FrameDecoder, TmFrame};
use kpiprobe_core::web::WebLayout;
use kpiprobe_core::{KpiSnapshot, ScenarioModel};
use log::{debug, info, warn};

use crate::clock::Clock;

const POLL_INTERVAL: Duration = Duration::from_millis(10);
const READ_TIMEOUT: Duration = Duration::from_millis(100);
const MAX_AT_LINE: usize = 4096;

/// Extra L3 parameters the test manager reports beyond the typed fields.
pub const L3_EXTRAS: [(&str, &str); 3] = [("SSB_INDEX", "0"), ("DL_MCS", "27"), ("DL_BLER", "0.00")];

#[derive(Debug, thiserror::Error)]
pub enum EmulatorError {
    #[error("cannot bind {what} listener on {addr}: {reason}")]
    Bind { what: &'static str, addr: String, reason: String },
    #[error("no {0} profile for device {1:?}")]
    NoProfile(Interface, String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credentials {
    pub user: String,
    pub pass: String,
}

/// What the AT endpoint does with one command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtAnswer {
    /// KPI report; sent after the profile's response latency.
    Report(String),
    Reply(String),
    Silent,
}

pub struct DeviceEmulator {
    pub device: String,
    pub model: ScenarioModel,
    pub web: InterfaceProfile,
    pub at: InterfaceProfile,
    pub tm: InterfaceProfile,
    pub credentials: Option<Credentials>,
    pub layout: WebLayout,
    clock: Arc<dyn Clock>,
    sessions: Mutex<BTreeSet<String>>,
    next_session: AtomicU64,
}

impl DeviceEmulator {
    /// Emulator with the reference profiles of `device`.
    pub fn new(device: &str, model: ScenarioModel, clock: Arc<dyn Clock>) -> Result<Self, EmulatorError> {
        let profile = |i| InterfaceProfile::reference(i, device).ok_or(EmulatorError::NoProfile(i, device.to_owned()));
        Self::with_profiles(model, profile(Interface::Web)?, profile(Interface::At)?, profile(Interface::Tm)?, clock)
    }

    pub fn with_profiles(
        model: ScenarioModel,
        web: InterfaceProfile,
        at: InterfaceProfile,
        tm: InterfaceProfile,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, EmulatorError> {
        model.validate()?;
        for p in [&web, &at, &tm] {
            p.validate()?;
        }
        Ok(DeviceEmulator {
            layout: WebLayout::for_device(&web.device).unwrap_or(WebLayout::StatusTable),
            device: web.device.clone(),
            model,
            web,
            at,
            tm,
            credentials: None,
            clock,
            sessions: Mutex::new(BTreeSet::new()),
            next_session: AtomicU64::new(1),
        })
    }

    pub fn with_credentials(mut self, user: &str, pass: &str) -> Self {
        self.credentials = Some(Credentials { user: user.to_owned(), pass: pass.to_owned() });
        self
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    fn profile(&self, interface: Interface) -> &InterfaceProfile {
        match interface {
            Interface::Web => &self.web,
            Interface::At => &self.at,
            Interface::Tm => &self.tm,
        }
    }

    pub fn snapshot(&self, interface: Interface, t: f64) -> KpiSnapshot {
        emulated_snapshot(self.profile(interface), &self.model, t)
            .expect("validated profiles cover their own fields")
    }

    pub fn render_web(&self, t: f64) -> String {
        self.layout.render_page(&self.snapshot(Interface::Web, t))
    }

    pub fn answer_at(&self, command: &str, t: f64) -> AtAnswer {
        let c = command.trim();
        if ["AT", "ATE0", "ATE1"].iter().any(|k| c.eq_ignore_ascii_case(k)) {
            return AtAnswer::Reply("OK\r\n".into());
        }
        match AtDialect::from_command(c) {
            Some(d) if Some(d) == self.at.at_dialect => AtAnswer::Report(at::render_reply(d, &self.snapshot(Interface::At, t))),
            Some(_) => match self.at.unsupported {
                UnsupportedBehavior::Silent => AtAnswer::Silent,
                UnsupportedBehavior::Error => AtAnswer::Reply("ERROR\r\n".into()),
            },
            None => AtAnswer::Reply("ERROR\r\n".into()),
        }
    }

    pub fn render_tm(&self, t: f64) -> TmFrame {
        let extras: Vec<(String, String)> = L3_EXTRAS.iter().map(|(k, v)| ((*k).into(), (*v).into())).collect();
        tm::encode_l3_response(&tm::render_l3_params(&self.snapshot(Interface::Tm, t), &extras))
    }

    /// Check credentials and open a session; `None` on a bad login.
    pub fn login(&self, user: &str, pass: &str) -> Option<String> {
        if let Some(c) = &self.credentials {
            if c.user != user || c.pass != pass {
                return None;
            }
        }
        let token = format!("s{:08x}", self.next_session.fetch_add(1, Ordering::Relaxed));
        self.sessions.lock().unwrap().insert(token.clone());
        Some(token)
    }

    pub fn session_valid(&self, cookie_header: Option<&str>) -> bool {
        if self.credentials.is_none() {
            return true;
        }
        let Some(header) = cookie_header else { return false };
        let sessions = self.sessions.lock().unwrap();
        header
            .split(';')
            .filter_map(|kv| kv.trim().split_once('='))
            .any(|(k, v)| k == "session" && sessions.contains(v))
    }

    fn latency(&self, interface: Interface) -> Duration {
        Duration::from_secs_f64(self.profile(interface).response_latency)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ports {
    pub web: u16,
    pub at: u16,
    pub tm: u16,
}

impl Ports {
    pub const EPHEMERAL: Ports = Ports { web: 0, at: 0, tm: 0 };
    pub const DEFAULT: Ports = Ports { web: 8080, at: 9923, tm: tm::DEFAULT_PORT };
}

/// Listeners of one emulated device; dropping it stops them.
pub struct RunningEmulator {
    pub device: String,
    pub web: SocketAddr,
    pub at: SocketAddr,
    pub tm: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl RunningEmulator {
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for RunningEmulator {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

fn bind_error(what: &'static str, addr: &str, reason: impl ToString) -> EmulatorError {
    EmulatorError::Bind { what, addr: addr.to_owned(), reason: reason.to_string() }
}

/// A listener whose accepted sockets inherit TCP_NODELAY; the HTTP server
/// writes headers and body separately and would otherwise stall on
/// delayed ACKs.
fn nodelay_listener(addr: &str) -> Result<TcpListener, EmulatorError> {
    use socket2::{Domain, Protocol, Socket, Type};
    let err = |e: io::Error| bind_error("web", addr, e);
    let sa: SocketAddr = addr
        .to_socket_addrs()
        .map_err(err)?
        .next()
        .ok_or_else(|| bind_error("web", addr, "no address"))?;
    let socket = Socket::new(Domain::for_address(sa), Type::STREAM, Some(Protocol::TCP)).map_err(err)?;
    socket.set_reuse_address(true).map_err(err)?;
    socket.set_nodelay(true).map_err(err)?;
    socket.bind(&sa.into()).map_err(err)?;
    socket.listen(128).map_err(err)?;
    Ok(socket.into())
}

/// Start the three listeners on `host`. Port 0 picks a free port.
pub fn serve(emu: Arc<DeviceEmulator>, host: &str, ports: Ports) -> Result<RunningEmulator, EmulatorError> {
    let stop = Arc::new(AtomicBool::new(false));

    let web_addr = format!("{host}:{}", ports.web);
    let http = tiny_http::Server::from_listener(nodelay_listener(&web_addr)?, None)
        .map_err(|e| bind_error("web", &web_addr, e))?;
    let web = http
        .server_addr()
        .to_ip()
        .ok_or_else(|| bind_error("web", &web_addr, "not an IP listener"))?;

    let at_addr = format!("{host}:{}", ports.at);
    let at_listener = TcpListener::bind(&at_addr).map_err(|e| bind_error("AT", &at_addr, e))?;
    let tm_addr = format!("{host}:{}", ports.tm);
    let tm_listener = TcpListener::bind(&tm_addr).map_err(|e| bind_error("TM", &tm_addr, e))?;
    let at = at_listener.local_addr().map_err(|e| bind_error("AT", &at_addr, e))?;
    let tm = tm_listener.local_addr().map_err(|e| bind_error("TM", &tm_addr, e))?;

    let mut threads = Vec::new();
    {
        let (emu, stop) = (emu.clone(), stop.clone());
        threads.push(thread::spawn(move || web_loop(http, emu, stop)));
    }
    for (listener, handler) in [
        (at_listener, at_connection as fn(TcpStream, Arc<DeviceEmulator>, Arc<AtomicBool>) -> io::Result<()>),
        (tm_listener, tm_connection),
    ] {
        let (emu, stop) = (emu.clone(), stop.clone());
        listener.set_nonblocking(true).map_err(|e| bind_error("TCP", host, e))?;
        threads.push(thread::spawn(move || accept_loop(listener, emu, stop, handler)));
    }
    info!("{}: web http://{web} at {at} tm {tm}", emu.device);
    Ok(RunningEmulator { device: emu.device.clone(), web, at, tm, stop, threads })
}

fn web_loop(server: tiny_http::Server, emu: Arc<DeviceEmulator>, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::SeqCst) {
        match server.recv_timeout(READ_TIMEOUT) {
            Ok(Some(request)) => {
                if let Err(e) = handle_http(request, &emu) {
                    debug!("web: {e}");
                }
            }
            Ok(None) => {}
            Err(e) => {
                warn!("web listener: {e}");
                break;
            }
        }
    }
}

fn header(value: &str, name: &str) -> tiny_http::Header {
    tiny_http::Header::from_bytes(name.as_bytes(), value.as_bytes()).expect("static header is valid")
}

fn handle_http(mut request: tiny_http::Request, emu: &DeviceEmulator) -> io::Result<()> {
    use tiny_http::{Method, Response};
    let path = request.url().split('?').next().unwrap_or("").to_owned();
    match (request.method(), path.as_str()) {
        (Method::Post, "/login") => {
            let mut body = String::new();
            request.as_reader().take(64 * 1024).read_to_string(&mut body)?;
            let mut user = String::new();
            let mut pass = String::new();
            for (k, v) in form_urlencoded::parse(body.as_bytes()) {
                match k.as_ref() {
                    "user" => user = v.into_owned(),
                    "pass" => pass = v.into_owned(),
                    _ => {}
                }
            }
            match emu.login(&user, &pass) {
                Some(token) => request.respond(
                    Response::from_string("ok")
                        .with_header(header(&format!("session={token}; Path=/"), "Set-Cookie")),
                ),
                None => request.respond(Response::from_string("bad credentials").with_status_code(401)),
            }
        }
        (Method::Get, "/status") => {
            let cookie = request
                .headers()
                .iter()
                .find(|h| h.field.equiv("Cookie"))
                .map(|h| h.value.as_str().to_owned());
            if !emu.session_valid(cookie.as_deref()) {
                return request.respond(Response::from_string("login required").with_status_code(401));
            }
            let clock = emu.clock();
            let page = emu.render_web(clock.now_secs());
            clock.delay(emu.latency(Interface::Web));
            request.respond(Response::from_string(page).with_header(header("text/html; charset=utf-8", "Content-Type")))
        }
        _ => request.respond(Response::from_string("not found").with_status_code(404)),
    }
}

fn accept_loop(
    listener: TcpListener,
    emu: Arc<DeviceEmulator>,
    stop: Arc<AtomicBool>,
    handler: fn(TcpStream, Arc<DeviceEmulator>, Arc<AtomicBool>) -> io::Result<()>,
) {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let (emu, stop) = (emu.clone(), stop.clone());
                thread::spawn(move || {
                    if let Err(e) = stream
                        .set_nonblocking(false)
                        .and_then(|_| stream.set_read_timeout(Some(READ_TIMEOUT)))
                        .and_then(|_| stream.set_nodelay(true))
                        .and_then(|_| handler(stream, emu, stop))
                    {
                        debug!("connection {peer}: {e}");
                    }
                });
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL_INTERVAL),
            Err(e) => {
                warn!("accept: {e}");
                thread::sleep(POLL_INTERVAL);
            }
        }
    }
}

fn timed_out(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

fn at_connection(stream: TcpStream, emu: Arc<DeviceEmulator>, stop: Arc<AtomicBool>) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => return Ok(()),
            Ok(_) if line.ends_with(b"\n") => {
                let command = String::from_utf8_lossy(&line).trim().to_owned();
                line.clear();
                if command.is_empty() {
                    continue;
                }
                let clock = emu.clock();
                match emu.answer_at(&command, clock.now_secs()) {
                    AtAnswer::Report(reply) => {
                        clock.delay(emu.latency(Interface::At));
                        writer.write_all(reply.as_bytes())?;
                    }
                    AtAnswer::Reply(reply) => writer.write_all(reply.as_bytes())?,
                    AtAnswer::Silent => debug!("{}: ignoring {command}", emu.device),
                }
            }
            Ok(_) => {}
            Err(e) if timed_out(&e) => {}
            Err(e) => return Err(e),
        }
        if line.len() > MAX_AT_LINE {
            line.clear();
            writer.write_all(b"ERROR\r\n")?;
        }
    }
    Ok(())
}

fn tm_connection(mut stream: TcpStream, emu: Arc<DeviceEmulator>, stop: Arc<AtomicBool>) -> io::Result<()> {
    let mut decoder = FrameDecoder::new();
    let mut buf = [0u8; 4096];
    while !stop.load(Ordering::SeqCst) {
        match stream.read(&mut buf) {
            Ok(0) => return Ok(()),
            Ok(n) => decoder.feed(&buf[..n]),
            Err(e) if timed_out(&e) => continue,
            Err(e) => return Err(e),
        }
        loop {
            match decoder.next_frame() {
                Ok(Some(frame)) if frame.command == tm::L3_REPORT => {
                    let clock = emu.clock();
                    let reply = emu.render_tm(clock.now_secs());
                    clock.delay(emu.latency(Interface::Tm));
                    stream.write_all(&reply.encode())?;
                }
                Ok(Some(frame)) => debug!("{}: unsupported TM command 0x{:04X}", emu.device, frame.command),
                Ok(None) => break,
                Err(e) => {
                    warn!("{}: dropping TM connection: {e}", emu.device);
                    return Ok(());
                }
            }
        }
    }
    Ok(())
}
