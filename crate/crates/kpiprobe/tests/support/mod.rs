#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use kpiprobe::clock::{Clock, SimClock};
use kpiprobe::emulator::{serve, DeviceEmulator, Ports, RunningEmulator};
use kpiprobe_core::ScenarioModel;

pub struct Bench {
    pub clock: Arc<SimClock>,
    pub emu: Arc<DeviceEmulator>,
    pub running: RunningEmulator,
}

pub fn quiet_model() -> ScenarioModel {
    ScenarioModel::default().without_noise()
}

pub fn bench_with(device: &str, model: ScenarioModel, creds: Option<(&str, &str)>) -> Bench {
    let clock = Arc::new(SimClock::new());
    let mut emu = DeviceEmulator::new(device, model, clock.clone() as Arc<dyn Clock>).unwrap();
    if let Some((u, p)) = creds {
        emu = emu.with_credentials(u, p);
    }
    let emu = Arc::new(emu);
    let running = serve(emu.clone(), "127.0.0.1", Ports::EPHEMERAL).unwrap();
    Bench { clock, emu, running }
}

pub fn bench(device: &str) -> Bench {
    bench_with(device, quiet_model(), None)
}

/// A port with nothing listening on it.
pub fn closed_port() -> u16 {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap().port()
}

/// One-shot TCP server: reads whatever arrives first, writes `reply`, then
/// either closes or keeps the socket open for `linger`.
pub fn canned_server(reply: Vec<u8>, linger: Duration) -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        if let Ok((mut s, _)) = listener.accept() {
            let mut buf = [0u8; 256];
            let _ = s.read(&mut buf);
            let _ = s.write_all(&reply);
            thread::sleep(linger);
        }
    });
    addr
}
