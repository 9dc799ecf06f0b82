//! Command-line front end: `emulate`, `collect`, `analyze` and `all`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kpiprobe_core::{Interface, KpiSeries};
use log::info;

use crate::campaign::run_campaign_with;
use crate::clock::{Clock, RealClock, SimClock};
use crate::config::{CampaignConfig, ConfigError, DeviceConfig, RunRecord};
use crate::emulator::{serve, DeviceEmulator, Ports, RunningEmulator};
use crate::export::{read_run, write_run};
use crate::report::write_report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kpiprobe", version, about = "Collect and compare 5G CPE KPIs over web, AT and test-manager interfaces")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Campaign configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for the scenario noise
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Campaign length in seconds.
    #[arg(long, global = true, value_name = "S")]
    pub duration: Option<f64>,
    /// Measurement noise in the scenario
    #[arg(long, global = true, value_enum)]
    pub noise: Option<OnOff>,
    /// Restrict to one device.
    #[arg(long, global = true, value_name = "DEVICE")]
    pub profile: Option<String>,
    /// Ports of the selected device, e.g. `web=8080,at=9923,tm=9925`.
    #[arg(long, global = true, value_name = "LIST", value_parser = parse_ports)]
    pub ports: Option<PortList>,
    /// Seconds per antenna rotation in the scenario
    #[arg(long, global = true, value_name = "S")]
    pub rotation_period: Option<f64>,
    /// Write an SVG overlay of the traces.
    #[arg(long, global = true)]
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClockKind {
    Sim,
    Real,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PortList {
    pub web: Option<u16>,
    pub at: Option<u16>,
    pub tm: Option<u16>,
}

fn parse_ports(text: &str) -> Result<PortList, String> {
    let mut out = PortList::default();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected name=port, got {part:?}"))?;
        let port: u16 = v.trim().parse().map_err(|_| format!("bad port {v:?}"))?;
        let slot = match k.trim() {
            "web" => &mut out.web,
            "at" => &mut out.at,
            "tm" => &mut out.tm,
            other => return Err(format!("unknown interface {other:?} (web, at, tm)")),
        };
        *slot = Some(port);
    }
    Ok(out)
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the emulated devices until interrupted.
    Emulate {
        /// Stop after this many seconds.
        #[arg(long, value_name = "S")]
        serve_for: Option<f64>,
    },
    /// Poll the configured endpoints and write one CSV per collector.
    Collect,
    /// Compute the comparison report from a run directory.
    Analyze {
        /// Run directory; defaults to --out.
        dir: Option<PathBuf>,
    },
    /// Emulate, collect and analyze in one go on ephemeral ports.
    All {
        #[arg(long, value_enum, default_value = "sim")]
        clock: ClockKind,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parse `args` (program name first) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("kpiprobe: {f}");
            f.code()
        }
    }
}

fn load_config(g: &Global) -> Result<CampaignConfig, CliError> {
    let mut c = match &g.config {
        Some(path) => CampaignConfig::load(path)?,
        None => CampaignConfig::default(),
    };
    if let Some(seed) = g.seed {
        c.seed = seed;
    }
    if let Some(d) = g.duration {
        c.duration = d;
    }
    if let Some(n) = g.noise {
        c.scenario.noise = n == OnOff::On;
    }
    if let Some(p) = g.rotation_period {
        c.scenario.rotation_period = p;
    }
    if let Some(out) = &g.out {
        c.out = Some(out.clone());
    }
    if let Some(id) = &g.profile {
        c.restrict_to(id)?;
    }
    if let Some(ports) = g.ports {
        let [device] = c.devices.as_mut_slice() else {
            return Err(CliError::Usage("--ports needs a single device; add --profile".into()));
        };
        device.ports.web = ports.web.unwrap_or(device.ports.web);
        device.ports.at = ports.at.unwrap_or(device.ports.at);
        device.ports.tm = ports.tm.unwrap_or(device.ports.tm);
    }
    c.validate()?;
    Ok(c)
}

fn out_dir(c: &CampaignConfig) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let config = load_config(&cli.global)?;
    match cli.command {
        Command::Emulate { serve_for } => {
            if serve_for.is_some_and(|s| !(s.is_finite() && s >= 0.0)) {
                return Err(CliError::Usage("--serve-for must be a non-negative number of seconds".into()));
            }
            let clock: Arc<dyn Clock> = Arc::new(RealClock::new());
            let running = start_emulators(&config, clock, false)?;
            for r in &running {
                println!("{}: web http://{} at {} tm {}", r.device, r.web, r.at, r.tm);
            }
            match serve_for {
                Some(s) => std::thread::sleep(Duration::from_secs_f64(s)),
                None => loop {
                    std::thread::park();
                },
            }
            Ok(())
        }
        Command::Collect => {
            let clock: Arc<dyn Clock> = Arc::new(RealClock::new());
            let series = collect(&config, clock)?;
            finish_collect(&config, &series)
        }
        Command::Analyze { dir } => {
            let dir = dir.unwrap_or_else(|| out_dir(&config));
            analyze(&dir, cli.global.svg)
        }
        Command::All { clock } => {
            let clock: Arc<dyn Clock> = match clock {
                ClockKind::Sim => Arc::new(SimClock::new()),
                ClockKind::Real => Arc::new(RealClock::new()),
            };
            let running = start_emulators(&config, clock.clone(), true)?;
            let mut local = config.clone();
            for (d, r) in local.devices.iter_mut().zip(&running) {
                d.host = r.web.ip().to_string();
                d.ports.web = r.web.port();
                d.ports.at = r.at.port();
                d.ports.tm = r.tm.port();
            }
            let series = collect(&local, clock)?;
            drop(running);
            finish_collect(&config, &series)?;
            analyze(&out_dir(&config), cli.global.svg)
        }
    }
}

/// Build and start one emulator per configured device.
pub fn start_emulators(config: &CampaignConfig, clock: Arc<dyn Clock>, ephemeral: bool) -> Result<Vec<RunningEmulator>, CliError> {
    let model = config.model();
    let mut running = Vec::new();
    for d in &config.devices {
        let emu = device_emulator(d, &model, clock.clone())?;
        let ports = if ephemeral { Ports::EPHEMERAL } else { d.ports.into() };
        running.push(serve(Arc::new(emu), &d.host, ports).map_err(runtime)?);
    }
    Ok(running)
}

fn device_emulator(d: &DeviceConfig, model: &kpiprobe_core::ScenarioModel, clock: Arc<dyn Clock>) -> Result<DeviceEmulator, CliError> {
    let profile = |i| d.interface_profile(i);
    let mut emu = DeviceEmulator::with_profiles(
        model.clone(),
        profile(Interface::Web)?,
        profile(Interface::At)?,
        profile(Interface::Tm)?,
        clock,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    emu.device = d.id.clone();
    Ok(match &d.credentials {
        Some(c) => emu.with_credentials(&c.user, &c.pass),
        None => emu,
    })
}

fn collect(config: &CampaignConfig, clock: Arc<dyn Clock>) -> Result<Vec<KpiSeries>, CliError> {
    let collectors = config.collectors()?;
    run_campaign_with(collectors, clock, config.duration, config.coverage()).map_err(|e| CliError::Usage(e.to_string()))
}

fn finish_collect(config: &CampaignConfig, series: &[KpiSeries]) -> Result<(), CliError> {
    let out = out_dir(config);
    write_run(&out, series, &RunRecord::of(config)).map_err(runtime)?;
    for s in series {
        println!("{}: {} samples, {} errors", s.descriptor.name(), s.len(), s.meta.errors.len());
    }
    if series.iter().all(KpiSeries::is_empty) {
        return Err(CliError::Runtime("no collector produced any samples".into()));
    }
    info!("series written to {}", out.display());
    Ok(())
}

fn analyze(dir: &Path, svg: bool) -> Result<(), CliError> {
    let (series, record) = read_run(dir).map_err(runtime)?;
    if series.is_empty() {
        return Err(CliError::Runtime(format!("no series CSV files in {}", dir.join(crate::export::SERIES_DIR).display())));
    }
    let truth = record.map(|r| r.model());
    let files = write_report(dir, &series, truth.as_ref(), svg).map_err(runtime)?;
    print!("{}", crate::report::report_text(&files.metrics));
    Ok(())
}
