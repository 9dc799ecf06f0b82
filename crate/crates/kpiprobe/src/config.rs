//! Campaign configuration file (TOML) and its validation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use kpiprobe_core::at::AtDialect;
use kpiprobe_core::scenario::UnsupportedBehavior;
use kpiprobe_core::web::{SelectorMap, WebLayout};
use kpiprobe_core::{CoverageMatrix, Field, Grain, Interface, InterfaceProfile, ScenarioModel, CPE_A, CPE_B};
use serde::{Deserialize, Serialize};

use crate::collect::{AtCollector, AtTransport, Collector, WebCollector, WebSessionConfig, XcalClient, XcalCollector};
use crate::emulator::Ports;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_DURATION_S: f64 = 30.0;
pub const DEFAULT_HOST: &str = "127.0.0.1";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(message.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Web,
    At,
    Xcal,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [MethodKind::Web, MethodKind::At, MethodKind::Xcal];
}

/// Scenario parameters; anything omitted keeps the model default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub boresight_rsrp: f64,
    pub rotation_period: f64,
    pub pattern_exponent: f64,
    pub pattern_floor: f64,
    pub noise_sigma: f64,
    pub noise: bool,
    pub rsrq_at_boresight: f64,
    pub rsrq_slope: f64,
    pub sinr_at_boresight: f64,
    pub sinr_slope: f64,
    pub snr_at_boresight: f64,
    pub snr_slope: f64,
    pub rssi_offsets: Vec<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::from_model(&ScenarioModel::default())
    }
}

impl ScenarioConfig {
    pub fn from_model(m: &ScenarioModel) -> Self {
        ScenarioConfig {
            boresight_rsrp: m.boresight_rsrp,
            rotation_period: m.rotation_period,
            pattern_exponent: m.pattern_exponent,
            pattern_floor: m.pattern_floor,
            noise_sigma: m.noise_sigma,
            noise: m.noise_enabled,
            rsrq_at_boresight: m.rsrq_at_boresight,
            rsrq_slope: m.rsrq_slope,
            sinr_at_boresight: m.sinr_at_boresight,
            sinr_slope: m.sinr_slope,
            snr_at_boresight: m.snr_at_boresight,
            snr_slope: m.snr_slope,
            rssi_offsets: m.rssi_offsets.clone(),
        }
    }

    pub fn model(&self, seed: u64) -> ScenarioModel {
        ScenarioModel {
            boresight_rsrp: self.boresight_rsrp,
            rotation_period: self.rotation_period,
            pattern_exponent: self.pattern_exponent,
            pattern_floor: self.pattern_floor,
            noise_sigma: self.noise_sigma,
            noise_enabled: self.noise,
            rsrq_at_boresight: self.rsrq_at_boresight,
            rsrq_slope: self.rsrq_slope,
            sinr_at_boresight: self.sinr_at_boresight,
            sinr_slope: self.sinr_slope,
            snr_at_boresight: self.snr_at_boresight,
            snr_slope: self.snr_slope,
            rssi_offsets: self.rssi_offsets.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortsConfig {
    pub web: u16,
    pub at: u16,
    pub tm: u16,
}

impl From<PortsConfig> for Ports {
    fn from(p: PortsConfig) -> Ports {
        Ports { web: p.web, at: p.at, tm: p.tm }
    }
}

impl From<Ports> for PortsConfig {
    fn from(p: Ports) -> PortsConfig {
        PortsConfig { web: p.web, at: p.at, tm: p.tm }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CredentialsConfig {
    pub user: String,
    pub pass: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorConfig {
    pub path: String,
    #[serde(default)]
    pub pattern: Option<String>,
}

/// Overrides applied on top of a device's reference interface profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOverride {
    pub refresh_period: Option<f64>,
    pub staleness_hold: Option<f64>,
    pub response_latency: Option<f64>,
    /// Field key → grain, e.g. `rsrp = 0.1`.
    pub grains: BTreeMap<String, f64>,
    /// `"silent"` or `"error"`; AT only.
    pub unsupported: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOverrides {
    pub web: Option<ProfileOverride>,
    pub at: Option<ProfileOverride>,
    pub tm: Option<ProfileOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub id: String,
    /// Reference profile the emulator uses; defaults to `id`.
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default = "default_host")]
    pub host: String,
    pub ports: PortsConfig,
    #[serde(default)]
    pub credentials: Option<CredentialsConfig>,
    #[serde(default = "all_methods")]
    pub methods: Vec<MethodKind>,
    /// `"debug"` or `"sgcellinfoex"`; detected when omitted.
    #[serde(default)]
    pub at_dialect: Option<String>,
    #[serde(default)]
    pub selectors: BTreeMap<String, SelectorConfig>,
    #[serde(default)]
    pub profiles: ProfileOverrides,
}

fn default_host() -> String {
    DEFAULT_HOST.to_owned()
}

fn all_methods() -> Vec<MethodKind> {
    MethodKind::ALL.to_vec()
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}

fn default_period() -> f64 {
    kpiprobe_core::series::DEFAULT_REQUEST_PERIOD_S
}

fn default_timeout() -> f64 {
    kpiprobe_core::at::DEFAULT_COMMAND_TIMEOUT_S
}

fn default_devices() -> Vec<DeviceConfig> {
    [(CPE_A, Ports::DEFAULT), (CPE_B, Ports { web: 8081, at: 9924, tm: 9926 })]
        .into_iter()
        .map(|(id, ports)| DeviceConfig::new(id, ports))
        .collect()
}

impl DeviceConfig {
    pub fn new(id: &str, ports: Ports) -> Self {
        DeviceConfig {
            id: id.to_owned(),
            profile: None,
            host: default_host(),
            ports: ports.into(),
            credentials: None,
            methods: all_methods(),
            at_dialect: None,
            selectors: BTreeMap::new(),
            profiles: ProfileOverrides::default(),
        }
    }

    pub fn profile_id(&self) -> &str {
        self.profile.as_deref().unwrap_or(&self.id)
    }

    pub fn dialect(&self) -> Result<Option<AtDialect>, ConfigError> {
        match self.at_dialect.as_deref().map(str::to_ascii_lowercase).as_deref() {
            None => Ok(None),
            Some("debug") => Ok(Some(AtDialect::Debug)),
            Some("sgcellinfoex") => Ok(Some(AtDialect::SgCellInfoEx)),
            Some(other) => Err(invalid(format!("device {}: unknown AT dialect {other:?}", self.id))),
        }
    }

    /// Built-in layout of the device profile with the configured selectors
    /// laid over it, field by field.
    pub fn selector_map(&self) -> Result<Option<SelectorMap>, ConfigError> {
        let layout = WebLayout::for_device(self.profile_id()).map(WebLayout::selector_map);
        if self.selectors.is_empty() {
            return Ok(layout);
        }
        let mut map = layout.unwrap_or_default();
        for (key, s) in &self.selectors {
            map.insert(key, &s.path, s.pattern.as_deref())
                .map_err(|e| invalid(format!("device {}: selector {key}: {e}", self.id)))?;
        }
        Ok(Some(map))
    }

    /// Reference profile of `interface` with this device's overrides.
    pub fn interface_profile(&self, interface: Interface) -> Result<InterfaceProfile, ConfigError> {
        let mut p = InterfaceProfile::reference(interface, self.profile_id()).ok_or_else(|| {
            invalid(format!("device {}: no {} profile named {:?}", self.id, interface.label(), self.profile_id()))
        })?;
        let o = match interface {
            Interface::Web => &self.profiles.web,
            Interface::At => &self.profiles.at,
            Interface::Tm => &self.profiles.tm,
        };
        if let Some(o) = o {
            p.refresh_period = o.refresh_period.unwrap_or(p.refresh_period);
            p.staleness_hold = o.staleness_hold.unwrap_or(p.staleness_hold);
            p.response_latency = o.response_latency.unwrap_or(p.response_latency);
            for (key, g) in &o.grains {
                let field = Field::from_key(key)
                    .ok_or_else(|| invalid(format!("device {}: unknown field {key:?} in grains", self.id)))?;
                let grain = Grain::from_f64(*g)
                    .map_err(|e| invalid(format!("device {}: grain {g} for {key}: {e}", self.id)))?;
                p.grains.insert(field, grain);
            }
            p.unsupported = match o.unsupported.as_deref() {
                None => p.unsupported,
                Some("silent") => UnsupportedBehavior::Silent,
                Some("error") => UnsupportedBehavior::Error,
                Some(other) => return Err(invalid(format!("device {}: unsupported must be silent or error, got {other:?}", self.id))),
            };
        }
        p.validate().map_err(|e| invalid(format!("device {}: {} profile: {e}", self.id, interface.label())))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Request period of every collector, seconds.
    #[serde(default = "default_period")]
    pub period: f64,
    /// Per-request timeout, seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default = "default_devices", rename = "device")]
    pub devices: Vec<DeviceConfig>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seed: DEFAULT_SEED,
            out: None,
            duration: DEFAULT_DURATION_S,
            period: default_period(),
            timeout: default_timeout(),
            scenario: ScenarioConfig::default(),
            devices: default_devices(),
        }
    }
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.into(), message },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: CampaignConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: PathBuf::new(), message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [("duration", self.duration), ("period", self.period), ("timeout", self.timeout)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        self.model().validate().map_err(|e| invalid(e.to_string()))?;
        if self.devices.is_empty() {
            return Err(invalid("no devices configured"));
        }
        let mut ids = BTreeSet::new();
        let mut ports = BTreeSet::new();
        for d in &self.devices {
            if !ids.insert(d.id.as_str()) {
                return Err(invalid(format!("device {} listed twice", d.id)));
            }
            if d.methods.is_empty() {
                return Err(invalid(format!("device {} has no methods", d.id)));
            }
            for i in Interface::ALL {
                d.interface_profile(i)?;
            }
            d.dialect()?;
            d.selector_map()?;
            for port in [d.ports.web, d.ports.at, d.ports.tm] {
                if port != 0 && !ports.insert((d.host.as_str(), port)) {
                    return Err(invalid(format!("port {port} on {} is used twice", d.host)));
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> ScenarioModel {
        self.scenario.model(self.seed)
    }

    /// Keep only the device named `id`.
    pub fn restrict_to(&mut self, id: &str) -> Result<(), ConfigError> {
        self.devices.retain(|d| d.id == id);
        if self.devices.is_empty() {
            return Err(invalid(format!("no device named {id:?} in the configuration")));
        }
        Ok(())
    }

    pub fn device(&self, id: &str) -> Option<&DeviceConfig> {
        self.devices.iter().find(|d| d.id == id)
    }

    /// Collectors for every configured (device, method), in file order.
    /// Reference coverage with each device's entries taken from its profile.
    pub fn coverage(&self) -> CoverageMatrix {
        let reference = CoverageMatrix::reference();
        let mut out = CoverageMatrix::new();
        for d in &self.devices {
            for (method, device, fields) in reference.entries() {
                if device == d.profile_id() {
                    out.insert(method, &d.id, fields.iter().copied());
                }
            }
        }
        out
    }

    pub fn collectors(&self) -> Result<Vec<Box<dyn Collector>>, ConfigError> {
        let timeout = Duration::from_secs_f64(self.timeout);
        let mut out: Vec<Box<dyn Collector>> = Vec::new();
        for d in &self.devices {
            for m in &d.methods {
                let c: Box<dyn Collector> = match m {
                    MethodKind::Web => {
                        let mut session = WebSessionConfig::new(&format!("http://{}:{}", d.host, d.ports.web), &d.id);
                        session.timeout = timeout;
                        if let Some(c) = &d.credentials {
                            session = session.with_credentials(&c.user, &c.pass);
                        }
                        Box::new(WebCollector::new(session, d.selector_map()?, self.period).map_err(invalid)?)
                    }
                    MethodKind::At => {
                        let transport = AtTransport::new(&d.host, d.ports.at).with_timeout(timeout);
                        Box::new(AtCollector::new(transport, &d.id, d.dialect()?, self.period).map_err(invalid)?)
                    }
                    MethodKind::Xcal => {
                        let client = XcalClient::new(&d.host, d.ports.tm).with_timeout(timeout.max(Duration::from_secs_f64(kpiprobe_core::tm::DEFAULT_TIMEOUT_S)));
                        Box::new(XcalCollector::new(client, &d.id, self.period).map_err(invalid)?)
                    }
                };
                out.push(c);
            }
        }
        Ok(out)
    }
}

/// What `analyze` needs to rebuild the ground truth: written next to the
/// series as `run.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub seed: u64,
    pub duration: f64,
    pub period: f64,
    pub scenario: ScenarioConfig,
}

impl RunRecord {
    pub fn of(config: &CampaignConfig) -> Self {
        RunRecord {
            seed: config.seed,
            duration: config.duration,
            period: config.period,
            scenario: config.scenario.clone(),
        }
    }

    pub fn model(&self) -> ScenarioModel {
        self.scenario.model(self.seed)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run record serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: "run.toml".into(), message: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = CampaignConfig::parse("").unwrap();
        assert_eq!(c, CampaignConfig::default());
        assert_eq!(c.collectors().unwrap().len(), 6);
    }

    #[test]
    fn duplicate_ports_rejected() {
        let text = r#"
            [[device]]
            id = "cpe-a"
            ports = { web = 8080, at = 9923, tm = 9925 }
            [[device]]
            id = "cpe-b"
            ports = { web = 8081, at = 9923, tm = 9926 }
        "#;
        assert!(matches!(CampaignConfig::parse(text), Err(ConfigError::Invalid(m)) if m.contains("9923")));
    }

    #[test]
    fn unknown_profile_rejected() {
        let text = r#"
            [[device]]
            id = "cpe-z"
            ports = { web = 1, at = 2, tm = 3 }
        "#;
        assert!(matches!(CampaignConfig::parse(text), Err(ConfigError::Invalid(m)) if m.contains("cpe-z")));
        let text = text.replace("id = \"cpe-z\"", "id = \"cpe-z\"\nprofile = \"cpe-b\"");
        assert!(CampaignConfig::parse(&text).is_ok());
    }

    #[test]
    fn overrides_and_selectors() {
        let text = r#"
            seed = 7
            [scenario]
            noise = false
            rotation_period = 20.0
            [[device]]
            id = "cpe-a"
            ports = { web = 8080, at = 9923, tm = 9925 }
            methods = ["web"]
            [device.selectors]
            rsrp = { path = "//td[@id='kpi-rsrp']" }
            [device.profiles.web]
            staleness_hold = 0.5
            grains = { rsrp = 0.5 }
        "#;
        let c = CampaignConfig::parse(text).unwrap();
        let m = c.model();
        assert!(!m.noise_enabled);
        assert_eq!((m.seed, m.rotation_period), (7, 20.0));
        let web = c.devices[0].interface_profile(Interface::Web).unwrap();
        assert_eq!(web.staleness_hold, 0.5);
        assert_eq!(web.grains[&Field::Rsrp], Grain::HALF);
        assert_eq!(c.collectors().unwrap().len(), 1);
        let map = c.devices[0].selector_map().unwrap().unwrap();
        assert_eq!(map.get(Field::Rsrp).unwrap().selector.as_str(), "//td[@id='kpi-rsrp']");
        assert_eq!(map.len(), WebLayout::StatusTable.selector_map().len());
    }

    #[test]
    fn run_record_has_no_ports() {
        let text = RunRecord::of(&CampaignConfig::default()).to_toml();
        assert!(!text.contains("port"));
        assert_eq!(RunRecord::from_toml(&text).unwrap(), RunRecord::of(&CampaignConfig::default()));
    }
}
