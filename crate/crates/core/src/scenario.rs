//! Ground-truth signal model for the rotating-CPE scenario and the
//! per-interface emulation profiles (refresh, quantization, staleness).

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::at::AtDialect;
use crate::coverage::{CoverageMatrix, CPE_A, CPE_B};
use crate::model::{Band, Duplex, Field, FreqRange, KpiSnapshot, Method, Rat};
use crate::value::{Grain, MeasurementValue, Unit, ValueError};

/// Rotating-CPE signal model. RSRP follows a single-lobe azimuth pattern as
/// the tripod turns; RSRQ, SINR and SNR are affine in RSRP.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioModel {
    /// RSRP at boresight, dBm.
    pub boresight_rsrp: f64,
    /// Seconds per full revolution.
    pub rotation_period: f64,
    pub pattern_exponent: f64,
    /// Back-lobe attenuation cap, dB (negative).
    pub pattern_floor: f64,
    pub noise_sigma: f64,
    pub noise_enabled: bool,
    pub rsrq_at_boresight: f64,
    pub rsrq_slope: f64,
    pub sinr_at_boresight: f64,
    pub sinr_slope: f64,
    pub snr_at_boresight: f64,
    pub snr_slope: f64,
    /// Per-branch RSSI offset from RSRP, dB.
    pub rssi_offsets: Vec<f64>,
    pub seed: u64,
}

impl Default for ScenarioModel {
    fn default() -> Self {
        ScenarioModel {
            boresight_rsrp: -78.0,
            rotation_period: 30.0,
            pattern_exponent: 2.0,
            pattern_floor: -25.0,
            noise_sigma: 0.3,
            noise_enabled: true,
            rsrq_at_boresight: -11.0,
            rsrq_slope: 0.2,
            sinr_at_boresight: 14.0,
            sinr_slope: 1.0,
            snr_at_boresight: 12.0,
            snr_slope: 1.0,
            rssi_offsets: vec![-6.3, -0.6],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Invalid(&'static str),
    NotCovered { field: Field, method: Method },
    NotMeasured(Field),
    MissingGrain(Field),
    Value(ValueError),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Invalid(why) => write!(f, "invalid scenario: {why}"),
            ScenarioError::NotCovered { field, method } => write!(f, "no coverage: {field} is not exposed by {method}"),
            ScenarioError::NotMeasured(field) => write!(f, "{field} is not a measured field"),
            ScenarioError::MissingGrain(field) => write!(f, "profile has no grain for {field}"),
            ScenarioError::Value(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for ScenarioError {}

impl From<ValueError> for ScenarioError {
    fn from(e: ValueError) -> Self {
        ScenarioError::Value(e)
    }
}

impl ScenarioModel {
    pub fn without_noise(mut self) -> Self {
        self.noise_enabled = false;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let finite = [
            self.boresight_rsrp,
            self.rotation_period,
            self.pattern_exponent,
            self.pattern_floor,
            self.noise_sigma,
            self.rsrq_at_boresight,
            self.rsrq_slope,
            self.sinr_at_boresight,
            self.sinr_slope,
            self.snr_at_boresight,
            self.snr_slope,
        ];
        if finite.iter().chain(&self.rssi_offsets).any(|v| !v.is_finite()) {
            return Err(ScenarioError::Invalid("parameters must be finite"));
        }
        if self.rotation_period <= 0.0 {
            return Err(ScenarioError::Invalid("rotation_period must be positive"));
        }
        if self.pattern_exponent <= 0.0 {
            return Err(ScenarioError::Invalid("pattern_exponent must be positive"));
        }
        if self.pattern_floor > 0.0 {
            return Err(ScenarioError::Invalid("pattern_floor must not be positive"));
        }
        if self.noise_sigma < 0.0 {
            return Err(ScenarioError::Invalid("noise_sigma must not be negative"));
        }
        Ok(())
    }

    /// Azimuth in radians at time `t`.
    pub fn azimuth(&self, t: f64) -> f64 {
        2.0 * PI * t / self.rotation_period
    }

    /// Pattern gain in dB, clamped at the floor. Cosine-power lobe over the
    /// half angle, so boresight is 0 dB and the back direction hits the floor.
    pub fn pattern_gain(&self, azimuth: f64) -> f64 {
        let c = libm::fabs(libm::cos(azimuth / 2.0));
        if c <= 0.0 {
            return self.pattern_floor;
        }
        let gain = 10.0 * self.pattern_exponent * libm::log10(c);
        gain.max(self.pattern_floor)
    }

    /// Gaussian noise sample for time `t` (1 ms grid), clipped at ±5σ.
    pub fn noise(&self, t: f64) -> f64 {
        if !self.noise_enabled || self.noise_sigma == 0.0 {
            return 0.0;
        }
        let tick = libm::round(t * 1000.0) as i64 as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ tick.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
        let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let z = libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2);
        z.clamp(-5.0, 5.0) * self.noise_sigma
    }

    pub fn ground_truth_rsrp(&self, t: f64) -> f64 {
        self.boresight_rsrp + self.pattern_gain(self.azimuth(t)) + self.noise(t)
    }

    /// Ground truth for any time-varying field.
    pub fn truth(&self, field: Field, t: f64) -> Option<f64> {
        let rsrp = self.ground_truth_rsrp(t);
        let delta = rsrp - self.boresight_rsrp;
        match field {
            Field::Rsrp => Some(rsrp),
            Field::Rsrq => Some(self.rsrq_at_boresight + self.rsrq_slope * delta),
            Field::Sinr => Some(self.sinr_at_boresight + self.sinr_slope * delta),
            Field::Snr => Some(self.snr_at_boresight + self.snr_slope * delta),
            _ => None,
        }
    }

    pub fn rssi_branch_truth(&self, branch: usize, t: f64) -> Option<f64> {
        self.rssi_offsets.get(branch).map(|o| self.ground_truth_rsrp(t) + o)
    }

    /// Largest |d RSRP / dt| without noise, dB/s (numerical, 0.01 s grid).
    pub fn max_rsrp_slope(&self) -> f64 {
        let quiet = self.clone().without_noise();
        let steps = (self.rotation_period / 0.01) as usize;
        let mut best: f64 = 0.0;
        let mut prev = quiet.ground_truth_rsrp(0.0);
        for k in 1..=steps {
            let v = quiet.ground_truth_rsrp(k as f64 * 0.01);
            best = best.max(libm::fabs(v - prev) / 0.01);
            prev = v;
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Interface {
    Web,
    At,
    Tm,
}

impl Interface {
    pub const ALL: [Interface; 3] = [Interface::Web, Interface::At, Interface::Tm];

    pub fn label(self) -> &'static str {
        match self {
            Interface::Web => "web",
            Interface::At => "at",
            Interface::Tm => "tm",
        }
    }
}

impl fmt::Display for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How a device reacts to the AT query it does not implement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnsupportedBehavior {
    Silent,
    Error,
}

/// Emulation behaviour of one interface of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceProfile {
    pub interface: Interface,
    pub device: String,
    /// Internal measurement refresh period, seconds.
    pub refresh_period: f64,
    pub grains: BTreeMap<Field, Grain>,
    /// Time the device takes to answer, seconds.
    pub response_latency: f64,
    /// Extra hold beyond the refresh period (web dashboards only), seconds.
    pub staleness_hold: f64,
    pub at_dialect: Option<AtDialect>,
    pub unsupported: UnsupportedBehavior,
}

impl InterfaceProfile {
    /// Default profiles for the two emulated devices:
    /// TM refreshes every 1.0 s at 0.01 dB; AT every 0.25 s at integer dB;
    /// the dashboards hold each value for 3.0 s (CPE-A shows 0.1 dB, CPE-B
    /// integers).
    pub fn reference(interface: Interface, device: &str) -> Option<InterfaceProfile> {
        use Field::*;
        let (refresh, staleness, latency, dialect, unsupported, grains): (f64, f64, f64, _, _, &[(Field, Grain)]) =
            match (interface, device) {
                (Interface::Tm, CPE_A | CPE_B) => (
                    1.0,
                    0.0,
                    0.02,
                    None,
                    UnsupportedBehavior::Error,
                    &[(Rsrp, Grain::HUNDREDTH), (Rsrq, Grain::HUNDREDTH), (Sinr, Grain::HUNDREDTH), (Scs, Grain::ONE)],
                ),
                (Interface::At, CPE_A) => (
                    0.25,
                    0.0,
                    0.01,
                    Some(AtDialect::Debug),
                    UnsupportedBehavior::Silent,
                    &[
                        (Rsrp, Grain::ONE),
                        (Rsrq, Grain::ONE),
                        (Sinr, Grain::TENTH),
                        (Rssi, Grain::TENTH),
                        (Bandwidth, Grain::TENTH),
                    ],
                ),
                (Interface::At, CPE_B) => (
                    0.25,
                    0.0,
                    0.01,
                    Some(AtDialect::SgCellInfoEx),
                    UnsupportedBehavior::Error,
                    &[
                        (Rsrp, Grain::ONE),
                        (Rsrq, Grain::ONE),
                        (Sinr, Grain::HALF),
                        (Bandwidth, Grain::ONE),
                        (Scs, Grain::ONE),
                    ],
                ),
                (Interface::Web, CPE_A) => (
                    1.0,
                    2.0,
                    0.05,
                    None,
                    UnsupportedBehavior::Error,
                    &[(Rsrp, Grain::TENTH), (Rsrq, Grain::TENTH), (Snr, Grain::ONE), (Bandwidth, Grain::TENTH)],
                ),
                (Interface::Web, CPE_B) => (
                    1.0,
                    2.0,
                    0.05,
                    None,
                    UnsupportedBehavior::Error,
                    &[(Rsrp, Grain::ONE), (Rsrq, Grain::ONE), (Sinr, Grain::TENTH)],
                ),
                _ => return None,
            };
        Some(InterfaceProfile {
            interface,
            device: device.to_owned(),
            refresh_period: refresh,
            grains: grains.iter().copied().collect(),
            response_latency: latency,
            staleness_hold: staleness,
            at_dialect: dialect,
            unsupported,
        })
    }

    pub fn method(&self) -> Method {
        match self.interface {
            Interface::Web => Method::Web,
            Interface::At => self.at_dialect.unwrap_or(AtDialect::Debug).method(),
            Interface::Tm => Method::XcalL3,
        }
    }

    pub fn effective_hold(&self) -> f64 {
        self.refresh_period + self.staleness_hold
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.refresh_period.is_finite() && self.refresh_period > 0.0) {
            return Err(ScenarioError::Invalid("refresh period must be positive"));
        }
        if !(self.staleness_hold.is_finite() && self.staleness_hold >= 0.0) {
            return Err(ScenarioError::Invalid("staleness hold must not be negative"));
        }
        if !(self.response_latency.is_finite() && self.response_latency >= 0.0) {
            return Err(ScenarioError::Invalid("response latency must not be negative"));
        }
        if self.interface == Interface::At && self.at_dialect.is_none() {
            return Err(ScenarioError::Invalid("AT profile needs a dialect"));
        }
        Ok(())
    }

    /// Fields this profile renders, from the reference coverage matrix.
    pub fn coverage(&self) -> BTreeSet<Field> {
        CoverageMatrix::reference()
            .get(self.method(), &self.device)
            .cloned()
            .unwrap_or_default()
    }

    /// Start of the hold window containing `t`.
    pub fn hold_start(&self, t: f64) -> f64 {
        let hold = self.effective_hold();
        libm::floor(t / hold + 1e-9) * hold
    }
}

/// Static identity values of each (method, device) as shown in the method
/// comparison: cell 16400395 on the dashboard and `AT^DEBUG?`, 16400398 on
/// `AT+SGCELLINFOEX?`, and the same carrier everywhere.
pub fn reference_identity(method: Method, device: &str) -> KpiSnapshot {
    let mut s = KpiSnapshot::new(method, device);
    let n258 = Band { number: 258, n_prefix: true };
    let b258 = Band { number: 258, n_prefix: false };
    let c = &mut s.cell;
    match (method, device) {
        (Method::Web, CPE_A) => {
            c.rat = Some(Rat::from_label("5G"));
            c.mcc = Some("286".into());
            c.mnc = Some("01".into());
            c.nr_cell_id = Some(16_400_395);
            c.pci = Some(2);
            c.band = Some(n258);
            c.arfcn = Some(2_058_427);
        }
        (Method::Web, _) => {
            c.rat = Some(Rat::from_label("5G"));
            c.pci = Some(2);
            c.band = Some(n258);
        }
        (Method::AtDebug, _) => {
            c.rat = Some(Rat::from_label("NR5G_SA"));
            c.mcc = Some("286".into());
            c.mnc = Some("01".into());
            c.nr_cell_id = Some(16_400_395);
            c.tac = Some(1000);
            c.band = Some(n258);
            c.arfcn = Some(2_058_427);
        }
        (Method::AtSgCellInfoEx, _) => {
            c.rat = Some(Rat::from_label("5G"));
            c.mcc = Some("286".into());
            c.mnc = Some("01".into());
            c.nr_cell_id = Some(16_400_398);
            c.tac = Some(1000);
            c.pci = Some(2);
            c.band = Some(b258);
            c.arfcn = Some(2_058_427);
            s.radio.freq_range_type = Some(FreqRange::Fr2);
            s.radio.duplex = Some(Duplex::Tdd);
        }
        (Method::XcalL3, _) => {
            c.rat = Some(Rat::from_label("5GNR"));
            c.pci = Some(2);
            c.band = Some(b258);
            c.arfcn = Some(2_058_427);
            s.radio.duplex = Some(Duplex::Tdd);
        }
    }
    s
}

/// Static numeric values (carrier bandwidth and sub-carrier spacing).
pub fn static_value(field: Field) -> Option<f64> {
    match field {
        Field::Bandwidth => Some(200.0),
        Field::Scs => Some(120.0),
        _ => None,
    }
}

/// Declared RSSI branch count and slot count on the `AT^DEBUG?` line.
pub const RSSI_DECLARED: u8 = 3;
pub const RSSI_SLOTS: usize = 4;

/// What the interface reports for `field` at time `t`: the truth at the
/// start of the current hold window, quantized to the profile grain.
pub fn sampled_value(
    t: f64,
    field: Field,
    profile: &InterfaceProfile,
    model: &ScenarioModel,
) -> Result<MeasurementValue, ScenarioError> {
    if !profile.coverage().contains(&field) {
        return Err(ScenarioError::NotCovered { field, method: profile.method() });
    }
    sample_unchecked(t, field, profile, model)
}

fn sample_unchecked(
    t: f64,
    field: Field,
    profile: &InterfaceProfile,
    model: &ScenarioModel,
) -> Result<MeasurementValue, ScenarioError> {
    let grain = *profile.grains.get(&field).ok_or(ScenarioError::MissingGrain(field))?;
    let value = match static_value(field) {
        Some(v) => v,
        None => model
            .truth(field, profile.hold_start(t))
            .ok_or(ScenarioError::NotMeasured(field))?,
    };
    Ok(MeasurementValue::quantize(value, grain, field.unit())?)
}

/// Per-branch RSSI slots at time `t`; branches beyond the model's offsets
/// are blank.
pub fn sampled_rssi(
    t: f64,
    profile: &InterfaceProfile,
    model: &ScenarioModel,
) -> Result<Vec<Option<MeasurementValue>>, ScenarioError> {
    let grain = *profile.grains.get(&Field::Rssi).ok_or(ScenarioError::MissingGrain(Field::Rssi))?;
    let t_eff = profile.hold_start(t);
    (0..RSSI_SLOTS)
        .map(|b| {
            model
                .rssi_branch_truth(b, t_eff)
                .map(|v| MeasurementValue::quantize(v, grain, Unit::Dbm).map_err(ScenarioError::from))
                .transpose()
        })
        .collect()
}

/// Everything the interface reports at time `t`.
pub fn emulated_snapshot(
    profile: &InterfaceProfile,
    model: &ScenarioModel,
    t: f64,
) -> Result<KpiSnapshot, ScenarioError> {
    let mut snap = reference_identity(profile.method(), &profile.device);
    let coverage = profile.coverage();
    for field in Field::MEASURED {
        if coverage.contains(&field) {
            snap.set_value(field, Some(sample_unchecked(t, field, profile, model)?));
        }
    }
    if coverage.contains(&Field::Rssi) {
        snap.radio.rssi_declared = Some(RSSI_DECLARED);
        snap.radio.rssi_branches = sampled_rssi(t, profile, model)?;
    }
    Ok(snap)
}
