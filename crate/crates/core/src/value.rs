//! Quantized measurement values.
//!
//! A [`MeasurementValue`] is stored as an integer number of grain steps, so
//! every value is an exact multiple of its grain and decimal rendering never
//! goes through float formatting.

use alloc::string::String;
use core::fmt;

const POW10: [i64; 19] = [
    1,
    10,
    100,
    1_000,
    10_000,
    100_000,
    1_000_000,
    10_000_000,
    100_000_000,
    1_000_000_000,
    10_000_000_000,
    100_000_000_000,
    1_000_000_000_000,
    10_000_000_000_000,
    100_000_000_000_000,
    1_000_000_000_000_000,
    10_000_000_000_000_000,
    100_000_000_000_000_000,
    1_000_000_000_000_000_000,
];

/// Largest decimal scale a grain may use.
pub const MAX_GRAIN_SCALE: u8 = 9;

/// Physical unit of a KPI value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Unit {
    Dbm,
    Db,
    Mhz,
    Khz,
    None,
}

impl Unit {
    pub fn label(self) -> &'static str {
        match self {
            Unit::Dbm => "dBm",
            Unit::Db => "dB",
            Unit::Mhz => "MHz",
            Unit::Khz => "kHz",
            Unit::None => "",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Quantization step expressed as `num · 10^-scale`.
///
/// Kept in normal form (`num` not divisible by 10 unless `scale` is 0) so that
/// derived equality matches numeric equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grain {
    num: u32,
    scale: u8,
}

impl Grain {
    pub const ONE: Grain = Grain { num: 1, scale: 0 };
    pub const HALF: Grain = Grain { num: 5, scale: 1 };
    pub const TENTH: Grain = Grain { num: 1, scale: 1 };
    pub const TWENTIETH: Grain = Grain { num: 5, scale: 2 };
    pub const HUNDREDTH: Grain = Grain { num: 1, scale: 2 };

    pub fn new(num: u32, scale: u8) -> Result<Grain, ValueError> {
        if num == 0 {
            return Err(ValueError::NonPositiveGrain);
        }
        if scale > MAX_GRAIN_SCALE {
            return Err(ValueError::GrainTooFine);
        }
        let (mut num, mut scale) = (num, scale);
        while scale > 0 && num % 10 == 0 {
            num /= 10;
            scale -= 1;
        }
        Ok(Grain { num, scale })
    }

    /// Grain of a value shown with `decimals` digits after the point.
    pub fn from_decimals(decimals: u8) -> Result<Grain, ValueError> {
        Grain::new(1, decimals)
    }

    /// Recover an exact grain from a float such as `0.01` or `0.5`.
    pub fn from_f64(grain: f64) -> Result<Grain, ValueError> {
        if !grain.is_finite() {
            return Err(ValueError::NonFinite);
        }
        if grain <= 0.0 {
            return Err(ValueError::NonPositiveGrain);
        }
        for scale in 0..=MAX_GRAIN_SCALE {
            let scaled = grain * POW10[scale as usize] as f64;
            let rounded = libm::round(scaled);
            if rounded >= 1.0
                && rounded <= u32::MAX as f64
                && libm::fabs(scaled - rounded) <= 1e-9 * rounded.max(1.0)
            {
                return Grain::new(rounded as u32, scale);
            }
        }
        Err(ValueError::GrainTooFine)
    }

    pub fn num(self) -> u32 {
        self.num
    }

    /// Number of decimal places needed to print multiples of this grain.
    pub fn decimals(self) -> u8 {
        self.scale
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / POW10[self.scale as usize] as f64
    }
}

impl fmt::Display for Grain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_scaled(self.num as i64, self.scale))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueError {
    NonFinite,
    NonPositiveGrain,
    GrainTooFine,
    OutOfRange,
    OffGrain,
    Malformed,
}

impl fmt::Display for ValueError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            ValueError::NonFinite => "value is not finite",
            ValueError::NonPositiveGrain => "grain must be positive",
            ValueError::GrainTooFine => "grain finer than 1e-9 is not supported",
            ValueError::OutOfRange => "value out of representable range",
            ValueError::OffGrain => "value is not a multiple of its grain",
            ValueError::Malformed => "malformed decimal number",
        };
        f.write_str(msg)
    }
}

impl core::error::Error for ValueError {}

/// A numeric KPI reading: value, unit and the quantization grain it was
/// reported with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeasurementValue {
    steps: i64,
    grain: Grain,
    unit: Unit,
}

impl MeasurementValue {
    /// Round `value` to the nearest multiple of `grain`, ties away from zero.
    pub fn quantize(value: f64, grain: Grain, unit: Unit) -> Result<Self, ValueError> {
        if !value.is_finite() {
            return Err(ValueError::NonFinite);
        }
        let q = value / grain.as_f64();
        if q.is_nan() || libm::fabs(q) >= 9.0e15 {
            return Err(ValueError::OutOfRange);
        }
        let mag = libm::fabs(q);
        let floor = libm::floor(mag);
        let frac = mag - floor;
        // Treat near-ties as ties so 0.15 / 0.1 rounds like the decimal it came from.
        let rounded = if libm::fabs(frac - 0.5) < 1e-9 || frac > 0.5 {
            floor + 1.0
        } else {
            floor
        };
        let steps = if q < 0.0 { -rounded } else { rounded } as i64;
        Ok(MeasurementValue { steps, grain, unit })
    }

    /// Exact construction from a decimal mantissa (`mantissa · 10^-scale`).
    pub fn from_scaled(mantissa: i64, scale: u8, grain: Grain, unit: Unit) -> Result<Self, ValueError> {
        let common = scale.max(grain.scale);
        if common as usize >= POW10.len() {
            return Err(ValueError::OutOfRange);
        }
        let m = mantissa
            .checked_mul(POW10[(common - scale) as usize])
            .ok_or(ValueError::OutOfRange)?;
        let g = (grain.num as i64)
            .checked_mul(POW10[(common - grain.scale) as usize])
            .ok_or(ValueError::OutOfRange)?;
        if m % g != 0 {
            return Err(ValueError::OffGrain);
        }
        Ok(MeasurementValue {
            steps: m / g,
            grain,
            unit,
        })
    }

    /// Parse a plain decimal literal (`-78.02`) exactly onto `grain`.
    pub fn parse_decimal(text: &str, grain: Grain, unit: Unit) -> Result<Self, ValueError> {
        let (mantissa, scale) = parse_decimal(text)?;
        Self::from_scaled(mantissa, scale, grain, unit)
    }

    pub fn value(&self) -> f64 {
        let (m, s) = self.scaled();
        m as f64 / POW10[s as usize] as f64
    }

    pub fn grain(&self) -> Grain {
        self.grain
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn steps(&self) -> i64 {
        self.steps
    }

    /// The value as `mantissa · 10^-scale` with `scale = grain.decimals()`.
    pub fn scaled(&self) -> (i64, u8) {
        (self.steps * self.grain.num as i64, self.grain.scale)
    }

    pub fn with_unit(self, unit: Unit) -> Self {
        MeasurementValue { unit, ..self }
    }

    /// Decimal text with exactly `grain.decimals()` fractional digits.
    pub fn to_decimal_string(&self) -> String {
        let (m, s) = self.scaled();
        format_scaled(m, s)
    }
}

impl fmt::Display for MeasurementValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())?;
        if self.unit != Unit::None {
            write!(f, " {}", self.unit)?;
        }
        Ok(())
    }
}

/// Round `value` to the nearest multiple of `grain` (unitless).
pub fn quantize(value: f64, grain: Grain) -> Result<MeasurementValue, ValueError> {
    MeasurementValue::quantize(value, grain, Unit::None)
}

/// Parse `[+-]digits[.digits]` into `(mantissa, decimals)` without going
/// through floating point.
pub fn parse_decimal(text: &str) -> Result<(i64, u8), ValueError> {
    let bytes = text.as_bytes();
    let (neg, digits) = match bytes.first() {
        Some(b'-') => (true, &bytes[1..]),
        Some(b'+') => (false, &bytes[1..]),
        _ => (false, bytes),
    };
    if digits.is_empty() {
        return Err(ValueError::Malformed);
    }
    let mut mantissa: i64 = 0;
    let mut scale: u8 = 0;
    let mut seen_point = false;
    let mut seen_digit = false;
    let mut digits_after_point = 0usize;
    for &b in digits {
        match b {
            b'0'..=b'9' => {
                mantissa = mantissa
                    .checked_mul(10)
                    .and_then(|m| m.checked_add((b - b'0') as i64))
                    .ok_or(ValueError::OutOfRange)?;
                seen_digit = true;
                if seen_point {
                    digits_after_point += 1;
                    if digits_after_point > 18 {
                        return Err(ValueError::OutOfRange);
                    }
                    scale += 1;
                }
            }
            b'.' if !seen_point && seen_digit => seen_point = true,
            _ => return Err(ValueError::Malformed),
        }
    }
    if !seen_digit || (seen_point && digits_after_point == 0) {
        return Err(ValueError::Malformed);
    }
    Ok((if neg { -mantissa } else { mantissa }, scale))
}

fn format_scaled(mantissa: i64, scale: u8) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    let neg = mantissa < 0;
    let abs = mantissa.unsigned_abs();
    if neg {
        out.push('-');
    }
    if scale == 0 {
        let _ = write!(out, "{abs}");
    } else {
        let p = POW10[scale as usize] as u64;
        let _ = write!(out, "{}.{:0width$}", abs / p, abs % p, width = scale as usize);
    }
    out
}
