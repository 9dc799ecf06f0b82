//! Comparison metrics over collected series: refresh period, value grain,
//! tracking error and lag against the ground-truth model.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{Field, Method};
use crate::scenario::ScenarioModel;
use crate::series::KpiSeries;
use crate::value::Grain;

/// Candidate grains, coarsest first.
pub const GRAIN_LADDER: [Grain; 5] = [Grain::ONE, Grain::HALF, Grain::TENTH, Grain::TWENTIETH, Grain::HUNDREDTH];
pub const GRAIN_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_LAG_S: f64 = 5.0;
pub const LAG_STEP_S: f64 = 0.05;
pub const MIN_VALUE_CHANGES: usize = 3;
pub const MIN_TRACKING_SAMPLES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    InsufficientVariation { field: Field, changes: usize },
    InsufficientData { field: Field, samples: usize },
    NotTracked(Field),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::InsufficientVariation { field, changes } => {
                write!(f, "insufficient variation: {field} changed {changes} times")
            }
            AnalysisError::InsufficientData { field, samples } => {
                write!(f, "insufficient data: {samples} samples of {field}")
            }
            AnalysisError::NotTracked(field) => write!(f, "{field} has no ground truth"),
        }
    }
}

impl core::error::Error for AnalysisError {}

/// `(seconds, value)` points of one field, skipping samples without it.
pub fn field_points(series: &KpiSeries, field: Field) -> Vec<(f64, f64)> {
    series
        .samples()
        .iter()
        .filter_map(|s| s.value(field).map(|v| (s.timestamp.mono_secs(), v.value())))
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Median interval between consecutive instants at which the value changes.
pub fn estimate_refresh_period(series: &KpiSeries, field: Field) -> Result<f64, AnalysisError> {
    refresh_period_of(&field_points(series, field), field)
}

pub fn refresh_period_of(points: &[(f64, f64)], field: Field) -> Result<f64, AnalysisError> {
    let changes: Vec<f64> = points
        .windows(2)
        .filter(|w| w[1].1 != w[0].1)
        .map(|w| w[1].0)
        .collect();
    if changes.len() < MIN_VALUE_CHANGES {
        return Err(AnalysisError::InsufficientVariation { field, changes: changes.len() });
    }
    let mut gaps: Vec<f64> = changes.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(median(&mut gaps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrainEstimate {
    pub grain: Grain,
    /// Set when no ladder grain fits and the finest one was returned.
    pub warning: bool,
}

pub fn estimate_grain(series: &KpiSeries, field: Field) -> Result<GrainEstimate, AnalysisError> {
    let values: Vec<f64> = field_points(series, field).into_iter().map(|(_, v)| v).collect();
    grain_of(&values, field)
}

pub fn grain_of(values: &[f64], field: Field) -> Result<GrainEstimate, AnalysisError> {
    let distinct = values.iter().skip(1).any(|v| *v != values[0]);
    if !distinct {
        return Err(AnalysisError::InsufficientVariation { field, changes: 0 });
    }
    for grain in GRAIN_LADDER {
        let g = grain.as_f64();
        if values
            .iter()
            .all(|v| libm::fabs(v - libm::round(v / g) * g) <= GRAIN_TOLERANCE)
        {
            return Ok(GrainEstimate { grain, warning: false });
        }
    }
    Ok(GrainEstimate { grain: Grain::HUNDREDTH, warning: true })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tracking {
    pub rmse: f64,
    pub lag: f64,
    pub correlation: f64,
}

/// Compare a series with the truth delayed by `lag`, for each lag on a
/// 0.05 s grid in `[0, max_lag]`. The best lag maximises the Pearson
/// correlation (ties go to the shorter lag); rmse is taken at that lag.
pub fn tracking_error(series: &KpiSeries, truth: &ScenarioModel, field: Field) -> Result<Tracking, AnalysisError> {
    tracking_error_with(series, truth, field, DEFAULT_MAX_LAG_S)
}

pub fn tracking_error_with(
    series: &KpiSeries,
    truth: &ScenarioModel,
    field: Field,
    max_lag: f64,
) -> Result<Tracking, AnalysisError> {
    truth.truth(field, 0.0).ok_or(AnalysisError::NotTracked(field))?;
    let points = field_points(series, field);
    tracking_of(&points, |t| truth.truth(field, t).unwrap_or(f64::NAN), field, max_lag)
}

pub fn tracking_of<F: Fn(f64) -> f64>(
    points: &[(f64, f64)],
    truth: F,
    field: Field,
    max_lag: f64,
) -> Result<Tracking, AnalysisError> {
    if points.len() < MIN_TRACKING_SAMPLES {
        return Err(AnalysisError::InsufficientData { field, samples: points.len() });
    }
    let steps = libm::floor(max_lag.max(0.0) / LAG_STEP_S + 1e-9) as usize;
    let mut shifted = Vec::with_capacity(points.len());
    let mut best: Option<Tracking> = None;
    for k in 0..=steps {
        let lag = k as f64 * LAG_STEP_S;
        shifted.clear();
        shifted.extend(points.iter().map(|&(t, _)| truth(t - lag)));
        let observed = points.iter().map(|p| p.1);
        let corr = pearson(observed.clone(), shifted.iter().copied());
        let sq: f64 = observed.zip(&shifted).map(|(a, b)| (a - b) * (a - b)).sum();
        let rmse = libm::sqrt(sq / points.len() as f64);
        let score = if corr.is_finite() { corr } else { f64::NEG_INFINITY };
        let better = match &best {
            None => true,
            Some(b) => {
                let best_score = if b.correlation.is_finite() { b.correlation } else { f64::NEG_INFINITY };
                score > best_score + 1e-12
            }
        };
        if better {
            best = Some(Tracking { rmse, lag, correlation: corr });
        }
    }
    Ok(best.expect("lag grid is never empty"))
}

fn pearson<A, B>(a: A, b: B) -> f64
where
    A: Iterator<Item = f64> + Clone,
    B: Iterator<Item = f64> + Clone,
{
    let n = a.clone().count() as f64;
    let ma = a.clone().sum::<f64>() / n;
    let mb = b.clone().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    sab / libm::sqrt(saa * sbb)
}

/// One row of the comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodMetrics {
    pub method: Method,
    pub device: String,
    pub field: Field,
    pub effective_refresh_period: Option<f64>,
    pub estimated_grain: Option<GrainEstimate>,
    pub rmse_vs_truth: Option<f64>,
    pub lag_vs_truth: Option<f64>,
    pub sample_count: usize,
    pub error_count: usize,
    /// Why a metric is blank, one note per failed estimate.
    pub notes: Vec<String>,
}

pub fn method_metrics(series: &KpiSeries, truth: Option<&ScenarioModel>, field: Field) -> MethodMetrics {
    use alloc::string::ToString;
    let mut notes = Vec::new();
    let refresh = estimate_refresh_period(series, field).map_err(|e| notes.push(e.to_string())).ok();
    let grain = estimate_grain(series, field).map_err(|e| notes.push(e.to_string())).ok();
    if grain.is_some_and(|g| g.warning) {
        notes.push("no ladder grain fits".into());
    }
    let tracking = truth.and_then(|m| tracking_error(series, m, field).map_err(|e| notes.push(e.to_string())).ok());
    notes.dedup();
    MethodMetrics {
        method: series.descriptor.method,
        device: series.descriptor.device.clone(),
        field,
        effective_refresh_period: refresh,
        estimated_grain: grain,
        rmse_vs_truth: tracking.map(|t| t.rmse),
        lag_vs_truth: tracking.map(|t| t.lag),
        sample_count: series.len(),
        error_count: series.meta.errors.len(),
        notes,
    }
}
