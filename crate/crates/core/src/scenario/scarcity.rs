use serde::{Deserialize, Serialize};

use super::{ScenarioError, SeriesUnit, TimeSeries};

/// A maximal run of consecutive steps whose combined capacity factor stays
/// below the detection threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScarcityEvent {
    pub start_step: usize,
    pub duration_hours: f64,
    pub min_cf: f64,
}

/// Capacity-weighted mean of pv and wind capacity factors. With no installed
/// renewable capacity the two resources are weighted equally.
pub fn combined_capacity_factor(
    pv: &TimeSeries,
    wind: &TimeSeries,
    pv_kw: f64,
    wind_kw: f64,
) -> Result<TimeSeries, ScenarioError> {
    if pv.len() != wind.len() || pv.step_hours != wind.step_hours {
        return Err(ScenarioError::LengthMismatch(
            "pv and wind series differ".into(),
        ));
    }
    let (wp, ww) = if pv_kw + wind_kw > 0.0 {
        (pv_kw / (pv_kw + wind_kw), wind_kw / (pv_kw + wind_kw))
    } else {
        (0.5, 0.5)
    };
    let values = pv
        .values
        .iter()
        .zip(&wind.values)
        .map(|(p, w)| (wp * p + ww * w).clamp(0.0, 1.0))
        .collect();
    TimeSeries::new(pv.step_hours, values, SeriesUnit::CapacityFactor)
}

pub fn detect_scarcity(
    combined_cf: &TimeSeries,
    threshold: f64,
) -> Result<Vec<ScarcityEvent>, ScenarioError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(ScenarioError::InvalidThreshold(threshold));
    }
    let mut events = Vec::new();
    let mut open: Option<(usize, f64)> = None;
    let close = |start: usize, end: usize, min_cf: f64| ScarcityEvent {
        start_step: start,
        duration_hours: (end - start) as f64 * combined_cf.step_hours,
        min_cf,
    };
    for (t, &v) in combined_cf.values.iter().enumerate() {
        match (&mut open, v < threshold) {
            (Some((_, min)), true) => *min = min.min(v),
            (None, true) => open = Some((t, v)),
            (Some((start, min)), false) => {
                events.push(close(*start, t, *min));
                open = None;
            }
            (None, false) => {}
        }
    }
    if let Some((start, min)) = open {
        events.push(close(start, combined_cf.len(), min));
    }
    Ok(events)
}

/// Nearest-rank p-quantile of event durations: the value at rank ⌈p·n⌉ of the
/// sorted durations.
pub fn scarcity_percentile(events: &[ScarcityEvent], p: f64) -> Result<f64, ScenarioError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(ScenarioError::InvalidPercentile(p));
    }
    if events.is_empty() {
        return Err(ScenarioError::NoScarcityEvents);
    }
    let mut durations: Vec<f64> = events.iter().map(|e| e.duration_hours).collect();
    durations.sort_by(f64::total_cmp);
    let n = durations.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    Ok(durations[rank - 1])
}
