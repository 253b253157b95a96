//! Probability-weighted chronological scenarios of demand and renewable
//! resource, scarcity-event detection and regime-based resampling.

mod history;
mod regime;
mod scarcity;

pub use history::{
    load_history_csv, load_scenario_file, parse_history, parse_scenario_csv, write_scenario_csv,
    HistoricalSeries,
};
pub use regime::{fit_regimes, sample_chronology, Chronology, DayProfile, RegimeModel};
pub use scarcity::{combined_capacity_factor, detect_scarcity, scarcity_percentile, ScarcityEvent};

use serde::{Deserialize, Serialize};

use crate::model::HOURS_PER_YEAR;

/// Tolerance on Σ π_s = 1.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

const DAYS_PER_MONTH: [usize; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("step_hours must be > 0, got {0}")]
    InvalidStep(f64),
    #[error("capacity factor {value} at step {step} outside [0, 1]")]
    CapacityFactorRange { step: usize, value: f64 },
    #[error("non-finite value at step {0}")]
    NonFinite(usize),
    #[error("series length mismatch: {0}")]
    LengthMismatch(String),
    #[error("scenario weights must be positive and finite")]
    InvalidWeight,
    #[error("scenario probability {0} outside (0, 1]")]
    InvalidProbability(f64),
    #[error("scenario probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("mismatched horizons: scenario `{id}` has {found} steps, expected {expected}")]
    HorizonMismatch {
        id: String,
        found: usize,
        expected: usize,
    },
    #[error("scenario set is empty")]
    Empty,
    #[error("threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("percentile {0} outside (0, 1]")]
    InvalidPercentile(f64),
    #[error("no scarcity events")]
    NoScarcityEvents,
    #[error("need at least {needed} distinct days to fit {needed} regimes, got {found}")]
    TooFewDays { needed: usize, found: usize },
    #[error("regime_count must be >= 2, got {0}")]
    TooFewRegimes(usize),
    #[error("horizon_days must be >= 1")]
    EmptyHorizon,
    #[error("regime {0} has an empty day pool")]
    EmptyRegimePool(usize),
    #[error("day profile {index} has {found} values, expected {expected}")]
    DayLength {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("{file}:{line}: column `{column}`: {message}")]
    Parse {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}:{line}: gap in hourly series, first missing timestamp {missing}")]
    Gap {
        file: String,
        line: u64,
        missing: String,
    },
    #[error("{file}: {message}")]
    Io { file: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesUnit {
    Kw,
    CapacityFactor,
    Multiplier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub step_hours: f64,
    pub values: Vec<f64>,
    pub unit: SeriesUnit,
}

impl TimeSeries {
    pub fn new(step_hours: f64, values: Vec<f64>, unit: SeriesUnit) -> Result<Self, ScenarioError> {
        if !(step_hours.is_finite() && step_hours > 0.0) {
            return Err(ScenarioError::InvalidStep(step_hours));
        }
        for (step, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(ScenarioError::NonFinite(step));
            }
            if unit == SeriesUnit::CapacityFactor && !(0.0..=1.0).contains(&value) {
                return Err(ScenarioError::CapacityFactorRange { step, value });
            }
        }
        Ok(TimeSeries {
            step_hours,
            values,
            unit,
        })
    }

    pub fn hourly(values: Vec<f64>, unit: SeriesUnit) -> Result<Self, ScenarioError> {
        Self::new(1.0, values, unit)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration_hours(&self) -> f64 {
        self.values.len() as f64 * self.step_hours
    }
}

fn default_probability() -> f64 {
    1.0
}

/// One chronological demand/resource trajectory. `load` is a system-level
/// multiplier applied on top of each load point's hourly/monthly profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    #[serde(default = "default_probability")]
    pub probability: f64,
    /// Hour of year (0 = 1 January 00:00) at which step 0 starts.
    #[serde(default)]
    pub start_hour_of_year: f64,
    pub load: TimeSeries,
    pub pv_cf: TimeSeries,
    pub wind_cf: TimeSeries,
}

impl Scenario {
    pub fn new(
        id: impl Into<String>,
        start_hour_of_year: f64,
        load: TimeSeries,
        pv_cf: TimeSeries,
        wind_cf: TimeSeries,
    ) -> Result<Self, ScenarioError> {
        let scenario = Scenario {
            id: id.into(),
            probability: 1.0,
            start_hour_of_year,
            load,
            pv_cf,
            wind_cf,
        };
        scenario.check()?;
        Ok(scenario)
    }

    /// Constant-multiplier scenario with fixed capacity factors.
    pub fn flat(
        id: impl Into<String>,
        steps: usize,
        load_multiplier: f64,
        pv_cf: f64,
        wind_cf: f64,
    ) -> Result<Self, ScenarioError> {
        Self::new(
            id,
            0.0,
            TimeSeries::hourly(vec![load_multiplier; steps], SeriesUnit::Multiplier)?,
            TimeSeries::hourly(vec![pv_cf; steps], SeriesUnit::CapacityFactor)?,
            TimeSeries::hourly(vec![wind_cf; steps], SeriesUnit::CapacityFactor)?,
        )
    }

    fn check(&self) -> Result<(), ScenarioError> {
        let n = self.load.len();
        let step = self.load.step_hours;
        for (name, s) in [("pv_cf", &self.pv_cf), ("wind_cf", &self.wind_cf)] {
            if s.len() != n || s.step_hours != step {
                return Err(ScenarioError::LengthMismatch(format!(
                    "scenario `{}`: {name} has {} steps of {} h, load has {n} steps of {step} h",
                    self.id,
                    s.len(),
                    s.step_hours
                )));
            }
            if s.unit != SeriesUnit::CapacityFactor {
                return Err(ScenarioError::LengthMismatch(format!(
                    "scenario `{}`: {name} must be a capacity-factor series",
                    self.id
                )));
            }
        }
        if !(self.probability > 0.0 && self.probability <= 1.0) {
            return Err(ScenarioError::InvalidProbability(self.probability));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    pub fn step_hours(&self) -> f64 {
        self.load.step_hours
    }

    /// Hour of day and month (both zero-based) at the start of step `t`,
    /// on a 365-day calendar.
    pub fn calendar(&self, t: usize) -> (usize, usize) {
        let hour_of_year = (self.start_hour_of_year + t as f64 * self.step_hours())
            .rem_euclid(HOURS_PER_YEAR)
            .floor() as usize;
        let hour = hour_of_year % 24;
        let mut day = hour_of_year / 24;
        let mut month = 0;
        while month < 11 && day >= DAYS_PER_MONTH[month] {
            day -= DAYS_PER_MONTH[month];
            month += 1;
        }
        (hour, month)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub horizon_steps: usize,
}

impl ScenarioSet {
    pub fn step_hours(&self) -> f64 {
        self.scenarios.first().map_or(1.0, Scenario::step_hours)
    }

    pub fn horizon_hours(&self) -> f64 {
        self.horizon_steps as f64 * self.step_hours()
    }

    pub fn single(scenario: Scenario) -> Result<Self, ScenarioError> {
        assemble(vec![scenario], &[1.0])
    }

    /// Checks the set invariants: non-empty, shared horizon and step, Σ π_s = 1.
    pub fn check(&self) -> Result<(), ScenarioError> {
        let first = self.scenarios.first().ok_or(ScenarioError::Empty)?;
        let step = first.step_hours();
        for s in &self.scenarios {
            s.check()?;
            if s.len() != self.horizon_steps {
                return Err(ScenarioError::HorizonMismatch {
                    id: s.id.clone(),
                    found: s.len(),
                    expected: self.horizon_steps,
                });
            }
            if s.step_hours() != step {
                return Err(ScenarioError::LengthMismatch(format!(
                    "scenario `{}` uses {} h steps, expected {step} h",
                    s.id,
                    s.step_hours()
                )));
            }
        }
        let sum: f64 = self.scenarios.iter().map(|s| s.probability).sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(ScenarioError::ProbabilitySum(sum));
        }
        Ok(())
    }
}

/// Normalizes `weights` into scenario probabilities and checks that all
/// scenarios share one horizon and step.
pub fn assemble(
    mut scenarios: Vec<Scenario>,
    weights: &[f64],
) -> Result<ScenarioSet, ScenarioError> {
    if scenarios.is_empty() {
        return Err(ScenarioError::Empty);
    }
    if weights.len() != scenarios.len() {
        return Err(ScenarioError::LengthMismatch(format!(
            "{} scenarios but {} weights",
            scenarios.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(ScenarioError::InvalidWeight);
    }
    // Scale by the largest weight first so huge or tiny inputs normalize cleanly.
    let max = weights.iter().copied().fold(0.0, f64::max);
    let scaled: Vec<f64> = weights.iter().map(|w| w / max).collect();
    let total: f64 = scaled.iter().sum();
    for (s, w) in scenarios.iter_mut().zip(&scaled) {
        s.probability = w / total;
    }
    let horizon_steps = scenarios[0].len();
    let set = ScenarioSet {
        scenarios,
        horizon_steps,
    };
    set.check()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(id: &str, n: usize) -> Scenario {
        Scenario::flat(id, n, 1.0, 0.3, 0.2).unwrap()
    }

    #[test]
    fn equal_weights_split_evenly() {
        let set = assemble(vec![flat("a", 4), flat("b", 4)], &[2.0, 2.0]).unwrap();
        assert_eq!(set.scenarios[0].probability, 0.5);
        assert_eq!(set.scenarios[1].probability, 0.5);
    }

    #[test]
    fn single_scenario_gets_probability_one() {
        let set = assemble(vec![flat("a", 4)], &[17.0]).unwrap();
        assert_eq!(set.scenarios[0].probability, 1.0);
    }

    #[test]
    fn one_to_three_weights() {
        let set = assemble(vec![flat("a", 4), flat("b", 4)], &[1.0, 3.0]).unwrap();
        assert_eq!(set.scenarios[0].probability, 0.25);
        assert_eq!(set.scenarios[1].probability, 0.75);
    }

    #[test]
    fn mismatched_horizons_rejected() {
        let err = assemble(vec![flat("a", 4), flat("b", 5)], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, ScenarioError::HorizonMismatch { .. }));
    }

    #[test]
    fn capacity_factor_range_enforced() {
        assert!(TimeSeries::hourly(vec![0.5, 1.2], SeriesUnit::CapacityFactor).is_err());
        assert!(TimeSeries::new(0.0, vec![], SeriesUnit::Kw).is_err());
    }

    #[test]
    fn calendar_mapping() {
        let s = flat("a", 8760);
        assert_eq!(s.calendar(0), (0, 0));
        assert_eq!(s.calendar(25), (1, 0));
        // 1 March 00:00 is hour (31 + 28) * 24
        assert_eq!(s.calendar(59 * 24), (0, 2));
        assert_eq!(s.calendar(8759), (23, 11));
    }
}
