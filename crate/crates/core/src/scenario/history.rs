//! CSV ingestion of historical hourly series and scenario sets.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};

use super::{assemble, DayProfile, Scenario, ScenarioError, ScenarioSet, SeriesUnit, TimeSeries};
use crate::model::HOURS_PER_YEAR;

const HISTORY_COLUMNS: [&str; 4] = ["timestamp", "load_multiplier", "pv_cf", "wind_cf"];
const SCENARIO_COLUMNS: [&str; 6] = [
    "scenario_id",
    "probability",
    "step",
    "load_multiplier",
    "pv_cf",
    "wind_cf",
];

/// Hourly historical record with contiguous timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoricalSeries {
    pub start: NaiveDateTime,
    pub load_multiplier: Vec<f64>,
    pub pv_cf: Vec<f64>,
    pub wind_cf: Vec<f64>,
}

impl HistoricalSeries {
    pub fn len(&self) -> usize {
        self.load_multiplier.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load_multiplier.is_empty()
    }

    pub fn start_hour_of_year(&self) -> f64 {
        let h = self.start.ordinal0() as f64 * 24.0 + self.start.hour() as f64;
        h.rem_euclid(HOURS_PER_YEAR)
    }

    pub fn to_scenario(&self, id: impl Into<String>) -> Result<Scenario, ScenarioError> {
        Scenario::new(
            id,
            self.start_hour_of_year(),
            TimeSeries::hourly(self.load_multiplier.clone(), SeriesUnit::Multiplier)?,
            TimeSeries::hourly(self.pv_cf.clone(), SeriesUnit::CapacityFactor)?,
            TimeSeries::hourly(self.wind_cf.clone(), SeriesUnit::CapacityFactor)?,
        )
    }

    /// Splits the record into whole calendar days, skipping a partial first
    /// and last day.
    pub fn to_day_profiles(&self) -> Vec<DayProfile> {
        let offset = (24 - self.start.hour() as usize) % 24;
        let mut days = Vec::new();
        let mut t = offset;
        while t + 24 <= self.len() {
            days.push(DayProfile {
                load: self.load_multiplier[t..t + 24].to_vec(),
                pv: self.pv_cf[t..t + 24].to_vec(),
                wind: self.wind_cf[t..t + 24].to_vec(),
            });
            t += 24;
        }
        days
    }
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.naive_utc());
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

fn column_indices(
    file: &str,
    headers: &csv::StringRecord,
    wanted: &[&str],
) -> Result<Vec<usize>, ScenarioError> {
    wanted
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| ScenarioError::MissingColumn {
                    file: file.to_string(),
                    column: name.to_string(),
                })
        })
        .collect()
}

fn csv_error(file: &str, e: csv::Error) -> ScenarioError {
    let line = e.position().map_or(0, |p| p.line());
    ScenarioError::Parse {
        file: file.to_string(),
        line,
        column: String::new(),
        message: e.to_string(),
    }
}

struct Row<'a> {
    file: &'a str,
    line: u64,
    record: csv::StringRecord,
}

impl Row<'_> {
    fn text(&self, idx: usize) -> &str {
        self.record.get(idx).unwrap_or("").trim()
    }

    fn number(&self, idx: usize, column: &str) -> Result<f64, ScenarioError> {
        let raw = self.text(idx);
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error(column, format!("expected a finite number, got `{raw}`"))),
        }
    }

    fn fraction(&self, idx: usize, column: &str) -> Result<f64, ScenarioError> {
        let v = self.number(idx, column)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(self.error(column, format!("capacity factor {v} outside [0, 1]")));
        }
        Ok(v)
    }

    fn error(&self, column: &str, message: String) -> ScenarioError {
        ScenarioError::Parse {
            file: self.file.to_string(),
            line: self.line,
            column: column.to_string(),
            message,
        }
    }
}

fn rows<'a, R: Read>(
    file: &'a str,
    reader: &'a mut csv::Reader<R>,
) -> impl Iterator<Item = Result<Row<'a>, ScenarioError>> + 'a {
    reader.records().map(move |r| {
        let record = r.map_err(|e| csv_error(file, e))?;
        let line = record.position().map_or(0, |p| p.line());
        Ok(Row { file, line, record })
    })
}

/// Parses `timestamp,load_multiplier,pv_cf,wind_cf` rows. Timestamps must be
/// ISO-8601 and advance by exactly one hour.
pub fn parse_history<R: Read>(input: R, file: &str) -> Result<HistoricalSeries, ScenarioError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(|e| csv_error(file, e))?.clone();
    let idx = column_indices(file, &headers, &HISTORY_COLUMNS)?;
    let mut start = None;
    let mut previous: Option<NaiveDateTime> = None;
    let (mut load, mut pv, mut wind) = (Vec::new(), Vec::new(), Vec::new());
    for row in rows(file, &mut reader) {
        let row = row?;
        let raw = row.text(idx[0]);
        let ts = parse_timestamp(raw)
            .ok_or_else(|| row.error("timestamp", format!("not an ISO-8601 timestamp: `{raw}`")))?;
        if let Some(prev) = previous {
            let expected = prev + Duration::hours(1);
            if ts > expected {
                return Err(ScenarioError::Gap {
                    file: file.to_string(),
                    line: row.line,
                    missing: expected.format("%Y-%m-%dT%H:%M:%S").to_string(),
                });
            }
            if ts != expected {
                return Err(row.error(
                    "timestamp",
                    format!(
                        "expected {}, got `{raw}`",
                        expected.format("%Y-%m-%dT%H:%M:%S")
                    ),
                ));
            }
        } else {
            start = Some(ts);
        }
        previous = Some(ts);
        load.push(row.number(idx[1], "load_multiplier")?);
        pv.push(row.fraction(idx[2], "pv_cf")?);
        wind.push(row.fraction(idx[3], "wind_cf")?);
    }
    let start = start.ok_or_else(|| ScenarioError::Io {
        file: file.to_string(),
        message: "no data rows".into(),
    })?;
    if (load.len() as f64) < 2.0 * HOURS_PER_YEAR {
        log::warn!(
            "{file}: {} hours of history covers less than two years; rare long scarcity events may be under-represented",
            load.len()
        );
    }
    Ok(HistoricalSeries {
        start,
        load_multiplier: load,
        pv_cf: pv,
        wind_cf: wind,
    })
}

fn open(path: &Path) -> Result<std::fs::File, ScenarioError> {
    std::fs::File::open(path).map_err(|e| ScenarioError::Io {
        file: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_history_csv(path: impl AsRef<Path>) -> Result<HistoricalSeries, ScenarioError> {
    let path = path.as_ref();
    parse_history(open(path)?, &path.display().to_string())
}

fn parse_scenario_rows<R: Read>(input: R, file: &str) -> Result<ScenarioSet, ScenarioError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(|e| csv_error(file, e))?.clone();
    let idx = column_indices(file, &headers, &SCENARIO_COLUMNS)?;
    struct Partial {
        probability: f64,
        load: Vec<f64>,
        pv: Vec<f64>,
        wind: Vec<f64>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut partial: BTreeMap<String, Partial> = BTreeMap::new();
    for row in rows(file, &mut reader) {
        let row = row?;
        let id = row.text(idx[0]).to_string();
        if id.is_empty() {
            return Err(row.error("scenario_id", "empty scenario id".into()));
        }
        let probability = row.number(idx[1], "probability")?;
        if probability <= 0.0 {
            return Err(row.error(
                "probability",
                format!("weight must be positive, got {probability}"),
            ));
        }
        let step_raw = row.text(idx[2]);
        let step: usize = step_raw.parse().map_err(|_| {
            row.error(
                "step",
                format!("expected a non-negative integer, got `{step_raw}`"),
            )
        })?;
        let entry = partial.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Partial {
                probability,
                load: Vec::new(),
                pv: Vec::new(),
                wind: Vec::new(),
            }
        });
        if step != entry.load.len() {
            return Err(row.error(
                "step",
                format!("expected step {}, got {step}", entry.load.len()),
            ));
        }
        if entry.probability != probability {
            return Err(row.error(
                "probability",
                format!("scenario `{id}` changes probability mid-series"),
            ));
        }
        entry.load.push(row.number(idx[3], "load_multiplier")?);
        entry.pv.push(row.fraction(idx[4], "pv_cf")?);
        entry.wind.push(row.fraction(idx[5], "wind_cf")?);
    }
    let mut scenarios = Vec::with_capacity(order.len());
    let mut weights = Vec::with_capacity(order.len());
    for id in order {
        let p = partial.remove(&id).expect("id recorded on insert");
        weights.push(p.probability);
        scenarios.push(Scenario::new(
            id,
            0.0,
            TimeSeries::hourly(p.load, SeriesUnit::Multiplier)?,
            TimeSeries::hourly(p.pv, SeriesUnit::CapacityFactor)?,
            TimeSeries::hourly(p.wind, SeriesUnit::CapacityFactor)?,
        )?);
    }
    assemble(scenarios, &weights)
}

/// Reads a scenario set. A `scenario_id,probability,step,...` file yields one
/// scenario per id with its probability column used as a weight; a
/// `timestamp,...` history file yields a single scenario.
pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioSet, ScenarioError> {
    let path = path.as_ref();
    let file = path.display().to_string();
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| ScenarioError::Io {
            file: file.clone(),
            message: e.to_string(),
        })?;
    let header = text.lines().next().unwrap_or("");
    if header.split(',').any(|h| h.trim() == "timestamp") {
        let history = parse_history(text.as_bytes(), &file)?;
        let stem = path.file_stem().map_or_else(
            || "history".to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        ScenarioSet::single(history.to_scenario(stem)?)
    } else {
        parse_scenario_rows(text.as_bytes(), &file)
    }
}

pub fn parse_scenario_csv<R: Read>(input: R, file: &str) -> Result<ScenarioSet, ScenarioError> {
    parse_scenario_rows(input, file)
}

pub fn write_scenario_csv<W: Write>(set: &ScenarioSet, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCENARIO_COLUMNS)?;
    for s in &set.scenarios {
        for t in 0..s.len() {
            w.write_record([
                s.id.clone(),
                s.probability.to_string(),
                t.to_string(),
                s.load.values[t].to_string(),
                s.pv_cf.values[t].to_string(),
                s.wind_cf.values[t].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguous_history_parses() {
        let csv = "timestamp,load_multiplier,pv_cf,wind_cf\n\
                   2021-03-01T00:00:00,1.0,0.0,0.4\n\
                   2021-03-01T01:00:00,0.9,0.1,0.5\n";
        let h = parse_history(csv.as_bytes(), "h.csv").unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.start_hour_of_year(), 59.0 * 24.0);
        let s = h.to_scenario("h").unwrap();
        assert_eq!(s.calendar(0), (0, 2));
    }

    #[test]
    fn gap_reports_first_missing_timestamp() {
        let csv = "timestamp,load_multiplier,pv_cf,wind_cf\n\
                   2021-01-01T00:00:00,1,0,0\n\
                   2021-01-01T03:00:00,1,0,0\n";
        match parse_history(csv.as_bytes(), "h.csv") {
            Err(ScenarioError::Gap { missing, line, .. }) => {
                assert_eq!(missing, "2021-01-01T01:00:00");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let csv = "timestamp,load_multiplier,pv_cf\n2021-01-01T00:00:00,1,0\n";
        let err = parse_history(csv.as_bytes(), "h.csv").unwrap_err();
        assert!(err.to_string().contains("wind_cf"), "{err}");
    }

    #[test]
    fn bad_value_names_line_and_column() {
        let csv = "timestamp,load_multiplier,pv_cf,wind_cf\n2021-01-01T00:00:00,1,abc,0\n";
        let err = parse_history(csv.as_bytes(), "h.csv")
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("h.csv:2: column `pv_cf`"), "{err}");
    }

    #[test]
    fn day_profiles_skip_partial_days() {
        let n = 60;
        let h = HistoricalSeries {
            start: NaiveDate::from_ymd_opt(2021, 1, 1)
                .unwrap()
                .and_hms_opt(20, 0, 0)
                .unwrap(),
            load_multiplier: (0..n).map(|i| i as f64).collect(),
            pv_cf: vec![0.0; n],
            wind_cf: vec![0.0; n],
        };
        let days = h.to_day_profiles();
        assert_eq!(days.len(), 2);
        assert_eq!(days[0].load[0], 4.0);
    }

    #[test]
    fn scenario_csv_round_trip() {
        let a = Scenario::flat("a", 3, 1.0, 0.2, 0.3).unwrap();
        let b = Scenario::flat("b", 3, 1.1, 0.4, 0.1).unwrap();
        let set = assemble(vec![a, b], &[1.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        write_scenario_csv(&set, &mut buf).unwrap();
        let back = parse_scenario_csv(buf.as_slice(), "s.csv").unwrap();
        assert_eq!(back, set);
    }
}
