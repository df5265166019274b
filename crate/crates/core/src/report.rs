//! Labeled `(label, value)` tables behind each chart, written as CSV and
//! JSON.
//!
//! CSV files have the header `label,value`, LF line endings, and values with
//! at most six significant digits (integers are printed exactly). A missing
//! value is an empty field. JSON files carry the full table, including the
//! provenance of every number and any per-row error note.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::analytics::{self, AnalysisSettings};
use crate::ingest::HistoryStore;
use crate::sim::SimTrace;
use crate::time::{TimeWindow, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// The operation and parameters a table was computed from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub operation: String,
    pub parameters: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad value {0:?}")]
    Value(String),
}

/// Formats with at most six significant digits, without exponent notation.
pub fn format_value(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if value.fract() == 0.0 && value.abs() < 1e15 {
        return format!("{}", value as i64);
    }
    let sci = format!("{value:.5e}");
    let (mantissa, exponent) = sci.split_once('e').expect("exponent notation");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let point = exponent + 1;
    let mut text = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
    };
    if text.contains('.') {
        text = text.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if negative {
        format!("-{text}")
    } else {
        text
    }
}

impl ReportTable {
    fn new(title: &str, x_label: &str, y_label: &str, operation: &str, parameters: &[(&str, String)]) -> Self {
        ReportTable {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            rows: Vec::new(),
            provenance: Provenance {
                operation: operation.to_string(),
                parameters: parameters.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            },
        }
    }

    fn push<E: std::fmt::Display>(&mut self, label: impl ToString, value: Result<f64, E>) {
        let (value, note) = match value {
            Ok(v) if v.is_finite() => (Some(v), None),
            Ok(v) => (None, Some(format!("non-finite value {v}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        self.rows.push(ReportRow { label: label.to_string(), value, note });
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(["label", "value"])?;
        for row in &self.rows {
            writer.write_record([row.label.as_str(), &row.value.map(format_value).unwrap_or_default()])?;
        }
        let bytes = writer.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of UTF-8 input"))
    }

    /// Reads back the `(label, value)` pairs of a CSV table.
    pub fn rows_from_csv(text: &str) -> Result<Vec<(String, Option<f64>)>, ReportError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        reader
            .records()
            .map(|record| {
                let record = record?;
                let label = record.get(0).unwrap_or_default().to_string();
                let raw = record.get(1).unwrap_or_default();
                let value = if raw.is_empty() {
                    None
                } else {
                    Some(raw.parse().map_err(|_| ReportError::Value(raw.to_string()))?)
                };
                Ok((label, value))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Expected bikes per station on `date`.
pub fn fig_forecast(store: &HistoryStore, date: NaiveDate, settings: &AnalysisSettings) -> ReportTable {
    let mut table = ReportTable::new(
        "Bikes expected at each station",
        "station",
        "bikes",
        "forecast_available_bikes",
        &[("date", date.to_string()), ("weights", settings.forecast_weights.to_string())],
    );
    for id in store.station_ids() {
        let value = analytics::forecast_available_bikes(store, id, date, &settings.forecast_weights, &settings.windows)
            .map(|f| f.n_expected);
        table.push(id, value);
    }
    table
}

/// Trip starts plus ends per station during one clock hour.
pub fn fig_busy_by_hour(store: &HistoryStore, hour: u32, window: &TimeWindow) -> ReportTable {
    let mut table = ReportTable::new(
        "Station busyness at one hour of day",
        "station",
        "trips",
        "hourly_busyness",
        &[("hour", hour.to_string()), ("window", window.to_string())],
    );
    for id in store.station_ids() {
        table.push(id, analytics::hourly_busyness(store, id, hour, window).map(|n| n as f64));
    }
    table
}

/// Number of calendar days the window covers within the store's data.
pub fn window_day_count(store: &HistoryStore, window: &TimeWindow) -> Option<u64> {
    let (first, last) = store.time_span()?;
    let start = window.start.max(first);
    let end_inclusive = window.end.plus_seconds(-1).min(last);
    if end_inclusive < start {
        return None;
    }
    Some((end_inclusive.date() - start.date()).num_days() as u64 + 1)
}

/// Hourly busyness divided by the number of days in the window.
pub fn fig_busy_density(store: &HistoryStore, hour: u32, window: &TimeWindow) -> ReportTable {
    let days = window_day_count(store, window);
    let mut table = ReportTable::new(
        "Density of station busyness at one hour of day",
        "station",
        "trips per day",
        "hourly_busyness / days",
        &[
            ("hour", hour.to_string()),
            ("window", window.to_string()),
            ("days", days.map_or_else(|| "none".to_string(), |d| d.to_string())),
        ],
    );
    for id in store.station_ids() {
        let value = analytics::hourly_busyness(store, id, hour, window)
            .map_err(|e| e.to_string())
            .and_then(|n| days.map(|d| n as f64 / d as f64).ok_or_else(|| "no data in window".to_string()));
        table.push(id, value);
    }
    table
}

/// Outbound trips per station.
pub fn fig_trips_per_station(store: &HistoryStore, window: &TimeWindow) -> ReportTable {
    let mut table = ReportTable::new(
        "Trips from each station",
        "station",
        "trips",
        "outbound_trips",
        &[("window", window.to_string())],
    );
    for id in store.station_ids() {
        table.push(id, analytics::outbound_trips(store, id, window).map(|n| n as f64));
    }
    table
}

/// Available bikes plus empty docks per station at `at`.
pub fn fig_load_factor(store: &HistoryStore, at: Timestamp) -> ReportTable {
    let mut table = ReportTable::new(
        "Station load factor",
        "station",
        "bikes + empty docks",
        "load_factor",
        &[("at", at.to_string())],
    );
    for id in store.station_ids() {
        table.push(id, analytics::load_factor(store, id, at).map(|r| f64::from(r.load_factor)));
    }
    table
}

/// Probability of a bike being available at each minute after `arrival`.
/// Always has `horizon + 1` rows.
pub fn fig_wait_series(
    store: &HistoryStore,
    station_id: u32,
    arrival: Timestamp,
    settings: &AnalysisSettings,
) -> ReportTable {
    let mut table = ReportTable::new(
        "Probability of a bike being available",
        "minutes after arrival",
        "probability",
        "wait_probability_series",
        &[
            ("station", station_id.to_string()),
            ("arrival", arrival.to_string()),
            ("weights", settings.wait_weights.to_string()),
            ("horizon_minutes", settings.horizon_minutes.to_string()),
        ],
    );
    match analytics::wait_probability_series(
        store,
        station_id,
        arrival,
        &settings.wait_weights,
        &settings.windows,
        settings.horizon_minutes,
    ) {
        Ok(series) => {
            for point in &series.points {
                table.push(point.minute_offset, point.probability.ok_or("no readings near this minute"));
            }
        }
        Err(e) => {
            for minute in 0..=settings.horizon_minutes {
                table.push(minute, Err::<f64, _>(&e));
            }
        }
    }
    table
}

/// Per-bike sent and per-station received bytes.
pub fn sim_summary(trace: &SimTrace) -> ReportTable {
    let mut table = ReportTable::new("Simulated data transfer", "node", "bytes", "summarize_trace", &[]);
    for (bike, bytes) in &trace.sent_by_bike {
        table.push(format!("bike {bike} sent"), Ok::<_, String>(*bytes as f64));
    }
    for (station, bytes) in &trace.received_by_station {
        table.push(format!("station {station} received"), Ok::<_, String>(*bytes as f64));
    }
    table
}

/// Parameters for a full set of figure tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportParams {
    pub forecast_date: NaiveDate,
    pub hour: u32,
    pub window: TimeWindow,
    pub at: Timestamp,
    pub wait_station: u32,
    pub arrival: Timestamp,
}

impl ReportParams {
    /// Defaults from the data: forecast for the day after the last reading,
    /// load and wait at the last instant seen, the lowest station id, hour 8
    /// and the whole history.
    pub fn defaults_for(store: &HistoryStore) -> Self {
        let last = store.time_span().map_or_else(|| Timestamp::new(2014, 1, 1, 0, 0, 0).expect("valid"), |(_, l)| l);
        ReportParams {
            forecast_date: last.date() + Duration::days(1),
            hour: 8,
            window: TimeWindow::everything(),
            at: last,
            wait_station: store.station_ids().next().unwrap_or(0),
            arrival: last,
        }
    }
}

/// All six figure tables, keyed by file stem.
pub fn figure_tables(
    store: &HistoryStore,
    params: &ReportParams,
    settings: &AnalysisSettings,
) -> Vec<(&'static str, ReportTable)> {
    vec![
        ("fig4", fig_forecast(store, params.forecast_date, settings)),
        ("fig5", fig_busy_by_hour(store, params.hour, &params.window)),
        ("fig6", fig_trips_per_station(store, &params.window)),
        ("fig7", fig_busy_density(store, params.hour, &params.window)),
        ("fig8", fig_load_factor(store, params.at)),
        ("fig9", fig_wait_series(store, params.wait_station, params.arrival, settings)),
    ]
}

/// Writes `<stem>.csv` and `<stem>.json` for each table.
pub fn write_tables(dir: &Path, tables: &[(&str, ReportTable)]) -> Result<(), ReportError> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| ReportError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for (stem, table) in tables {
        let csv_path = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv_path, table.to_csv()?).map_err(io(&csv_path))?;
        let json_path = dir.join(format!("{stem}.json"));
        std::fs::write(&json_path, table.to_json()?).map_err(io(&json_path))?;
    }
    Ok(())
}
