//! Station analytics over a [`HistoryStore`]: availability forecasts,
//! busyness, trip times, route counts, load factor and the short-horizon
//! wait probability.
//!
//! Everything here is a pure function of an immutable store.

mod busyness;
mod forecast;
mod load;
mod trips;
mod wait;

use std::fmt;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::ingest::{HistoryStore, StationRecord, StatusSeries};
use crate::time::Timestamp;

pub use busyness::{hourly_busyness, outbound_trips, rank_busiest, station_busyness, BusynessReport};
pub use forecast::{forecast_available_bikes, AvailabilityForecast, FactorSamples};
pub use load::{load_factor, LoadFactorReading};
pub use trips::{average_trip_time, directed_trip_count, route_busyness, TripTimeStats};
pub use wait::{
    availability_probability, recommend_wait, wait_probability_series, WaitPoint, WaitProbabilitySeries,
    WaitRecommendation, DEFAULT_HORIZON_MINUTES,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("unknown station {0}")]
    UnknownStation(u32),
    #[error("no history for station {0}")]
    NoHistory(u32),
    #[error("no data for the requested query")]
    NoData,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Tolerance on the weight sum.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Weights of the day-of-week, current-week and day-of-month factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Weights([f64; 3]);

impl Weights {
    pub fn new(values: [f64; 3]) -> Result<Self, AnalyticsError> {
        if values.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(AnalyticsError::InvalidWeights("weights must be finite and non-negative".into()));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(AnalyticsError::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Weights(values))
    }

    pub fn values(&self) -> [f64; 3] {
        self.0
    }
}

impl Default for Weights {
    /// 25% day of week, 50% current week, 25% day of month.
    fn default() -> Self {
        Weights([0.25, 0.5, 0.25])
    }
}

impl TryFrom<[f64; 3]> for Weights {
    type Error = AnalyticsError;

    fn try_from(values: [f64; 3]) -> Result<Self, Self::Error> {
        Weights::new(values)
    }
}

impl From<Weights> for [f64; 3] {
    fn from(w: Weights) -> Self {
        w.0
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

impl std::str::FromStr for Weights {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(AnalyticsError::InvalidWeights(format!("expected three comma-separated values, got {s:?}")));
        }
        let mut values = [0.0; 3];
        for (slot, part) in values.iter_mut().zip(&parts) {
            *slot = part.parse().map_err(|_| AnalyticsError::InvalidWeights(format!("not a number: {part:?}")))?;
        }
        Weights::new(values)
    }
}

/// Weighted mean over the factors that have data, with the remaining weights
/// renormalized. `None` when no factor with positive weight has data.
pub fn weighted_mean(factors: [Option<f64>; 3], weights: &Weights) -> Option<f64> {
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    for (value, weight) in factors.iter().zip(weights.0) {
        if let Some(v) = value {
            total += weight * v;
            weight_sum += weight;
        }
    }
    (weight_sum > 0.0).then(|| total / weight_sum)
}

/// How far back the historical factors look.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistoryWindows {
    /// Same-weekday dates considered for the day-of-week factor.
    pub weeks: u32,
    /// Months considered for the day-of-month factor.
    pub months: u32,
    /// A reading counts for a wait-series minute if it lies within this many
    /// minutes of the reference instant.
    pub match_minutes: i64,
}

impl Default for HistoryWindows {
    fn default() -> Self {
        HistoryWindows { weeks: 6, months: 6, match_minutes: 5 }
    }
}

/// Tunables shared by every consumer of the analytics: CLI, report and
/// service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub forecast_weights: Weights,
    pub wait_weights: Weights,
    pub windows: HistoryWindows,
    pub horizon_minutes: u32,
    pub wait_threshold: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            forecast_weights: Weights::default(),
            wait_weights: Weights::default(),
            windows: HistoryWindows::default(),
            horizon_minutes: DEFAULT_HORIZON_MINUTES,
            wait_threshold: 0.5,
        }
    }
}

/// The three sets of reference dates behind the forecast and wait factors,
/// all strictly before `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceDates {
    pub same_weekday: Vec<NaiveDate>,
    pub current_week: Vec<NaiveDate>,
    pub same_day_of_month: Vec<NaiveDate>,
}

impl ReferenceDates {
    pub fn for_target(target: NaiveDate, windows: &HistoryWindows) -> Self {
        let same_weekday = (1..=i64::from(windows.weeks)).map(|k| target - Duration::days(7 * k)).collect();

        // Weeks start on Monday.
        let days_into_week = i64::from(target.weekday().num_days_from_monday());
        let current_week = (1..=days_into_week).rev().map(|k| target - Duration::days(k)).collect();

        let same_day_of_month = (1..=windows.months)
            .filter_map(|k| {
                let months_back = target.year() * 12 + target.month0() as i32 - k as i32;
                NaiveDate::from_ymd_opt(months_back.div_euclid(12), months_back.rem_euclid(12) as u32 + 1, target.day())
            })
            .collect();

        ReferenceDates { same_weekday, current_week, same_day_of_month }
    }

    pub fn factors(&self) -> [&[NaiveDate]; 3] {
        [&self.same_weekday, &self.current_week, &self.same_day_of_month]
    }
}

pub(crate) fn station(store: &HistoryStore, station_id: u32) -> Result<&StationRecord, AnalyticsError> {
    store.station(station_id).ok_or(AnalyticsError::UnknownStation(station_id))
}

/// Mean `bikes_available` over every reading on `date`.
pub(crate) fn daily_mean_bikes(series: &StatusSeries, date: NaiveDate) -> Option<f64> {
    let start = Timestamp::from_date(date);
    let end = Timestamp::from_date(date + Duration::days(1));
    let range = series.range(start, end);
    if range.is_empty() {
        return None;
    }
    let n = range.len() as f64;
    let sum: u64 = series.bikes[range].iter().map(|&b| u64::from(b)).sum();
    Some(sum as f64 / n)
}

/// Mean of the values that exist, with the count used.
pub(crate) fn mean_of(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    ((n > 0).then(|| sum / n as f64), n)
}
