use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{
    daily_mean_bikes, mean_of, station, weighted_mean, AnalyticsError, HistoryWindows, ReferenceDates, Weights,
};
use crate::ingest::HistoryStore;

/// Number of reference days that contributed to each factor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSamples {
    pub dow: usize,
    pub current_week: usize,
    pub dom: usize,
}

/// Expected bikes at a station on `target_date`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityForecast {
    pub station_id: u32,
    pub target_date: NaiveDate,
    /// Mean of daily-mean bikes on the same weekday in recent weeks.
    pub dow_mean: Option<f64>,
    /// Mean of daily-mean bikes on the earlier days of the target's week.
    pub current_week_mean: Option<f64>,
    /// Mean of daily-mean bikes on the same day of recent months.
    pub dom_mean: Option<f64>,
    pub weights: Weights,
    pub n_expected: f64,
    pub samples_used: FactorSamples,
}

pub fn forecast_available_bikes(
    store: &HistoryStore,
    station_id: u32,
    target_date: NaiveDate,
    weights: &Weights,
    windows: &HistoryWindows,
) -> Result<AvailabilityForecast, AnalyticsError> {
    station(store, station_id)?;
    let refs = ReferenceDates::for_target(target_date, windows);
    let factor = |dates: &[NaiveDate]| match store.status(station_id) {
        Some(series) => mean_of(dates.iter().map(|&d| daily_mean_bikes(series, d))),
        None => (None, 0),
    };
    let (dow_mean, dow) = factor(&refs.same_weekday);
    let (current_week_mean, current_week) = factor(&refs.current_week);
    let (dom_mean, dom) = factor(&refs.same_day_of_month);

    let n_expected =
        weighted_mean([dow_mean, current_week_mean, dom_mean], weights).ok_or(AnalyticsError::NoHistory(station_id))?;
    Ok(AvailabilityForecast {
        station_id,
        target_date,
        dow_mean,
        current_week_mean,
        dom_mean,
        weights: *weights,
        n_expected,
        samples_used: FactorSamples { dow, current_week, dom },
    })
}
