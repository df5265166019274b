use serde::{Deserialize, Serialize};

use super::{mean_of, station, weighted_mean, AnalyticsError, HistoryWindows, ReferenceDates, Weights};
use crate::ingest::{HistoryStore, StatusSeries};
use crate::time::Timestamp;

pub const DEFAULT_HORIZON_MINUTES: u32 = 30;

/// One minute of the wait series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitPoint {
    pub minute_offset: u32,
    pub at: Timestamp,
    /// Mean bikes at this clock time on the same weekday in recent weeks.
    pub v1: Option<f64>,
    /// Mean bikes at this clock time on the earlier days of the current week.
    pub v2: Option<f64>,
    /// Mean bikes at this clock time on the same day of recent months.
    pub v3: Option<f64>,
    /// Weighted factor mean over max bikes, before clamping.
    pub raw_probability: Option<f64>,
    /// `raw_probability` clamped to `[0, 1]`. `None` when no factor has data
    /// at this minute.
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitProbabilitySeries {
    pub station_id: u32,
    pub arrival_at: Timestamp,
    /// Dock count of the station.
    pub max_bikes: u32,
    pub weights: Weights,
    pub points: Vec<WaitPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitRecommendation {
    pub wait: bool,
    pub best_minute: Option<u32>,
    pub best_probability: Option<f64>,
}

/// `(w1·V1 + w2·V2 + w3·V3) / U` over the factors that have data, unclamped.
pub fn raw_availability(factors: [Option<f64>; 3], weights: &Weights, max_bikes: u32) -> Option<f64> {
    if max_bikes == 0 {
        return None;
    }
    weighted_mean(factors, weights).map(|v| v / f64::from(max_bikes))
}

/// [`raw_availability`] clamped to `[0, 1]`.
pub fn availability_probability(factors: [Option<f64>; 3], weights: &Weights, max_bikes: u32) -> Option<f64> {
    raw_availability(factors, weights, max_bikes).map(|p| p.clamp(0.0, 1.0))
}

/// Bikes at `reference`: the latest reading no more than `match_minutes`
/// before it, or failing that the earliest reading no more than
/// `match_minutes` after it.
pub(crate) fn reading_near(series: &StatusSeries, reference: Timestamp, match_minutes: i64) -> Option<u32> {
    if let Some(i) = series.latest_at_or_before(reference) {
        if series.at[i] >= reference.plus_minutes(-match_minutes) {
            return Some(series.bikes[i]);
        }
    }
    let i = series.earliest_after(reference)?;
    (series.at[i] <= reference.plus_minutes(match_minutes)).then(|| series.bikes[i])
}

pub fn wait_probability_series(
    store: &HistoryStore,
    station_id: u32,
    arrival_at: Timestamp,
    weights: &Weights,
    windows: &HistoryWindows,
    horizon_minutes: u32,
) -> Result<WaitProbabilitySeries, AnalyticsError> {
    let max_bikes = station(store, station_id)?.dock_count;
    let refs = ReferenceDates::for_target(arrival_at.date(), windows);
    let clock = arrival_at.time_of_day();
    let series = store.status(station_id);

    let factor = |dates: &[chrono::NaiveDate], offset: u32| -> Option<f64> {
        let series = series?;
        mean_of(dates.iter().map(|d| {
            let reference = Timestamp::from_naive(d.and_time(clock)).plus_minutes(i64::from(offset));
            reading_near(series, reference, windows.match_minutes).map(f64::from)
        }))
        .0
    };

    let points: Vec<WaitPoint> = (0..=horizon_minutes)
        .map(|offset| {
            let [v1, v2, v3] = refs.factors().map(|dates| factor(dates, offset));
            let raw = raw_availability([v1, v2, v3], weights, max_bikes);
            WaitPoint {
                minute_offset: offset,
                at: arrival_at.plus_minutes(i64::from(offset)),
                v1,
                v2,
                v3,
                raw_probability: raw,
                probability: raw.map(|p| p.clamp(0.0, 1.0)),
            }
        })
        .collect();

    if points.iter().all(|p| p.probability.is_none()) {
        return Err(AnalyticsError::NoHistory(station_id));
    }
    Ok(WaitProbabilitySeries { station_id, arrival_at, max_bikes, weights: *weights, points })
}

/// Wait if the best probability in the series reaches `threshold`. The best
/// minute is the earliest one attaining the maximum.
pub fn recommend_wait(series: &WaitProbabilitySeries, threshold: f64) -> WaitRecommendation {
    let mut best: Option<(u32, f64)> = None;
    for point in &series.points {
        if let Some(p) = point.probability {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((point.minute_offset, p));
            }
        }
    }
    WaitRecommendation {
        wait: best.is_some_and(|(_, p)| p >= threshold),
        best_minute: best.map(|(m, _)| m),
        best_probability: best.map(|(_, p)| p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_store, StationRecord, StatusRecord};
    use chrono::NaiveDate;

    #[test]
    fn formula_fixtures() {
        let w = Weights::default();
        let p = availability_probability([Some(2.0), Some(4.0), Some(2.0)], &w, 10).unwrap();
        assert!((p - 0.3).abs() < 1e-15);
        assert_eq!(availability_probability([Some(0.0); 3], &w, 10), Some(0.0));
        assert_eq!(raw_availability([Some(12.0); 3], &w, 10), Some(1.2));
        assert_eq!(availability_probability([Some(12.0); 3], &w, 10), Some(1.0));
        assert_eq!(availability_probability([None; 3], &w, 10), None);
        assert_eq!(availability_probability([Some(1.0); 3], &w, 0), None);
    }

    fn series_of(probabilities: &[Option<f64>]) -> WaitProbabilitySeries {
        let at = Timestamp::parse("2016-06-01 15:45:00").unwrap();
        WaitProbabilitySeries {
            station_id: 1,
            arrival_at: at,
            max_bikes: 10,
            weights: Weights::default(),
            points: probabilities
                .iter()
                .enumerate()
                .map(|(i, &p)| WaitPoint {
                    minute_offset: i as u32,
                    at: at.plus_minutes(i as i64),
                    v1: None,
                    v2: None,
                    v3: None,
                    raw_probability: p,
                    probability: p,
                })
                .collect(),
        }
    }

    #[test]
    fn recommendation_rules() {
        let r = recommend_wait(&series_of(&[Some(0.1), Some(0.3), Some(0.2)]), 0.5);
        assert!(!r.wait);
        assert_eq!(r.best_probability, Some(0.3));

        let r = recommend_wait(&series_of(&[Some(0.1), Some(0.6), Some(0.6)]), 0.5);
        assert!(r.wait);
        assert_eq!(r.best_minute, Some(1));

        let r = recommend_wait(&series_of(&[Some(0.0), Some(0.0)]), 0.0);
        assert!(r.wait);
        assert_eq!(r.best_minute, Some(0));

        let r = recommend_wait(&series_of(&[None, Some(0.2)]), 0.1);
        assert_eq!(r.best_minute, Some(1));
    }

    fn store(readings: &[(&str, u32)]) -> HistoryStore {
        let station = StationRecord {
            station_id: 2,
            name: String::new(),
            latitude: 0.0,
            longitude: 0.0,
            dock_count: 10,
            landmark: String::new(),
            installation: NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(),
        };
        let status = readings
            .iter()
            .map(|&(at, bikes)| StatusRecord {
                station_id: 2,
                bikes_available: bikes,
                docks_available: 10 - bikes,
                at: Timestamp::parse(at).unwrap(),
            })
            .collect();
        build_store(vec![station], status, vec![], true).unwrap().0
    }

    #[test]
    fn matching_window_prefers_earlier_reading() {
        let s = store(&[("2016-05-25 15:41:00", 2), ("2016-05-25 15:46:00", 6), ("2016-05-25 15:52:00", 9)]);
        let series = s.status(2).unwrap();
        let at = |t| Timestamp::parse(t).unwrap();
        assert_eq!(reading_near(series, at("2016-05-25 15:45:00"), 5), Some(2));
        assert_eq!(reading_near(series, at("2016-05-25 15:47:00"), 5), Some(6));
        // 15:36 has nothing at or before within 5 min; 15:41 is exactly 5 after.
        assert_eq!(reading_near(series, at("2016-05-25 15:36:00"), 5), Some(2));
        assert_eq!(reading_near(series, at("2016-05-25 15:35:59"), 5), None);
        assert_eq!(reading_near(series, at("2016-05-25 16:10:00"), 5), None);
    }

    #[test]
    fn series_shape_and_factors() {
        // Arrival Wednesday 2016-06-01 15:45. One week back is 05-25 (V1); the
        // current week before Wednesday is 05-30, 05-31 (V2); one month back is
        // 05-01 (V3).
        let s = store(&[
            ("2016-05-25 15:40:00", 4),
            ("2016-05-30 15:45:00", 2),
            ("2016-05-31 15:45:00", 6),
            ("2016-05-01 15:45:00", 8),
        ]);
        let arrival = Timestamp::parse("2016-06-01 15:45:00").unwrap();
        let series =
            wait_probability_series(&s, 2, arrival, &Weights::default(), &HistoryWindows::default(), 30).unwrap();
        assert_eq!(series.points.len(), 31);
        let first = series.points[0];
        assert_eq!((first.v1, first.v2, first.v3), (Some(4.0), Some(4.0), Some(8.0)));
        assert!((first.probability.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(series.points[30].at.to_string(), "2016-06-01 16:15:00");
        // 16:15 is more than five minutes after every reading.
        assert_eq!(series.points[30].probability, None);
        assert!(series.points.iter().flat_map(|p| p.probability).all(|p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn empty_history_errors() {
        let s = store(&[]);
        let arrival = Timestamp::parse("2016-06-01 15:45:00").unwrap();
        let w = Weights::default();
        let hw = HistoryWindows::default();
        assert_eq!(wait_probability_series(&s, 2, arrival, &w, &hw, 30), Err(AnalyticsError::NoHistory(2)));
        assert_eq!(wait_probability_series(&s, 3, arrival, &w, &hw, 30), Err(AnalyticsError::UnknownStation(3)));
    }
}
