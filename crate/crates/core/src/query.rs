//! Queries over a loaded store, answered as JSON. The CLI's `analyze --json`
//! and the HTTP service both go through [`execute`], so their answers agree.

use chrono::NaiveDate;
use serde::Serialize;
use serde_json::Value;

use crate::analytics::{self, AnalysisSettings, AnalyticsError, BusynessReport, WaitProbabilitySeries};
use crate::ingest::HistoryStore;
use crate::time::{parse_date, TimeWindow, Timestamp};

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Stations,
    Forecast {
        station: u32,
        date: NaiveDate,
    },
    Busyness {
        station: u32,
        window: TimeWindow,
    },
    Rank {
        window: TimeWindow,
        top: usize,
    },
    /// All 24 hours when `hour` is `None`.
    Hourly {
        station: u32,
        hour: Option<u32>,
        window: TimeWindow,
    },
    TripTime {
        from: u32,
        to: u32,
        window: TimeWindow,
    },
    Route {
        from: u32,
        to: u32,
        window: TimeWindow,
    },
    Load {
        station: u32,
        at: Timestamp,
    },
    Wait {
        station: u32,
        at: Timestamp,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    /// The request itself is malformed.
    #[error("{0}")]
    BadRequest(String),
    /// Unknown station, or nothing recorded for the query.
    #[error("{0}")]
    NotFound(String),
}

impl From<AnalyticsError> for QueryError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::InvalidWeights(_) => QueryError::BadRequest(e.to_string()),
            AnalyticsError::UnknownStation(_) | AnalyticsError::NoHistory(_) | AnalyticsError::NoData => {
                QueryError::NotFound(e.to_string())
            }
        }
    }
}

pub fn parse_station(text: &str) -> Result<u32, QueryError> {
    text.trim().parse().map_err(|_| QueryError::BadRequest(format!("invalid station id {text:?}")))
}

/// Accepts `T` in place of the space.
pub fn parse_at(text: &str) -> Result<Timestamp, QueryError> {
    Timestamp::parse_lenient(text).map_err(|e| QueryError::BadRequest(format!("invalid timestamp {text:?}: {e}")))
}

pub fn parse_day(text: &str) -> Result<NaiveDate, QueryError> {
    parse_date(text).map_err(|e| QueryError::BadRequest(format!("invalid date {text:?}: {e}")))
}

/// `START/END`, or the whole history when absent.
pub fn parse_window(text: Option<&str>) -> Result<TimeWindow, QueryError> {
    match text {
        None => Ok(TimeWindow::everything()),
        Some(t) => TimeWindow::parse(t).map_err(|e| QueryError::BadRequest(format!("invalid window {t:?}: {e}"))),
    }
}

pub fn parse_hour(text: &str) -> Result<u32, QueryError> {
    match text.trim().parse() {
        Ok(h) if h < 24 => Ok(h),
        _ => Err(QueryError::BadRequest(format!("invalid hour {text:?}: expected 0 to 23"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HourCount {
    pub hour: u32,
    pub trips: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HourlyAnswer {
    pub station_id: u32,
    pub window: TimeWindow,
    pub hours: Vec<HourCount>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RouteAnswer {
    pub station_a: u32,
    pub station_b: u32,
    pub window: TimeWindow,
    /// Both directions; a loop route counts each trip once.
    pub trips: u64,
    pub a_to_b: u64,
    pub b_to_a: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaitAnswer {
    #[serde(flatten)]
    pub series: WaitProbabilitySeries,
    pub threshold: f64,
    pub recommendation: analytics::WaitRecommendation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Answer {
    Stations(Vec<crate::ingest::StationRecord>),
    Forecast(analytics::AvailabilityForecast),
    Busyness(BusynessReport),
    Rank(Vec<BusynessReport>),
    Hourly(HourlyAnswer),
    TripTime(analytics::TripTimeStats),
    Route(RouteAnswer),
    Load(analytics::LoadFactorReading),
    Wait(WaitAnswer),
}

pub fn answer(store: &HistoryStore, settings: &AnalysisSettings, query: &Query) -> Result<Answer, QueryError> {
    Ok(match *query {
        Query::Stations => Answer::Stations(store.stations().cloned().collect()),
        Query::Forecast { station, date } => Answer::Forecast(analytics::forecast_available_bikes(
            store,
            station,
            date,
            &settings.forecast_weights,
            &settings.windows,
        )?),
        Query::Busyness { station, window } => Answer::Busyness(analytics::station_busyness(store, station, &window)?),
        Query::Rank { window, top } => Answer::Rank(analytics::rank_busiest(store, &window, top)),
        Query::Hourly { station, hour, window } => {
            let hours = match hour {
                Some(h) => vec![h],
                None => (0..24).collect(),
            };
            let hours = hours
                .into_iter()
                .map(|hour| Ok(HourCount { hour, trips: analytics::hourly_busyness(store, station, hour, &window)? }))
                .collect::<Result<_, AnalyticsError>>()?;
            Answer::Hourly(HourlyAnswer { station_id: station, window, hours })
        }
        Query::TripTime { from, to, window } => {
            Answer::TripTime(analytics::average_trip_time(store, from, to, &window)?)
        }
        Query::Route { from, to, window } => Answer::Route(RouteAnswer {
            station_a: from,
            station_b: to,
            window,
            trips: analytics::route_busyness(store, from, to, &window)?,
            a_to_b: analytics::directed_trip_count(store, from, to, &window)?,
            b_to_a: if from == to { 0 } else { analytics::directed_trip_count(store, to, from, &window)? },
        }),
        Query::Load { station, at } => Answer::Load(analytics::load_factor(store, station, at)?),
        Query::Wait { station, at } => {
            let series = analytics::wait_probability_series(
                store,
                station,
                at,
                &settings.wait_weights,
                &settings.windows,
                settings.horizon_minutes,
            )?;
            let recommendation = analytics::recommend_wait(&series, settings.wait_threshold);
            Answer::Wait(WaitAnswer { series, threshold: settings.wait_threshold, recommendation })
        }
    })
}

pub fn execute(store: &HistoryStore, settings: &AnalysisSettings, query: &Query) -> Result<Value, QueryError> {
    let answer = answer(store, settings, query)?;
    Ok(serde_json::to_value(answer).expect("answers serialize to JSON"))
}
