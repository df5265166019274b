use serde::{Deserialize, Serialize};

use super::{station, AnalyticsError};
use crate::ingest::HistoryStore;
use crate::time::TimeWindow;

/// Pooled trip time over both directions of a station pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripTimeStats {
    pub station_x: u32,
    pub station_y: u32,
    /// Trips from x to y.
    pub n_xy: u64,
    /// Trips from y to x. Zero for a loop route.
    pub n_yx: u64,
    pub mean_seconds: f64,
    pub min_seconds: u64,
    pub max_seconds: u64,
    /// x and y are the same station.
    pub loop_route: bool,
}

/// Indices of the trips on the route, both directions, started in `window`.
fn route_trips<'s>(store: &'s HistoryStore, x: u32, y: u32, window: &TimeWindow) -> (&'s [usize], &'s [usize]) {
    let xy = store.starting_in(store.trips_between(x, y), window);
    let yx = if x == y { &[][..] } else { store.starting_in(store.trips_between(y, x), window) };
    (xy, yx)
}

/// Mean of recorded trip durations between x and y in either direction,
/// for trips starting in `window`.
pub fn average_trip_time(
    store: &HistoryStore,
    station_x: u32,
    station_y: u32,
    window: &TimeWindow,
) -> Result<TripTimeStats, AnalyticsError> {
    station(store, station_x)?;
    station(store, station_y)?;
    let (xy, yx) = route_trips(store, station_x, station_y, window);
    let durations = || xy.iter().chain(yx).map(|&i| store.trip(i).duration);
    let count = xy.len() + yx.len();
    if count == 0 {
        return Err(AnalyticsError::NoData);
    }
    let total: u128 = durations().map(u128::from).sum();
    Ok(TripTimeStats {
        station_x,
        station_y,
        n_xy: xy.len() as u64,
        n_yx: yx.len() as u64,
        mean_seconds: total as f64 / count as f64,
        min_seconds: durations().min().expect("non-empty"),
        max_seconds: durations().max().expect("non-empty"),
        loop_route: station_x == station_y,
    })
}

/// Trips between x and y in either direction, started in `window`.
pub fn route_busyness(
    store: &HistoryStore,
    station_x: u32,
    station_y: u32,
    window: &TimeWindow,
) -> Result<u64, AnalyticsError> {
    station(store, station_x)?;
    station(store, station_y)?;
    let (xy, yx) = route_trips(store, station_x, station_y, window);
    Ok((xy.len() + yx.len()) as u64)
}

/// Trips from `from` to `to` only, started in `window`.
pub fn directed_trip_count(
    store: &HistoryStore,
    from: u32,
    to: u32,
    window: &TimeWindow,
) -> Result<u64, AnalyticsError> {
    station(store, from)?;
    station(store, to)?;
    Ok(store.starting_in(store.trips_between(from, to), window).len() as u64)
}
