use serde::{Deserialize, Serialize};

use super::{station, AnalyticsError};
use crate::ingest::HistoryStore;
use crate::time::TimeWindow;

/// Incoming plus outgoing trips at a station over a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusynessReport {
    pub station_id: u32,
    pub window: TimeWindow,
    /// Trips ending at the station with `end_at` in the window.
    pub incoming: u64,
    /// Trips starting at the station with `start_at` in the window.
    pub outgoing: u64,
    pub busyness: u64,
}

fn busyness_unchecked(store: &HistoryStore, station_id: u32, window: &TimeWindow) -> BusynessReport {
    let incoming = store.ending_in(store.trips_to(station_id), window).len() as u64;
    let outgoing = store.starting_in(store.trips_from(station_id), window).len() as u64;
    BusynessReport { station_id, window: *window, incoming, outgoing, busyness: incoming + outgoing }
}

/// A round trip from a station to itself counts once as incoming and once as
/// outgoing.
pub fn station_busyness(
    store: &HistoryStore,
    station_id: u32,
    window: &TimeWindow,
) -> Result<BusynessReport, AnalyticsError> {
    station(store, station_id)?;
    Ok(busyness_unchecked(store, station_id, window))
}

/// The `top_k` busiest stations, busiest first; ties go to the lower id.
pub fn rank_busiest(store: &HistoryStore, window: &TimeWindow, top_k: usize) -> Vec<BusynessReport> {
    let mut reports: Vec<BusynessReport> =
        store.station_ids().map(|id| busyness_unchecked(store, id, window)).collect();
    reports.sort_by(|a, b| b.busyness.cmp(&a.busyness).then(a.station_id.cmp(&b.station_id)));
    reports.truncate(top_k);
    reports
}

/// Trip starts and ends at the station during clock hour `[hour, hour + 1)`,
/// summed over every day of the window.
pub fn hourly_busyness(
    store: &HistoryStore,
    station_id: u32,
    hour: u32,
    window: &TimeWindow,
) -> Result<u64, AnalyticsError> {
    station(store, station_id)?;
    let outgoing = store
        .starting_in(store.trips_from(station_id), window)
        .iter()
        .filter(|&&i| store.trip(i).start_at.hour() == hour)
        .count();
    let incoming = store
        .ending_in(store.trips_to(station_id), window)
        .iter()
        .filter(|&&i| store.trip(i).end_at.hour() == hour)
        .count();
    Ok((outgoing + incoming) as u64)
}

/// Trips starting at the station in the window.
pub fn outbound_trips(store: &HistoryStore, station_id: u32, window: &TimeWindow) -> Result<u64, AnalyticsError> {
    station(store, station_id)?;
    Ok(store.starting_in(store.trips_from(station_id), window).len() as u64)
}
