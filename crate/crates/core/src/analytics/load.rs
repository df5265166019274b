use serde::{Deserialize, Serialize};

use super::{station, AnalyticsError};
use crate::ingest::HistoryStore;
use crate::time::Timestamp;

/// Available bikes plus empty docks, from the latest reading at or before
/// `at`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadFactorReading {
    pub station_id: u32,
    pub at: Timestamp,
    /// Time of the reading carried forward to `at`.
    pub observed_at: Timestamp,
    pub bikes_available: u32,
    pub empty_docks: u32,
    pub load_factor: u32,
}

pub fn load_factor(store: &HistoryStore, station_id: u32, at: Timestamp) -> Result<LoadFactorReading, AnalyticsError> {
    station(store, station_id)?;
    let series = store.status(station_id).ok_or(AnalyticsError::NoData)?;
    let i = series.latest_at_or_before(at).ok_or(AnalyticsError::NoData)?;
    let (bikes, docks) = (series.bikes[i], series.docks[i]);
    Ok(LoadFactorReading {
        station_id,
        at,
        observed_at: series.at[i],
        bikes_available: bikes,
        empty_docks: docks,
        load_factor: bikes + docks,
    })
}
