//! Tick-based simulation of sensor-equipped bikes riding between stations
//! and offloading sensed data to every station within radio range.
//!
//! The model is single-hop: a bike holds its data until it is in range of at
//! least one station, then drains its whole buffer, split evenly across the
//! stations it can reach. Transfers in range always succeed.

mod rng;
mod trace;
mod world;

use serde::{Deserialize, Serialize};

use crate::ingest::StationRecord;

pub use rng::DrawSource;
pub use trace::{
    format_trace, parse_trace, summarize_trace, EventKind, SimTrace, TraceError, TraceEvent, TraceSummary,
};
pub use world::{init_simulation, offload, run_simulation, run_to_completion, step, BikeState, Phase, World};

/// Mean Earth radius used by the station projection, in meters.
const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Spacing of the synthetic station grid, in meters.
pub const GRID_SPACING_M: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimStation {
    pub station_id: u32,
    /// Meters.
    pub x: f64,
    /// Meters.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_bikes: u32,
    pub stations: Vec<SimStation>,
    /// Meters. A station exactly this far away is in range.
    pub radio_range: f64,
    /// Meters per second.
    pub bike_speed: f64,
    /// Bytes sensed per second of riding.
    pub sense_rate: u64,
    /// Seconds; must be a whole number of milliseconds.
    pub tick: f64,
    /// Seconds; start times are drawn from `[0, max_start_delay]`.
    pub max_start_delay: f64,
    /// Seconds of simulated time.
    pub duration: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_bikes: 10,
            stations: grid_stations(),
            radio_range: 100.0,
            bike_speed: 4.0,
            sense_rate: 8,
            tick: 1.0,
            max_start_delay: 300.0,
            duration: 3600.0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid simulation config `{field}`: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

fn config_error(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError { field, reason: reason.into() }
}

/// Converts seconds to whole milliseconds, rejecting anything finer.
fn to_millis(field: &'static str, seconds: f64) -> Result<u64, ConfigError> {
    if !seconds.is_finite() || seconds < 0.0 {
        return Err(config_error(field, "must be finite and non-negative"));
    }
    let millis = (seconds * 1000.0).round();
    if (millis - seconds * 1000.0).abs() > 1e-6 || millis > (u64::MAX / 4) as f64 {
        return Err(config_error(field, "must be a whole number of milliseconds"));
    }
    Ok(millis as u64)
}

/// Validated timing of a config, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Timing {
    pub tick_ms: u64,
    pub max_start_delay_ms: u64,
    pub duration_ms: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.timing().map(|_| ())
    }

    pub(crate) fn timing(&self) -> Result<Timing, ConfigError> {
        if self.n_bikes == 0 {
            return Err(config_error("n_bikes", "at least one bike is required"));
        }
        if self.stations.len() < 2 {
            return Err(config_error("stations", "at least two stations are required"));
        }
        let mut ids: Vec<u32> = self.stations.iter().map(|s| s.station_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_error("stations", "station ids must be unique"));
        }
        if self.stations.iter().any(|s| !s.x.is_finite() || !s.y.is_finite()) {
            return Err(config_error("stations", "coordinates must be finite"));
        }
        if !(self.radio_range.is_finite() && self.radio_range > 0.0) {
            return Err(config_error("radio_range", "must be positive"));
        }
        if !(self.bike_speed.is_finite() && self.bike_speed > 0.0) {
            return Err(config_error("bike_speed", "must be positive"));
        }
        let tick_ms = to_millis("tick", self.tick)?;
        if tick_ms == 0 {
            return Err(config_error("tick", "must be positive"));
        }
        let duration_ms = to_millis("duration", self.duration)?;
        if duration_ms == 0 {
            return Err(config_error("duration", "must be positive"));
        }
        if self.sense_rate.checked_mul(tick_ms).is_none_or(|v| v > u64::MAX / 2) {
            return Err(config_error("sense_rate", "too large"));
        }
        Ok(Timing { tick_ms, max_start_delay_ms: to_millis("max_start_delay", self.max_start_delay)?, duration_ms })
    }
}

/// Six stations on a 3×2 grid with [`GRID_SPACING_M`] between neighbours,
/// ids 1 to 6 in row-major order.
pub fn grid_stations() -> Vec<SimStation> {
    (0..6u32)
        .map(|i| SimStation {
            station_id: i + 1,
            x: f64::from(i % 3) * GRID_SPACING_M,
            y: f64::from(i / 3) * GRID_SPACING_M,
        })
        .collect()
}

/// Projects station coordinates onto a local plane (meters) with an
/// equirectangular projection about their centroid.
pub fn project_stations(records: &[StationRecord]) -> Vec<SimStation> {
    if records.is_empty() {
        return Vec::new();
    }
    let n = records.len() as f64;
    let lat0 = records.iter().map(|r| r.latitude).sum::<f64>() / n;
    let lon0 = records.iter().map(|r| r.longitude).sum::<f64>() / n;
    let cos_lat0 = lat0.to_radians().cos();
    records
        .iter()
        .map(|r| SimStation {
            station_id: r.station_id,
            x: EARTH_RADIUS_M * (r.longitude - lon0).to_radians() * cos_lat0,
            y: EARTH_RADIUS_M * (r.latitude - lat0).to_radians(),
        })
        .collect()
}
