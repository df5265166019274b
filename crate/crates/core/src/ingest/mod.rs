//! Loading the station, status and trip exports into an immutable
//! [`HistoryStore`].

mod cache;
mod parse;
mod schema;
mod store;

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

pub use cache::{load_cache, save_cache, CacheError, InputFingerprint, CACHE_VERSION};
pub use parse::{parse_station_csv, parse_status_csv, parse_trip_csv, ParseStats, Parsed, RowError};
pub use schema::{SchemaConfig, TableSchema};
pub use store::{build_store, BuildSummary, HistoryStore, StatusSeries};

/// Default file names of the three exports inside a data directory.
pub const STATION_FILE: &str = "201402_station_data.csv";
pub const STATUS_FILE: &str = "201402_status_data.csv";
pub const TRIP_FILE: &str = "201402_trip_data.csv";

/// Trips whose `duration` disagrees with `end_at - start_at` by more than
/// this many seconds are flagged in the build summary.
pub const DURATION_MISMATCH_SECONDS: i64 = 60;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("missing column `{column}`")]
    Schema { column: String },
    #[error("line {}: {}", .0.line, .0.reason)]
    Row(RowError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{kind} references unknown station {station_id}")]
    Dangling { kind: &'static str, station_id: u32 },
    #[error("duplicate {kind} id {id}")]
    Duplicate { kind: &'static str, id: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRecord {
    pub station_id: u32,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub dock_count: u32,
    pub landmark: String,
    pub installation: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusRecord {
    pub station_id: u32,
    pub bikes_available: u32,
    /// Empty docks at the station.
    pub docks_available: u32,
    pub at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripRecord {
    pub trip_id: u64,
    /// Seconds, as recorded in the export.
    pub duration: u64,
    pub start_at: Timestamp,
    pub end_at: Timestamp,
    pub start_station_id: u32,
    pub end_station_id: u32,
    pub start_terminal: String,
    pub end_terminal: String,
    pub bike_no: u32,
    pub zip_code: String,
    pub subscription_type: String,
}

impl TripRecord {
    pub fn elapsed_seconds(&self) -> i64 {
        self.end_at.seconds_since(&self.start_at)
    }
}

/// Locations of the three input files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub stations: PathBuf,
    pub status: PathBuf,
    pub trips: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: &Path) -> Self {
        DatasetPaths { stations: dir.join(STATION_FILE), status: dir.join(STATUS_FILE), trips: dir.join(TRIP_FILE) }
    }
}

/// Per-file parse counts plus the store build summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub stations: ParseStats,
    pub status: ParseStats,
    pub trips: ParseStats,
    pub build: BuildSummary,
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io { path: path.to_owned(), source })?;
    Ok(std::io::BufReader::with_capacity(1 << 20, file))
}

/// Parses the three files (in parallel) and builds the store.
pub fn load_dataset(
    paths: &DatasetPaths,
    schema: &SchemaConfig,
    strict: bool,
) -> Result<(HistoryStore, IngestSummary), IngestError> {
    let (stations, status, trips) = std::thread::scope(|scope| {
        let status = scope.spawn(|| parse_status_csv(open(&paths.status)?, &schema.status, strict));
        let trips = scope.spawn(|| parse_trip_csv(open(&paths.trips)?, &schema.trip, strict));
        let stations = parse_station_csv(open(&paths.stations)?, &schema.station, strict);
        Ok::<_, IngestError>((
            stations?,
            status.join().expect("status parser panicked")?,
            trips.join().expect("trip parser panicked")?,
        ))
    })?;

    let summary_stats = (stations.stats(), status.stats(), trips.stats());
    let (store, build) = build_store(stations.records, status.records, trips.records, strict)?;
    Ok((store, IngestSummary { stations: summary_stats.0, status: summary_stats.1, trips: summary_stats.2, build }))
}

/// Like [`load_dataset`], but reads and refreshes a binary cache when one is
/// given. A stale, corrupt or version-mismatched cache is rebuilt silently.
pub fn load_dataset_cached(
    paths: &DatasetPaths,
    schema: &SchemaConfig,
    strict: bool,
    cache_path: Option<&Path>,
) -> Result<(HistoryStore, IngestSummary), IngestError> {
    let Some(cache_path) = cache_path else {
        return load_dataset(paths, schema, strict);
    };
    let fingerprint = InputFingerprint::of(paths, schema, strict)?;
    if let Ok(hit) = load_cache(cache_path, &fingerprint) {
        return Ok(hit);
    }
    let (store, summary) = load_dataset(paths, schema, strict)?;
    // A cache that cannot be written only costs the next run a rebuild.
    let _ = save_cache(cache_path, &fingerprint, &store, &summary);
    Ok((store, summary))
}
