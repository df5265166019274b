//! Versioned, checksummed binary snapshot of a built store.
//!
//! Layout: 8-byte magic, little-endian `u32` version, 32-byte input
//! fingerprint, 32-byte SHA-256 of the payload, then the bincode payload.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    build_store, DatasetPaths, HistoryStore, IngestError, IngestSummary, SchemaConfig, StationRecord, StatusRecord,
    TripRecord,
};

const MAGIC: &[u8; 8] = b"VMSTORE\0";
pub const CACHE_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 32 + 32;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a store cache")]
    BadMagic,
    #[error("cache version {0} does not match {CACHE_VERSION}")]
    Version(u32),
    #[error("cache was built from different inputs")]
    Stale,
    #[error("cache checksum mismatch")]
    Checksum,
    #[error("cache payload: {0}")]
    Payload(#[from] bincode::Error),
    #[error("cache rebuild: {0}")]
    Rebuild(#[from] IngestError),
}

/// Identifies the inputs a cache was built from: file paths, sizes and
/// modification times, the schema and the strict flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputFingerprint([u8; 32]);

impl InputFingerprint {
    pub fn of(paths: &DatasetPaths, schema: &SchemaConfig, strict: bool) -> Result<Self, IngestError> {
        let mut hasher = Sha256::new();
        hasher.update(CACHE_VERSION.to_le_bytes());
        hasher.update([u8::from(strict)]);
        hasher.update(serde_json::to_vec(schema).expect("schema serializes"));
        for path in [&paths.stations, &paths.status, &paths.trips] {
            let meta = std::fs::metadata(path).map_err(|source| IngestError::Io { path: path.clone(), source })?;
            let modified = meta
                .modified()
                .ok()
                .and_then(|m| m.duration_since(std::time::UNIX_EPOCH).ok())
                .map_or(0, |d| d.as_nanos());
            hasher.update(path.to_string_lossy().as_bytes());
            hasher.update([0]);
            hasher.update(meta.len().to_le_bytes());
            hasher.update(modified.to_le_bytes());
        }
        Ok(InputFingerprint(hasher.finalize().into()))
    }
}

#[derive(Serialize, Deserialize)]
struct Payload {
    stations: Vec<StationRecord>,
    status: Vec<StatusRecord>,
    trips: Vec<TripRecord>,
    summary: IngestSummary,
}

pub fn save_cache(
    path: &Path,
    fingerprint: &InputFingerprint,
    store: &HistoryStore,
    summary: &IngestSummary,
) -> Result<(), CacheError> {
    let payload = Payload {
        stations: store.stations().cloned().collect(),
        status: store.status_records(),
        trips: store.trips().to_vec(),
        summary: summary.clone(),
    };
    let body = bincode::serialize(&payload)?;
    let io = |source| CacheError::Io { path: path.to_owned(), source };
    let tmp = path.with_extension("tmp");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&tmp).map_err(io)?);
    file.write_all(MAGIC).map_err(io)?;
    file.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io)?;
    file.write_all(&fingerprint.0).map_err(io)?;
    file.write_all(&Sha256::digest(&body)).map_err(io)?;
    file.write_all(&body).map_err(io)?;
    file.flush().map_err(io)?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load_cache(path: &Path, fingerprint: &InputFingerprint) -> Result<(HistoryStore, IngestSummary), CacheError> {
    let bytes = std::fs::read(path).map_err(|source| CacheError::Io { path: path.to_owned(), source })?;
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CACHE_VERSION {
        return Err(CacheError::Version(version));
    }
    if bytes[12..44] != fingerprint.0 {
        return Err(CacheError::Stale);
    }
    let body = &bytes[HEADER_LEN..];
    if Sha256::digest(body).as_slice() != &bytes[44..76] {
        return Err(CacheError::Checksum);
    }
    let payload: Payload = bincode::deserialize(body)?;
    let (store, _) = build_store(payload.stations, payload.status, payload.trips, false)?;
    Ok((store, payload.summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::load_dataset;

    fn write_dataset(dir: &Path) -> DatasetPaths {
        let paths = DatasetPaths::in_dir(dir);
        std::fs::write(
            &paths.stations,
            "station_id,name,lat,long,dockcount,landmark,installation\n1,A,37.1,-122.1,10,SF,2013-08-06\n2,B,37.2,-122.2,12,SF,2013-08-06\n",
        )
        .unwrap();
        std::fs::write(
            &paths.status,
            "station_id,bikes_available,docks_available,time\n1,4,6,2014-01-01 09:00:00\n2,7,5,2014-01-01 09:00:00\n1,x,6,2014-01-01 09:01:00\n",
        )
        .unwrap();
        std::fs::write(
            &paths.trips,
            "Trip ID,Duration,Start Date,Start Station,Start Terminal,End Date,End Station,End Terminal,Bike #,Zip Code,Subscription Type\n\
             10,300,2014-01-01 09:00:00,A,1,2014-01-01 09:05:00,B,2,5,94107,Subscriber\n",
        )
        .unwrap();
        paths
    }

    #[test]
    fn round_trip_and_invalidation() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_dataset(dir.path());
        let schema = SchemaConfig::default();
        let (store, summary) = load_dataset(&paths, &schema, false).unwrap();
        let fp = InputFingerprint::of(&paths, &schema, false).unwrap();
        let cache = dir.path().join("store.cache");
        save_cache(&cache, &fp, &store, &summary).unwrap();

        let (cached, cached_summary) = load_cache(&cache, &fp).unwrap();
        assert_eq!(cached, store);
        assert_eq!(cached_summary, summary);

        let strict_fp = InputFingerprint::of(&paths, &schema, true).unwrap();
        assert!(matches!(load_cache(&cache, &strict_fp), Err(CacheError::Stale)));

        let mut bytes = std::fs::read(&cache).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        std::fs::write(&cache, &bytes).unwrap();
        assert!(matches!(load_cache(&cache, &fp), Err(CacheError::Checksum)));

        bytes[8] = 99;
        std::fs::write(&cache, &bytes).unwrap();
        assert!(matches!(load_cache(&cache, &fp), Err(CacheError::Version(99))));
    }

    #[test]
    fn dataset_summary_counts() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_dataset(dir.path());
        let (store, summary) = load_dataset(&paths, &SchemaConfig::default(), false).unwrap();
        assert_eq!(store.stations().count(), 2);
        assert_eq!(summary.status.data_lines, 3);
        assert_eq!(summary.status.skipped, 1);
        assert_eq!(summary.trips.parsed, 1);
        assert_eq!(summary.build.trips, 1);
    }
}
