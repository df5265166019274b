use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{IngestError, StationRecord, StatusRecord, TripRecord, DURATION_MISMATCH_SECONDS};
use crate::time::{TimeWindow, Timestamp};

/// Status readings of one station as parallel columns, ascending by time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatusSeries {
    pub at: Vec<Timestamp>,
    pub bikes: Vec<u32>,
    pub docks: Vec<u32>,
}

impl StatusSeries {
    pub fn len(&self) -> usize {
        self.at.len()
    }

    pub fn is_empty(&self) -> bool {
        self.at.is_empty()
    }

    /// Indices of readings with `start <= at < end`.
    pub fn range(&self, start: Timestamp, end: Timestamp) -> Range<usize> {
        let lo = self.at.partition_point(|t| *t < start);
        let hi = self.at.partition_point(|t| *t < end);
        lo..hi.max(lo)
    }

    /// Index of the latest reading at or before `at`.
    pub fn latest_at_or_before(&self, at: Timestamp) -> Option<usize> {
        self.at.partition_point(|t| *t <= at).checked_sub(1)
    }

    /// Index of the earliest reading strictly after `at`.
    pub fn earliest_after(&self, at: Timestamp) -> Option<usize> {
        let i = self.at.partition_point(|t| *t <= at);
        (i < self.at.len()).then_some(i)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub stations: usize,
    pub status: usize,
    pub trips: usize,
    pub dangling_status: usize,
    pub dangling_trips: usize,
    pub duplicate_stations: usize,
    pub duplicate_trips: usize,
    /// Trips kept whose recorded duration and timestamps disagree by more
    /// than a minute.
    pub duration_mismatches: usize,
}

/// Immutable, indexed snapshot of everything ingested.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoryStore {
    stations: BTreeMap<u32, StationRecord>,
    status: BTreeMap<u32, StatusSeries>,
    trips: Vec<TripRecord>,
    by_start: BTreeMap<u32, Vec<usize>>,
    by_end: BTreeMap<u32, Vec<usize>>,
    by_pair: BTreeMap<(u32, u32), Vec<usize>>,
}

/// Validates references and builds every index. With `strict` any dangling
/// reference or duplicate id is an error; otherwise the offending record is
/// dropped and counted.
pub fn build_store(
    stations: Vec<StationRecord>,
    status: Vec<StatusRecord>,
    trips: Vec<TripRecord>,
    strict: bool,
) -> Result<(HistoryStore, BuildSummary), IngestError> {
    let mut summary = BuildSummary::default();

    let mut station_map = BTreeMap::new();
    for station in stations {
        if station_map.contains_key(&station.station_id) {
            if strict {
                return Err(IngestError::Duplicate { kind: "station", id: station.station_id.into() });
            }
            summary.duplicate_stations += 1;
            continue;
        }
        station_map.insert(station.station_id, station);
    }

    let mut grouped: BTreeMap<u32, Vec<StatusRecord>> = BTreeMap::new();
    for record in status {
        if !station_map.contains_key(&record.station_id) {
            if strict {
                return Err(IngestError::Dangling { kind: "status", station_id: record.station_id });
            }
            summary.dangling_status += 1;
            continue;
        }
        grouped.entry(record.station_id).or_default().push(record);
    }
    let mut status_map = BTreeMap::new();
    for (station_id, mut records) in grouped {
        records.sort_by_key(|r| r.at);
        summary.status += records.len();
        let series = StatusSeries {
            at: records.iter().map(|r| r.at).collect(),
            bikes: records.iter().map(|r| r.bikes_available).collect(),
            docks: records.iter().map(|r| r.docks_available).collect(),
        };
        status_map.insert(station_id, series);
    }

    let mut seen_trips = BTreeSet::new();
    let mut kept = Vec::with_capacity(trips.len());
    for trip in trips {
        for station_id in [trip.start_station_id, trip.end_station_id] {
            if !station_map.contains_key(&station_id) && strict {
                return Err(IngestError::Dangling { kind: "trip", station_id });
            }
        }
        if !station_map.contains_key(&trip.start_station_id) || !station_map.contains_key(&trip.end_station_id) {
            summary.dangling_trips += 1;
            continue;
        }
        if !seen_trips.insert(trip.trip_id) {
            if strict {
                return Err(IngestError::Duplicate { kind: "trip", id: trip.trip_id });
            }
            summary.duplicate_trips += 1;
            continue;
        }
        if (trip.elapsed_seconds() - trip.duration as i64).abs() > DURATION_MISMATCH_SECONDS {
            summary.duration_mismatches += 1;
        }
        kept.push(trip);
    }
    kept.sort_by_key(|t| (t.start_at, t.trip_id));

    let mut by_start: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let mut by_end: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let mut by_pair: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, trip) in kept.iter().enumerate() {
        by_start.entry(trip.start_station_id).or_default().push(i);
        by_end.entry(trip.end_station_id).or_default().push(i);
        by_pair.entry((trip.start_station_id, trip.end_station_id)).or_default().push(i);
    }
    for list in by_end.values_mut() {
        list.sort_by_key(|&i| (kept[i].end_at, i));
    }

    summary.stations = station_map.len();
    summary.trips = kept.len();
    let store = HistoryStore { stations: station_map, status: status_map, trips: kept, by_start, by_end, by_pair };
    Ok((store, summary))
}

impl HistoryStore {
    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn stations(&self) -> impl Iterator<Item = &StationRecord> {
        self.stations.values()
    }

    pub fn station(&self, station_id: u32) -> Option<&StationRecord> {
        self.stations.get(&station_id)
    }

    pub fn station_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.stations.keys().copied()
    }

    pub fn status(&self, station_id: u32) -> Option<&StatusSeries> {
        self.status.get(&station_id)
    }

    pub fn status_count(&self) -> usize {
        self.status.values().map(StatusSeries::len).sum()
    }

    /// All trips, ascending by `(start_at, trip_id)`.
    pub fn trips(&self) -> &[TripRecord] {
        &self.trips
    }

    pub fn trip(&self, index: usize) -> &TripRecord {
        &self.trips[index]
    }

    /// Trip indices starting at the station, ascending by start time.
    pub fn trips_from(&self, station_id: u32) -> &[usize] {
        self.by_start.get(&station_id).map_or(&[], Vec::as_slice)
    }

    /// Trip indices ending at the station, ascending by end time.
    pub fn trips_to(&self, station_id: u32) -> &[usize] {
        self.by_end.get(&station_id).map_or(&[], Vec::as_slice)
    }

    /// Trip indices for the directed pair, ascending by start time.
    pub fn trips_between(&self, from: u32, to: u32) -> &[usize] {
        self.by_pair.get(&(from, to)).map_or(&[], Vec::as_slice)
    }

    /// Sub-slice of a start-ordered index whose start times fall in `window`.
    pub fn starting_in<'a>(&self, index: &'a [usize], window: &TimeWindow) -> &'a [usize] {
        let lo = index.partition_point(|&i| self.trips[i].start_at < window.start);
        let hi = index.partition_point(|&i| self.trips[i].start_at < window.end);
        &index[lo..hi.max(lo)]
    }

    /// Sub-slice of an end-ordered index whose end times fall in `window`.
    pub fn ending_in<'a>(&self, index: &'a [usize], window: &TimeWindow) -> &'a [usize] {
        let lo = index.partition_point(|&i| self.trips[i].end_at < window.start);
        let hi = index.partition_point(|&i| self.trips[i].end_at < window.end);
        &index[lo..hi.max(lo)]
    }

    /// Earliest and latest instant seen in status or trip data.
    pub fn time_span(&self) -> Option<(Timestamp, Timestamp)> {
        let status = self.status.values().filter_map(|s| Some((*s.at.first()?, *s.at.last()?)));
        let trips = self.trips.iter().map(|t| (t.start_at, t.end_at));
        status.chain(trips).reduce(|(lo, hi), (a, b)| (lo.min(a), hi.max(b)))
    }

    /// Flattens the status columns back into records, ordered by station then
    /// time.
    pub fn status_records(&self) -> Vec<StatusRecord> {
        self.status
            .iter()
            .flat_map(|(&station_id, s)| {
                (0..s.len()).map(move |i| StatusRecord {
                    station_id,
                    bikes_available: s.bikes[i],
                    docks_available: s.docks[i],
                    at: s.at[i],
                })
            })
            .collect()
    }
}
