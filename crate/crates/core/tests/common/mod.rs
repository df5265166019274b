//! Synthetic datasets and naive full-scan oracles shared by the integration
//! tests. The oracles work on the raw record vectors and never touch the
//! store's indexes.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use velomule::analytics::{HistoryWindows, Weights};
use velomule::ingest::{build_store, DatasetPaths, HistoryStore, StationRecord, StatusRecord, TripRecord};
use velomule::sim::DrawSource;
use velomule::time::{TimeWindow, Timestamp};

pub fn ts(text: &str) -> Timestamp {
    Timestamp::parse(text).unwrap()
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn station(id: u32, dock_count: u32) -> StationRecord {
    StationRecord {
        station_id: id,
        name: format!("Station {id}"),
        latitude: 37.3 + f64::from(id) * 0.001,
        longitude: -121.9 - f64::from(id) * 0.001,
        dock_count,
        landmark: "San Jose".into(),
        installation: date(2013, 8, 6),
    }
}

pub fn status(station_id: u32, bikes: u32, docks: u32, at: Timestamp) -> StatusRecord {
    StatusRecord { station_id, bikes_available: bikes, docks_available: docks, at }
}

pub fn trip(trip_id: u64, from: u32, to: u32, start: Timestamp, duration: u64) -> TripRecord {
    TripRecord {
        trip_id,
        duration,
        start_at: start,
        end_at: start.plus_seconds(duration as i64),
        start_station_id: from,
        end_station_id: to,
        start_terminal: format!("Station {from}"),
        end_terminal: format!("Station {to}"),
        bike_no: 100 + (trip_id % 50) as u32,
        zip_code: "95112".into(),
        subscription_type: "Subscriber".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub stations: Vec<StationRecord>,
    pub status: Vec<StatusRecord>,
    pub trips: Vec<TripRecord>,
}

impl Dataset {
    pub fn store(&self) -> HistoryStore {
        build_store(self.stations.clone(), self.status.clone(), self.trips.clone(), true).unwrap().0
    }

    /// First day covered by the generator.
    pub fn origin() -> Timestamp {
        ts("2016-03-01 00:00:00")
    }
}

pub struct Limits {
    pub stations: u32,
    pub trips: usize,
    pub status: usize,
    pub days: u32,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { stations: 10, trips: 1000, status: 10_000, days: 70 }
    }
}

/// A random dataset within `limits`. Status readings fall on 5-minute marks
/// so the wait-series lookups find matches; a station never has two readings
/// at the same instant.
pub fn random_dataset(seed: u64, limits: &Limits) -> Dataset {
    let mut r = DrawSource::new(seed);
    let n_stations = 1 + r.below(u64::from(limits.stations)) as u32;
    let stations: Vec<StationRecord> =
        (1..=n_stations).map(|i| station(i * 3 + r.below(3) as u32, 5 + r.below(26) as u32)).collect();
    let ids: Vec<u32> = stations.iter().map(|s| s.station_id).collect();
    let origin = Dataset::origin();

    let n_status = r.up_to(limits.status as u64) as usize;
    let mut seen = BTreeSet::new();
    let mut status_rows = Vec::with_capacity(n_status);
    for _ in 0..n_status {
        let s = &stations[r.below(stations.len() as u64) as usize];
        let day = r.below(u64::from(limits.days)) as i64;
        // Concentrated on a few hours so reference instants hit readings.
        let minute = 60 * (7 + r.below(4) as i64) + 5 * r.below(12) as i64;
        let at = origin.plus_minutes(day * 1440 + minute);
        if !seen.insert((s.station_id, at)) {
            continue;
        }
        let bikes = r.up_to(u64::from(s.dock_count)) as u32;
        status_rows.push(status(s.station_id, bikes, s.dock_count - bikes, at));
    }

    let n_trips = r.up_to(limits.trips as u64) as usize;
    let trips = (0..n_trips)
        .map(|i| {
            let from = ids[r.below(ids.len() as u64) as usize];
            let to = ids[r.below(ids.len() as u64) as usize];
            let start = origin.plus_seconds(r.below(u64::from(limits.days) * 86_400) as i64);
            trip(i as u64 + 1, from, to, start, 60 + r.below(3600))
        })
        .collect();
    Dataset { stations, status: status_rows, trips }
}

/// A window inside (or overlapping) the generated span.
pub fn random_window(r: &mut DrawSource, days: u32) -> TimeWindow {
    if r.below(4) == 0 {
        return TimeWindow::everything();
    }
    let origin = Dataset::origin().plus_seconds(-86_400);
    let a = origin.plus_seconds(r.below(u64::from(days + 2) * 86_400) as i64);
    let b = a.plus_seconds(r.below(u64::from(days) * 86_400) as i64);
    TimeWindow::new(a, b)
}

/// Writes the three files with the original export's headers, so the
/// station name sits under "Start Station" and the id under "Start
/// Terminal".
pub fn write_dataset(dir: &Path, data: &Dataset) -> DatasetPaths {
    let paths = DatasetPaths::in_dir(dir);
    let mut text = String::from("station_id,name,lat,long,dockcount,landmark,installation\n");
    for s in &data.stations {
        let d = s.installation;
        writeln!(
            text,
            "{},\"{}\",{},{},{},{},{}/{}/{}",
            s.station_id,
            s.name,
            s.latitude,
            s.longitude,
            s.dock_count,
            s.landmark,
            d.month(),
            d.day(),
            d.year()
        )
        .unwrap();
    }
    std::fs::write(&paths.stations, text).unwrap();

    let mut text = String::from("station_id,bikes_available,docks_available,time\n");
    for s in &data.status {
        writeln!(text, "{},{},{},{}", s.station_id, s.bikes_available, s.docks_available, s.at).unwrap();
    }
    std::fs::write(&paths.status, text).unwrap();

    let mut text = String::from(
        "Trip ID,Duration,Start Date,Start Station,Start Terminal,End Date,End Station,End Terminal,Bike #,Subscription Type,Zip Code\n",
    );
    for t in &data.trips {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{}",
            t.trip_id,
            t.duration,
            t.start_at,
            t.start_terminal,
            t.start_station_id,
            t.end_at,
            t.end_terminal,
            t.end_station_id,
            t.bike_no,
            t.subscription_type,
            t.zip_code
        )
        .unwrap();
    }
    std::fs::write(&paths.trips, text).unwrap();
    paths
}

// ---- oracles ----

pub fn oracle_busyness(data: &Dataset, s: u32, w: &TimeWindow) -> (u64, u64) {
    let incoming = data.trips.iter().filter(|t| t.end_station_id == s && w.contains(&t.end_at)).count();
    let outgoing = data.trips.iter().filter(|t| t.start_station_id == s && w.contains(&t.start_at)).count();
    (incoming as u64, outgoing as u64)
}

pub fn oracle_hourly(data: &Dataset, s: u32, hour: u32, w: &TimeWindow) -> u64 {
    let incoming =
        data.trips.iter().filter(|t| t.end_station_id == s && w.contains(&t.end_at) && t.end_at.hour() == hour).count();
    let outgoing = data
        .trips
        .iter()
        .filter(|t| t.start_station_id == s && w.contains(&t.start_at) && t.start_at.hour() == hour)
        .count();
    (incoming + outgoing) as u64
}

fn on_route(t: &TripRecord, a: u32, b: u32) -> bool {
    (t.start_station_id == a && t.end_station_id == b) || (t.start_station_id == b && t.end_station_id == a)
}

pub fn oracle_route(data: &Dataset, a: u32, b: u32, w: &TimeWindow) -> u64 {
    data.trips.iter().filter(|t| on_route(t, a, b) && w.contains(&t.start_at)).count() as u64
}

pub fn oracle_trip_time(data: &Dataset, a: u32, b: u32, w: &TimeWindow) -> Option<f64> {
    let d: Vec<u64> =
        data.trips.iter().filter(|t| on_route(t, a, b) && w.contains(&t.start_at)).map(|t| t.duration).collect();
    (!d.is_empty()).then(|| d.iter().sum::<u64>() as f64 / d.len() as f64)
}

pub fn oracle_load(data: &Dataset, s: u32, at: Timestamp) -> Option<u32> {
    data.status
        .iter()
        .filter(|r| r.station_id == s && r.at <= at)
        .max_by_key(|r| r.at)
        .map(|r| r.bikes_available + r.docks_available)
}

/// The three reference-date sets, found by scanning every earlier date.
pub fn oracle_reference_dates(target: NaiveDate, windows: &HistoryWindows) -> [Vec<NaiveDate>; 3] {
    let mut sets = [Vec::new(), Vec::new(), Vec::new()];
    for back in 1..=(31 * (windows.months as i64 + 1)).max(7 * windows.weeks as i64) {
        let d = target - Duration::days(back);
        if d.weekday() == target.weekday() && back <= 7 * windows.weeks as i64 {
            sets[0].push(d);
        }
        if d.iso_week() == target.iso_week() {
            sets[1].push(d);
        }
        let months_back = (target.year() - d.year()) * 12 + target.month() as i32 - d.month() as i32;
        if d.day() == target.day() && months_back >= 1 && months_back <= windows.months as i32 {
            sets[2].push(d);
        }
    }
    sets
}

pub fn oracle_weighted(factors: [Option<f64>; 3], weights: &Weights) -> Option<f64> {
    let w = weights.values();
    let present: Vec<(f64, f64)> = (0..3).filter_map(|i| factors[i].map(|v| (w[i], v))).collect();
    let total_weight: f64 = present.iter().map(|(w, _)| w).sum();
    (total_weight > 0.0).then(|| present.iter().map(|(w, v)| w * v).sum::<f64>() / total_weight)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn oracle_forecast(
    data: &Dataset,
    s: u32,
    target: NaiveDate,
    weights: &Weights,
    windows: &HistoryWindows,
) -> Option<f64> {
    let factors = oracle_reference_dates(target, windows).map(|dates| {
        let daily: Vec<f64> = dates
            .iter()
            .filter_map(|d| {
                let bikes: Vec<f64> = data
                    .status
                    .iter()
                    .filter(|r| r.station_id == s && r.at.date() == *d)
                    .map(|r| f64::from(r.bikes_available))
                    .collect();
                mean(&bikes)
            })
            .collect();
        mean(&daily)
    });
    oracle_weighted(factors, weights)
}

/// Bikes at the latest reading in `[t - m, t]`, else the earliest in
/// `(t, t + m]`.
fn oracle_reading(readings: &[&StatusRecord], t: Timestamp, m: i64) -> Option<f64> {
    let before = readings.iter().filter(|r| r.at <= t && r.at >= t.plus_minutes(-m)).max_by_key(|r| r.at);
    let after = readings.iter().filter(|r| r.at > t && r.at <= t.plus_minutes(m)).min_by_key(|r| r.at);
    before.or(after).map(|r| f64::from(r.bikes_available))
}

/// Clamped probabilities per minute offset.
pub fn oracle_wait(
    data: &Dataset,
    s: u32,
    arrival: Timestamp,
    weights: &Weights,
    windows: &HistoryWindows,
    horizon: u32,
) -> Vec<Option<f64>> {
    let dock_count = data.stations.iter().find(|x| x.station_id == s).unwrap().dock_count;
    let readings: Vec<&StatusRecord> = data.status.iter().filter(|r| r.station_id == s).collect();
    let sets = oracle_reference_dates(arrival.date(), windows);
    (0..=horizon)
        .map(|offset| {
            let factors = sets.clone().map(|dates| {
                let values: Vec<f64> = dates
                    .iter()
                    .filter_map(|d| {
                        let t = Timestamp::from_naive(d.and_time(arrival.time_of_day())).plus_minutes(offset.into());
                        oracle_reading(&readings, t, windows.match_minutes)
                    })
                    .collect();
                mean(&values)
            });
            oracle_weighted(factors, weights).map(|v| (v / f64::from(dock_count)).clamp(0.0, 1.0))
        })
        .collect()
}

pub fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

pub fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => close(a, b),
        (None, None) => true,
        _ => false,
    }
}

/// Three stations with eight weeks of afternoon readings up to 2016-05-31
/// and a few hundred trips.
pub fn small_city() -> Dataset {
    let stations = vec![station(1, 20), station(2, 20), station(3, 15)];
    let start = date(2016, 4, 6);
    let mut rows = Vec::new();
    for s in &stations {
        for day in 0..56i64 {
            let d = start + Duration::days(day);
            for slot in 0..36i64 {
                let at = Timestamp::from_naive(d.and_hms_opt(15, 0, 0).unwrap()).plus_minutes(5 * slot);
                let b = ((day * 7 + slot * 3 + i64::from(s.station_id)) % i64::from(s.dock_count + 1)) as u32;
                rows.push(status(s.station_id, b, s.dock_count - b, at));
            }
        }
    }
    let mut r = DrawSource::new(5);
    let origin = Timestamp::from_date(start);
    let trips = (1..=300)
        .map(|i| {
            let from = 1 + r.below(3) as u32;
            let to = 1 + r.below(3) as u32;
            trip(i, from, to, origin.plus_seconds(r.below(56 * 86_400) as i64), 120 + r.below(1800))
        })
        .collect();
    Dataset { stations, status: rows, trips }
}
