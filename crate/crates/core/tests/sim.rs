use std::collections::BTreeMap;

use proptest::prelude::*;
use velomule::sim::{
    self, format_trace, init_simulation, offload, parse_trace, run_simulation, run_to_completion, step, EventKind,
    Phase, SimConfig, SimStation, World,
};

fn two_stations() -> SimConfig {
    SimConfig {
        n_bikes: 1,
        stations: vec![SimStation { station_id: 1, x: 0.0, y: 0.0 }, SimStation { station_id: 2, x: 400.0, y: 0.0 }],
        radio_range: 100.0,
        bike_speed: 4.0,
        sense_rate: 8,
        tick: 1.0,
        max_start_delay: 0.0,
        duration: 3600.0,
        seed: 1,
    }
}

#[test]
fn hand_geometry_two_stations() {
    // 400 m at 4 m/s is 100 ticks and 800 bytes. Within 100 m of A for the
    // first 25 ticks, then out of range until 300 m at tick 75.
    let config = two_stations();
    let mut world = World::with_plans(&config, &[(1, 2, 0)]).unwrap();
    while !world.all_arrived() {
        step(&mut world);
    }
    assert_eq!(world.time_ms, 100_000);
    let trace = world.trace();
    assert_eq!(trace.received_by_station, BTreeMap::from([(1, 200), (2, 600)]));
    assert_eq!(trace.sent_by_bike, BTreeMap::from([(1, 800)]));
    let bike = &world.bikes[0];
    assert_eq!((bike.total_generated, bike.total_sent, bike.buffer), (800, 800, 0));
    // The backlog goes over in one transfer on re-entering range.
    let first_to_b = trace.events.iter().find(|e| e.kind == EventKind::Send && e.station_id == Some(2)).unwrap();
    assert_eq!((first_to_b.time_ms, first_to_b.bytes), (75_000, 400));
}

#[test]
fn zero_sense_rate_emits_nothing() {
    let config = SimConfig { sense_rate: 0, ..SimConfig::default() };
    let world = run_to_completion(&config).unwrap();
    assert!(world.events.is_empty());
    assert!(world.all_arrived());
    assert!(world.bikes.iter().all(|b| b.total_generated == 0));
}

#[test]
fn seeds_change_the_run() {
    let a = run_simulation(&SimConfig { seed: 1, ..SimConfig::default() }).unwrap();
    let b = run_simulation(&SimConfig { seed: 2, ..SimConfig::default() }).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, run_simulation(&SimConfig { seed: 1, ..SimConfig::default() }).unwrap());
}

#[test]
fn source_stations_are_uniform() {
    // 1000 bikes over 6 stations: expected 166.7 each. The band [100, 233]
    // is more than five standard deviations wide on each side.
    for seed in 0..20 {
        let world = init_simulation(&SimConfig { n_bikes: 1000, seed, ..SimConfig::default() }).unwrap();
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for b in &world.bikes {
            *counts.entry(b.source_station).or_default() += 1;
            assert_ne!(b.source_station, b.dest_station);
            assert!(b.start_ms <= 300_000);
        }
        assert_eq!(counts.len(), 6);
        assert!(counts.values().all(|&c| (100..=233).contains(&c)), "seed {seed}: {counts:?}");
    }
}

#[test]
fn offload_split_exhaustive() {
    for k in 1..=6u32 {
        let ids: Vec<u32> = (1..=k).rev().collect();
        for bytes in 0..=1000u64 {
            let alloc = offload(&ids, bytes);
            assert_eq!(alloc.len(), k as usize);
            assert_eq!(alloc.iter().map(|(_, b)| b).sum::<u64>(), bytes);
            let max = alloc.iter().map(|(_, b)| *b).max().unwrap();
            let min = alloc.iter().map(|(_, b)| *b).min().unwrap();
            assert!(max - min <= 1);
            assert!(alloc.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 >= w[1].1));
        }
    }
    assert!(offload(&[], 10).is_empty());
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn config_strategy() -> impl Strategy<Value = SimConfig> {
    (1u32..=50, any::<u64>(), 1u32..=3600, 20.0f64..400.0, 1.0f64..12.0, 0u64..40, 0u32..600).prop_map(
        |(n_bikes, seed, duration, radio_range, bike_speed, sense_rate, delay)| SimConfig {
            n_bikes,
            seed,
            duration: f64::from(duration),
            radio_range,
            bike_speed,
            sense_rate,
            max_start_delay: f64::from(delay),
            ..SimConfig::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_tick_is_sane(config in config_strategy()) {
        let stations: BTreeMap<u32, (f64, f64)> = config.stations.iter().map(|s| (s.station_id, (s.x, s.y))).collect();
        let mut world = init_simulation(&config).unwrap();
        let duration_ms = (config.duration * 1000.0) as u64;
        let mut last_distance: Vec<f64> =
            world.bikes.iter().map(|b| distance(b.position, stations[&b.dest_station])).collect();
        while !world.all_arrived() && world.time_ms + 1000 <= duration_ms {
            let before = world.events.len();
            step(&mut world);
            for e in &world.events[before..] {
                prop_assert_eq!(e.time_ms, world.time_ms);
                let bike = &world.bikes[e.bike_id as usize - 1];
                if let Some(s) = e.station_id {
                    // Transfers only to stations in range of the bike's position at that tick.
                    prop_assert!(distance(bike.position, stations[&s]) <= config.radio_range + 1e-9);
                }
            }
            for (i, b) in world.bikes.iter().enumerate() {
                let d = distance(b.position, stations[&b.dest_station]);
                // Progress: never further from the destination.
                prop_assert!(d <= last_distance[i] + 1e-9);
                last_distance[i] = d;
                if b.phase == Phase::Arrived {
                    prop_assert_eq!(d, 0.0);
                    prop_assert_eq!(b.buffer, 0);
                }
                prop_assert_eq!(b.total_generated, b.total_sent + b.buffer);
            }
        }
        let trace = world.trace();
        let sent: u64 = trace.sent_by_bike.values().sum();
        let received: u64 = trace.received_by_station.values().sum();
        prop_assert_eq!(sent, received);
        for b in &world.bikes {
            prop_assert_eq!(trace.sent_by_bike.get(&b.bike_id).copied().unwrap_or(0), b.total_sent);
        }
        prop_assert_eq!(parse_trace(&format_trace(&trace)).unwrap(), trace);
    }
}

#[test]
fn arrival_takes_the_expected_ticks() {
    let config = two_stations();
    for start_ms in [0, 1, 999, 1000, 1001, 12_345] {
        let mut world = World::with_plans(&config, &[(2, 1, start_ms)]).unwrap();
        while !world.all_arrived() {
            step(&mut world);
        }
        // Riding starts in the tick containing start_ms and lasts 100 ticks.
        let first_tick = start_ms / 1000;
        assert_eq!(world.time_ms, (first_tick + 100) * 1000, "start {start_ms}");
    }
}

#[test]
fn projected_dataset_stations_keep_their_spacing() {
    let records: Vec<velomule::ingest::StationRecord> = [(1, 37.0, -122.0), (2, 37.0, -121.99), (3, 37.01, -122.0)]
        .iter()
        .map(|&(id, lat, lon)| velomule::ingest::StationRecord {
            station_id: id,
            name: String::new(),
            latitude: lat,
            longitude: lon,
            dock_count: 10,
            landmark: String::new(),
            installation: chrono::NaiveDate::from_ymd_opt(2013, 8, 6).unwrap(),
        })
        .collect();
    let projected = sim::project_stations(&records);
    let p: BTreeMap<u32, (f64, f64)> = projected.iter().map(|s| (s.station_id, (s.x, s.y))).collect();
    // 0.01 degrees of latitude is about 1112 m; of longitude at 37° about 888 m.
    assert!((distance(p[&1], p[&3]) - 1111.95).abs() < 1.0);
    assert!((distance(p[&1], p[&2]) - 888.0).abs() < 2.0);
}

const GOLDEN: &str = include_str!("golden/grid_10_bikes_seed_42_600s.trace");

fn golden_config() -> SimConfig {
    SimConfig { n_bikes: 10, seed: 42, duration: 600.0, ..SimConfig::default() }
}

#[test]
fn golden_trace_is_reproduced() {
    let trace = run_simulation(&golden_config()).unwrap();
    let text = format_trace(&trace);
    assert!(text == GOLDEN, "trace differs from the golden file");
    assert_eq!(parse_trace(GOLDEN).unwrap(), trace);
}
