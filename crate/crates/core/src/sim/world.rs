use serde::{Deserialize, Serialize};

use super::rng::DrawSource;
use super::trace::{summarize_trace, EventKind, SimTrace, TraceEvent};
use super::{ConfigError, SimConfig, SimStation, Timing};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Waiting,
    Riding,
    Arrived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BikeState {
    pub bike_id: u32,
    pub source_station: u32,
    pub dest_station: u32,
    /// Milliseconds. The bike rides from the start of the tick containing
    /// this instant.
    pub start_ms: u64,
    /// Meters.
    pub position: (f64, f64),
    /// Bytes sensed but not yet sent.
    pub buffer: u64,
    pub total_generated: u64,
    pub total_sent: u64,
    pub phase: Phase,
    origin: (f64, f64),
    destination: (f64, f64),
    segment_length: f64,
    ticks_ridden: u64,
    /// Sensed byte-milliseconds not yet amounting to a whole byte.
    sense_carry: u64,
}

impl BikeState {
    fn new(bike_id: u32, source: &SimStation, dest: &SimStation, start_ms: u64) -> Self {
        let (dx, dy) = (dest.x - source.x, dest.y - source.y);
        BikeState {
            bike_id,
            source_station: source.station_id,
            dest_station: dest.station_id,
            start_ms,
            position: (source.x, source.y),
            buffer: 0,
            total_generated: 0,
            total_sent: 0,
            phase: Phase::Waiting,
            origin: (source.x, source.y),
            destination: (dest.x, dest.y),
            segment_length: (dx * dx + dy * dy).sqrt(),
            ticks_ridden: 0,
            sense_carry: 0,
        }
    }
}

/// Complete simulation state between ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub config: SimConfig,
    /// Milliseconds since the start of the run.
    pub time_ms: u64,
    pub bikes: Vec<BikeState>,
    pub events: Vec<TraceEvent>,
    stations: Vec<SimStation>,
    timing: Timing,
}

/// Draws every bike's source, destination and start time. Draws happen in
/// bike id order, and per bike in the order source, destination, start.
pub fn init_simulation(config: &SimConfig) -> Result<World, ConfigError> {
    let timing = config.timing()?;
    let mut stations = config.stations.clone();
    stations.sort_by_key(|s| s.station_id);

    let mut draws = DrawSource::new(config.seed);
    let n = stations.len() as u64;
    let bikes = (1..=config.n_bikes)
        .map(|bike_id| {
            let source = draws.below(n) as usize;
            let mut dest = draws.below(n - 1) as usize;
            if dest >= source {
                dest += 1;
            }
            let start_ms = draws.up_to(timing.max_start_delay_ms);
            BikeState::new(bike_id, &stations[source], &stations[dest], start_ms)
        })
        .collect();
    Ok(World { config: config.clone(), time_ms: 0, bikes, events: Vec::new(), stations, timing })
}

impl World {
    /// Builds a world with hand-placed bikes instead of random draws.
    /// Each plan is `(source_station, dest_station, start_ms)`.
    pub fn with_plans(config: &SimConfig, plans: &[(u32, u32, u64)]) -> Result<World, ConfigError> {
        let timing = config.timing()?;
        let mut stations = config.stations.clone();
        stations.sort_by_key(|s| s.station_id);
        let find = |id: u32| {
            stations
                .iter()
                .find(|s| s.station_id == id)
                .ok_or_else(|| ConfigError { field: "stations", reason: format!("no station {id}") })
        };
        let mut bikes = Vec::with_capacity(plans.len());
        for (i, &(source, dest, start_ms)) in plans.iter().enumerate() {
            if source == dest {
                return Err(ConfigError { field: "stations", reason: "source equals destination".into() });
            }
            bikes.push(BikeState::new(i as u32 + 1, find(source)?, find(dest)?, start_ms));
        }
        Ok(World { config: config.clone(), time_ms: 0, bikes, events: Vec::new(), stations, timing })
    }

    pub fn all_arrived(&self) -> bool {
        self.bikes.iter().all(|b| b.phase == Phase::Arrived)
    }

    /// Stations within radio range of `position`, ascending by id.
    pub fn stations_in_range(&self, position: (f64, f64)) -> Vec<u32> {
        let r2 = self.config.radio_range * self.config.radio_range;
        self.stations
            .iter()
            .filter(|s| {
                let (dx, dy) = (s.x - position.0, s.y - position.1);
                dx * dx + dy * dy <= r2
            })
            .map(|s| s.station_id)
            .collect()
    }

    pub fn trace(&self) -> SimTrace {
        let (sent_by_bike, received_by_station) =
            summarize_trace(&self.events).expect("simulator emits well-formed traces");
        SimTrace { events: self.events.clone(), sent_by_bike, received_by_station }
    }
}

/// Splits `bytes` evenly across the stations; the remainder goes one byte
/// each to the lowest station ids. Returns one entry per station, ascending
/// by id, including zero allocations.
pub fn offload(in_range_stations: &[u32], bytes: u64) -> Vec<(u32, u64)> {
    if in_range_stations.is_empty() {
        return Vec::new();
    }
    let mut ids = in_range_stations.to_vec();
    ids.sort_unstable();
    let k = ids.len() as u64;
    let (share, remainder) = (bytes / k, bytes % k);
    ids.into_iter().enumerate().map(|(i, id)| (id, share + u64::from((i as u64) < remainder))).collect()
}

/// Advances the world by one tick: every riding bike moves, senses, and
/// drains its buffer to the stations in range. Events carry the time at the
/// end of the tick.
pub fn step(world: &mut World) {
    let tick_ms = world.timing.tick_ms;
    let now = world.time_ms + tick_ms;
    let speed = world.config.bike_speed;
    let sense_rate = world.config.sense_rate;

    for index in 0..world.bikes.len() {
        let bike = &mut world.bikes[index];
        if bike.phase == Phase::Waiting && bike.start_ms < now {
            bike.phase = Phase::Riding;
        }
        if bike.phase != Phase::Riding {
            continue;
        }

        bike.ticks_ridden += 1;
        let travelled = speed * (bike.ticks_ridden * tick_ms) as f64 / 1000.0;
        let arrived = travelled >= bike.segment_length;
        bike.position = if arrived {
            bike.destination
        } else {
            let f = travelled / bike.segment_length;
            (
                bike.origin.0 + (bike.destination.0 - bike.origin.0) * f,
                bike.origin.1 + (bike.destination.1 - bike.origin.1) * f,
            )
        };

        let sensed = sense_rate * tick_ms + bike.sense_carry;
        let generated = sensed / 1000;
        bike.sense_carry = sensed % 1000;
        let bike_id = bike.bike_id;
        if generated > 0 {
            bike.buffer += generated;
            bike.total_generated += generated;
            world.events.push(TraceEvent {
                kind: EventKind::Generate,
                time_ms: now,
                bike_id,
                station_id: None,
                bytes: generated,
            });
        }

        let position = world.bikes[index].position;
        let buffer = world.bikes[index].buffer;
        if buffer > 0 {
            let in_range = world.stations_in_range(position);
            for (station_id, bytes) in offload(&in_range, buffer) {
                if bytes == 0 {
                    continue;
                }
                for kind in [EventKind::Send, EventKind::Receive] {
                    world.events.push(TraceEvent { kind, time_ms: now, bike_id, station_id: Some(station_id), bytes });
                }
                let bike = &mut world.bikes[index];
                bike.buffer -= bytes;
                bike.total_sent += bytes;
            }
        }

        if arrived {
            world.bikes[index].phase = Phase::Arrived;
        }
    }
    world.time_ms = now;
}

/// Steps until every bike has arrived or the next tick would pass the
/// configured duration.
pub fn run_to_completion(config: &SimConfig) -> Result<World, ConfigError> {
    let mut world = init_simulation(config)?;
    while !world.all_arrived() && world.time_ms + world.timing.tick_ms <= world.timing.duration_ms {
        step(&mut world);
    }
    Ok(world)
}

pub fn run_simulation(config: &SimConfig) -> Result<SimTrace, ConfigError> {
    Ok(run_to_completion(config)?.trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::grid_stations;

    fn line_config(stations: &[(u32, f64, f64)]) -> SimConfig {
        SimConfig {
            n_bikes: 1,
            stations: stations.iter().map(|&(station_id, x, y)| SimStation { station_id, x, y }).collect(),
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
    fn equal_split_examples() {
        assert_eq!(offload(&[4], 100), vec![(4, 100)]);
        assert_eq!(offload(&[1, 2], 100), vec![(1, 50), (2, 50)]);
        assert_eq!(offload(&[5, 2, 9], 100), vec![(2, 34), (5, 33), (9, 33)]);
        assert!(offload(&[], 100).is_empty());
        assert_eq!(offload(&[3, 1], 1), vec![(1, 1), (3, 0)]);
    }

    #[test]
    fn init_is_deterministic_and_valid() {
        let config = SimConfig { n_bikes: 200, ..SimConfig::default() };
        let a = init_simulation(&config).unwrap();
        let b = init_simulation(&config).unwrap();
        assert_eq!(a, b);
        for bike in &a.bikes {
            assert_ne!(bike.source_station, bike.dest_station);
            assert!(bike.start_ms <= 300_000);
        }
        let one = SimConfig { stations: grid_stations()[..1].to_vec(), ..SimConfig::default() };
        assert_eq!(init_simulation(&one).unwrap_err().field, "stations");
    }

    #[test]
    fn arrives_on_tick_twenty() {
        let mut config = line_config(&[(1, 0.0, 0.0), (2, 100.0, 0.0)]);
        config.bike_speed = 5.0;
        let mut world = World::with_plans(&config, &[(1, 2, 0)]).unwrap();
        for tick in 1..=20 {
            assert_ne!(world.bikes[0].phase, Phase::Arrived, "arrived early at tick {tick}");
            step(&mut world);
        }
        assert_eq!(world.bikes[0].phase, Phase::Arrived);
        assert_eq!(world.bikes[0].position, (100.0, 0.0));
        assert_eq!(world.time_ms, 20_000);
    }

    #[test]
    fn out_of_range_bike_only_moves() {
        let mut config = line_config(&[(1, 0.0, 0.0), (2, 1000.0, 0.0)]);
        config.sense_rate = 0;
        let mut world = World::with_plans(&config, &[(1, 2, 0)]).unwrap();
        for _ in 0..50 {
            step(&mut world);
        }
        assert_eq!(world.bikes[0].position, (200.0, 0.0));
        assert!(world.events.is_empty());
    }

    #[test]
    fn closed_range_boundary() {
        let config = line_config(&[(1, 0.0, 0.0), (2, 1000.0, 0.0)]);
        let world = World::with_plans(&config, &[(1, 2, 0)]).unwrap();
        assert_eq!(world.stations_in_range((100.0, 0.0)), vec![1]);
        assert!(world.stations_in_range((100.000001, 0.0)).is_empty());
    }

    #[test]
    fn waits_for_start_tick() {
        let config = line_config(&[(1, 0.0, 0.0), (2, 1000.0, 0.0)]);
        let mut world = World::with_plans(&config, &[(1, 2, 2500)]).unwrap();
        step(&mut world);
        step(&mut world);
        assert_eq!(world.bikes[0].phase, Phase::Waiting);
        step(&mut world);
        assert_eq!(world.bikes[0].phase, Phase::Riding);
        assert_eq!(world.bikes[0].position, (4.0, 0.0));
    }

    #[test]
    fn fractional_sense_rate_carries_remainder() {
        let mut config = line_config(&[(1, 0.0, 0.0), (2, 10_000.0, 0.0)]);
        config.tick = 0.3;
        config.sense_rate = 5;
        let mut world = World::with_plans(&config, &[(1, 2, 0)]).unwrap();
        for _ in 0..10 {
            step(&mut world);
        }
        // Ten ticks of 0.3 s at 5 B/s is exactly 15 bytes.
        assert_eq!(world.bikes[0].total_generated, 15);
        assert_eq!(world.bikes[0].total_generated, world.bikes[0].total_sent + world.bikes[0].buffer);
    }
}
