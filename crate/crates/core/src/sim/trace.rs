//! Trace events and the line-oriented trace file.
//!
//! ```text
//! g <time> <bike_id> <bytes>
//! s <time> <bike_id> <station_id> <bytes>
//! r <time> <bike_id> <station_id> <bytes>
//! # bike <id> sent <bytes>
//! # station <id> received <bytes>
//! ```
//!
//! `<time>` is seconds with exactly three decimals.

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Generate,
    Send,
    Receive,
}

impl EventKind {
    fn tag(self) -> char {
        match self {
            EventKind::Generate => 'g',
            EventKind::Send => 's',
            EventKind::Receive => 'r',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub time_ms: u64,
    pub bike_id: u32,
    /// Absent for generation events.
    pub station_id: Option<u32>,
    pub bytes: u64,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}.{:03} {}", self.kind.tag(), self.time_ms / 1000, self.time_ms % 1000, self.bike_id)?;
        if let Some(station) = self.station_id {
            write!(f, " {station}")?;
        }
        write!(f, " {}", self.bytes)
    }
}

pub type TraceSummary = (BTreeMap<u32, u64>, BTreeMap<u32, u64>);

/// Events plus per-bike sent and per-station received byte totals. The
/// totals are exactly the fold of the events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub events: Vec<TraceEvent>,
    pub sent_by_bike: BTreeMap<u32, u64>,
    pub received_by_station: BTreeMap<u32, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("event {index}: receive without a matching send")]
    UnmatchedReceive { index: usize },
    #[error("{count} send events have no matching receive")]
    UnmatchedSend { count: usize },
    #[error("event {index}: time goes backwards")]
    OutOfOrder { index: usize },
    #[error("event {index}: zero-byte event")]
    Empty { index: usize },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

/// Folds events into per-bike sent and per-station received totals, checking
/// that every receive pairs with a send of the same time, bike, station and
/// size.
pub fn summarize_trace(events: &[TraceEvent]) -> Result<TraceSummary, TraceError> {
    let mut sent = BTreeMap::new();
    let mut received = BTreeMap::new();
    let mut pending: BTreeMap<(u64, u32, Option<u32>, u64), usize> = BTreeMap::new();
    let mut last_time = 0;
    for (index, event) in events.iter().enumerate() {
        if event.time_ms < last_time {
            return Err(TraceError::OutOfOrder { index });
        }
        last_time = event.time_ms;
        if event.bytes == 0 {
            return Err(TraceError::Empty { index });
        }
        let key = (event.time_ms, event.bike_id, event.station_id, event.bytes);
        match event.kind {
            EventKind::Generate => {}
            EventKind::Send => {
                *pending.entry(key).or_default() += 1;
                *sent.entry(event.bike_id).or_default() += event.bytes;
            }
            EventKind::Receive => {
                let station = event.station_id.ok_or(TraceError::UnmatchedReceive { index })?;
                match pending.get_mut(&key) {
                    Some(n) if *n > 0 => *n -= 1,
                    _ => return Err(TraceError::UnmatchedReceive { index }),
                }
                *received.entry(station).or_default() += event.bytes;
            }
        }
    }
    let unmatched: usize = pending.values().sum();
    if unmatched > 0 {
        return Err(TraceError::UnmatchedSend { count: unmatched });
    }
    Ok((sent, received))
}

/// Renders the trace file: one line per event, then the summary block.
pub fn format_trace(trace: &SimTrace) -> String {
    let mut out = String::with_capacity(trace.events.len() * 24);
    for event in &trace.events {
        writeln!(out, "{event}").expect("writing to a String");
    }
    for (bike, bytes) in &trace.sent_by_bike {
        writeln!(out, "# bike {bike} sent {bytes}").expect("writing to a String");
    }
    for (station, bytes) in &trace.received_by_station {
        writeln!(out, "# station {station} received {bytes}").expect("writing to a String");
    }
    out
}

fn parse_time(text: &str) -> Option<u64> {
    let (secs, millis) = text.split_once('.')?;
    if millis.len() != 3 || secs.is_empty() || !secs.bytes().chain(millis.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    secs.parse::<u64>().ok()?.checked_mul(1000)?.checked_add(millis.parse().ok()?)
}

/// Parses a trace file back into a [`SimTrace`]. The summary block is
/// recomputed from the events and must agree with what the file states.
pub fn parse_trace(text: &str) -> Result<SimTrace, TraceError> {
    let mut events = Vec::new();
    let mut stated_sent = BTreeMap::new();
    let mut stated_received = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let syntax = |reason: &str| TraceError::Syntax { line: line_no, reason: reason.to_string() };
        let fields: Vec<&str> = line.split(' ').collect();
        let number = |s: &str| s.parse::<u64>().map_err(|_| syntax("expected an integer"));
        let id = |s: &str| s.parse::<u32>().map_err(|_| syntax("expected an id"));
        match fields.as_slice() {
            ["#", "bike", bike, "sent", bytes] => {
                stated_sent.insert(id(bike)?, number(bytes)?);
            }
            ["#", "station", station, "received", bytes] => {
                stated_received.insert(id(station)?, number(bytes)?);
            }
            ["g", time, bike, bytes] => events.push(TraceEvent {
                kind: EventKind::Generate,
                time_ms: parse_time(time).ok_or_else(|| syntax("bad time"))?,
                bike_id: id(bike)?,
                station_id: None,
                bytes: number(bytes)?,
            }),
            [tag @ ("s" | "r"), time, bike, station, bytes] => events.push(TraceEvent {
                kind: if *tag == "s" { EventKind::Send } else { EventKind::Receive },
                time_ms: parse_time(time).ok_or_else(|| syntax("bad time"))?,
                bike_id: id(bike)?,
                station_id: Some(id(station)?),
                bytes: number(bytes)?,
            }),
            _ => return Err(syntax("unrecognized line")),
        }
    }
    let (sent_by_bike, received_by_station) = summarize_trace(&events)?;
    if stated_sent != sent_by_bike || stated_received != received_by_station {
        return Err(TraceError::Syntax { line: 0, reason: "summary block disagrees with events".into() });
    }
    Ok(SimTrace { events, sent_by_bike, received_by_station })
}
