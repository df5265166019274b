//! Naive civil timestamps in the `YYYY-MM-DD HH:MM:SS` form used by the
//! status and trip exports.
//!
//! No zone math happens anywhere in the crate: every instant is local civil
//! time exactly as it appears in the source files.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Length in bytes of the canonical text form.
pub const CANONICAL_LEN: usize = 19;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid timestamp at byte {offset}: {reason}")]
pub struct ParseError {
    pub offset: usize,
    pub reason: &'static str,
}

/// A civil date and time with one-second resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(NaiveDateTime);

impl Timestamp {
    pub fn new(year: i32, month: u32, day: u32, hour: u32, minute: u32, second: u32) -> Option<Self> {
        let date = NaiveDate::from_ymd_opt(year, month, day)?;
        let time = NaiveTime::from_hms_opt(hour, minute, second)?;
        Some(Timestamp(date.and_time(time)))
    }

    /// Parses the canonical form. Every field is zero-padded and the date and
    /// time are separated by exactly one space.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let bytes = text.as_bytes();
        for (offset, b) in bytes.iter().take(CANONICAL_LEN).enumerate() {
            let ok = match offset {
                4 | 7 => *b == b'-',
                10 => *b == b' ',
                13 | 16 => *b == b':',
                _ => b.is_ascii_digit(),
            };
            if !ok {
                let reason =
                    if matches!(offset, 4 | 7 | 10 | 13 | 16) { "unexpected separator" } else { "expected digit" };
                return Err(ParseError { offset, reason });
            }
        }
        if bytes.len() < CANONICAL_LEN {
            return Err(ParseError { offset: bytes.len(), reason: "unexpected end of input" });
        }
        if bytes.len() > CANONICAL_LEN {
            return Err(ParseError { offset: CANONICAL_LEN, reason: "trailing characters" });
        }
        let field = |start: usize, len: usize| -> u32 {
            bytes[start..start + len].iter().fold(0, |acc, b| acc * 10 + u32::from(b - b'0'))
        };
        let year = field(0, 4);
        let month = field(5, 2);
        let day = field(8, 2);
        let hour = field(11, 2);
        let minute = field(14, 2);
        let second = field(17, 2);

        if !(1..=12).contains(&month) {
            return Err(ParseError { offset: 5, reason: "month out of range" });
        }
        let date = NaiveDate::from_ymd_opt(year as i32, month, day)
            .ok_or(ParseError { offset: 8, reason: "day out of range" })?;
        if hour > 23 {
            return Err(ParseError { offset: 11, reason: "hour out of range" });
        }
        if minute > 59 {
            return Err(ParseError { offset: 14, reason: "minute out of range" });
        }
        if second > 59 {
            return Err(ParseError { offset: 17, reason: "second out of range" });
        }
        let time = NaiveTime::from_hms_opt(hour, minute, second).expect("components validated");
        Ok(Timestamp(date.and_time(time)))
    }

    /// Accepts `T` in place of the space separator, as used in URLs.
    pub fn parse_lenient(text: &str) -> Result<Self, ParseError> {
        if text.len() == CANONICAL_LEN && text.as_bytes()[10] == b'T' {
            let mut owned = text.to_owned();
            owned.replace_range(10..11, " ");
            Self::parse(&owned)
        } else {
            Self::parse(text)
        }
    }

    /// Parses with an arbitrary chrono format string. Used for exports whose
    /// timestamps are not in the canonical form.
    pub fn parse_with_format(text: &str, format: &str) -> Option<Self> {
        let parsed = NaiveDateTime::parse_from_str(text.trim(), format).ok()?;
        Some(Timestamp(parsed.with_nanosecond(0)?))
    }

    pub fn from_date(date: NaiveDate) -> Self {
        Timestamp(date.and_time(NaiveTime::MIN))
    }

    pub fn from_naive(value: NaiveDateTime) -> Self {
        Timestamp(value.with_nanosecond(0).unwrap_or(value))
    }

    /// The earliest instant representable in canonical form.
    pub fn min_value() -> Self {
        Timestamp::new(0, 1, 1, 0, 0, 0).expect("valid")
    }

    /// The latest instant representable in canonical form.
    pub fn max_value() -> Self {
        Timestamp::new(9999, 12, 31, 23, 59, 59).expect("valid")
    }

    pub fn naive(&self) -> NaiveDateTime {
        self.0
    }

    pub fn date(&self) -> NaiveDate {
        self.0.date()
    }

    pub fn time_of_day(&self) -> NaiveTime {
        self.0.time()
    }

    pub fn year(&self) -> i32 {
        self.0.year()
    }

    pub fn month(&self) -> u32 {
        self.0.month()
    }

    pub fn day(&self) -> u32 {
        self.0.day()
    }

    pub fn hour(&self) -> u32 {
        self.0.hour()
    }

    pub fn minute(&self) -> u32 {
        self.0.minute()
    }

    pub fn second(&self) -> u32 {
        self.0.second()
    }

    pub fn weekday(&self) -> Weekday {
        self.0.weekday()
    }

    pub fn minute_of_day(&self) -> u32 {
        self.hour() * 60 + self.minute()
    }

    pub fn plus_seconds(&self, seconds: i64) -> Self {
        Timestamp(self.0 + Duration::seconds(seconds))
    }

    pub fn plus_minutes(&self, minutes: i64) -> Self {
        self.plus_seconds(minutes * 60)
    }

    /// Signed number of seconds from `earlier` to `self`.
    pub fn seconds_since(&self, earlier: &Timestamp) -> i64 {
        (self.0 - earlier.0).num_seconds()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:04}-{:02}-{:02} {:02}:{:02}:{:02}",
            self.year(),
            self.month(),
            self.day(),
            self.hour(),
            self.minute(),
            self.second()
        )
    }
}

impl FromStr for Timestamp {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if serializer.is_human_readable() {
            serializer.collect_str(self)
        } else {
            serializer.serialize_i64(self.0.and_utc().timestamp())
        }
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        if deserializer.is_human_readable() {
            let text = String::deserialize(deserializer)?;
            Timestamp::parse_lenient(&text).map_err(serde::de::Error::custom)
        } else {
            let seconds = i64::deserialize(deserializer)?;
            chrono::DateTime::from_timestamp(seconds, 0)
                .map(|t| Timestamp(t.naive_utc()))
                .ok_or_else(|| serde::de::Error::custom("timestamp out of range"))
        }
    }
}

/// Half-open interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeWindow {
    pub fn new(start: Timestamp, end: Timestamp) -> Self {
        TimeWindow { start, end }
    }

    /// A window covering every canonical timestamp except the very last second
    /// of year 9999.
    pub fn everything() -> Self {
        TimeWindow { start: Timestamp::min_value(), end: Timestamp::max_value() }
    }

    pub fn contains(&self, at: &Timestamp) -> bool {
        self.start <= *at && *at < self.end
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Parses `START/END`, each side in canonical or `T`-separated form.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let (start, end) = text.split_once('/').ok_or(ParseError { offset: 0, reason: "expected START/END" })?;
        let start = Timestamp::parse_lenient(start.trim())?;
        let end = Timestamp::parse_lenient(end.trim())
            .map_err(|e| ParseError { offset: e.offset + text.find('/').unwrap_or(0) + 1, reason: e.reason })?;
        Ok(TimeWindow { start, end })
    }
}

impl Default for TimeWindow {
    fn default() -> Self {
        TimeWindow::everything()
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.start, self.end)
    }
}

/// Parses a `YYYY-MM-DD` date.
pub fn parse_date(text: &str) -> Result<NaiveDate, ParseError> {
    let full = format!("{} 00:00:00", text.trim());
    Timestamp::parse(&full).map(|t| t.date())
}
