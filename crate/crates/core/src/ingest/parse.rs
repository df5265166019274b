use std::io::Read;
use std::str::FromStr;

use chrono::NaiveDate;
use csv::{ReaderBuilder, StringRecord};
use serde::{Deserialize, Serialize};

use super::schema::{ColumnMap, TableSchema};
use super::{IngestError, StationRecord, StatusRecord, TripRecord};
use crate::time::Timestamp;

/// Row errors kept verbatim; later ones are only counted.
const MAX_KEPT_ERRORS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub data_lines: usize,
    pub parsed: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub data_lines: usize,
    pub skipped: usize,
    /// The first few row errors, in file order.
    pub errors: Vec<RowError>,
}

impl<T> Parsed<T> {
    pub fn stats(&self) -> ParseStats {
        ParseStats { data_lines: self.data_lines, parsed: self.records.len(), skipped: self.skipped }
    }
}

struct Row<'a> {
    record: &'a StringRecord,
    columns: &'a ColumnMap,
    fields: &'static [&'static str],
    schema: &'a TableSchema,
    line: u64,
}

impl Row<'_> {
    fn error(&self, field: usize, reason: impl Into<String>) -> RowError {
        RowError { line: self.line, column: self.fields[field].to_string(), reason: reason.into() }
    }

    fn text(&self, field: usize) -> Result<&str, RowError> {
        self.columns.get(self.record, field).ok_or_else(|| self.error(field, "missing field"))
    }

    fn number<N: FromStr>(&self, field: usize) -> Result<N, RowError> {
        let raw = self.text(field)?;
        raw.parse().map_err(|_| self.error(field, format!("unparsable number {raw:?}")))
    }

    fn decimal(&self, field: usize) -> Result<f64, RowError> {
        let value: f64 = self.number(field)?;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.error(field, "non-finite number"))
        }
    }

    fn timestamp(&self, field: usize) -> Result<Timestamp, RowError> {
        let raw = self.text(field)?;
        match Timestamp::parse(raw) {
            Ok(t) => Ok(t),
            Err(canonical) => self
                .schema
                .timestamp_formats
                .iter()
                .find_map(|format| Timestamp::parse_with_format(raw, format))
                .ok_or_else(|| self.error(field, canonical.to_string())),
        }
    }

    fn date(&self, field: usize) -> Result<NaiveDate, RowError> {
        let raw = self.text(field)?;
        match crate::time::parse_date(raw) {
            Ok(d) => Ok(d),
            Err(canonical) => self
                .schema
                .date_formats
                .iter()
                .find_map(|format| NaiveDate::parse_from_str(raw, format).ok())
                .ok_or_else(|| self.error(field, canonical.to_string())),
        }
    }
}

fn parse_table<R: Read, T>(
    reader: R,
    schema: &TableSchema,
    fields: &'static [&'static str],
    strict: bool,
    convert: impl Fn(&Row<'_>) -> Result<T, RowError>,
) -> Result<Parsed<T>, IngestError> {
    let mut csv = ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = csv.headers()?.clone();
    let columns = schema.resolve(&headers, fields)?;

    let mut parsed = Parsed { records: Vec::new(), data_lines: 0, skipped: 0, errors: Vec::new() };
    let mut record = StringRecord::new();
    loop {
        let result = match csv.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                convert(&Row { record: &record, columns: &columns, fields, schema, line })
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if !matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) {
                    return Err(e.into());
                }
                Err(RowError { line, column: String::new(), reason: e.to_string() })
            }
        };
        parsed.data_lines += 1;
        match result {
            Ok(value) => parsed.records.push(value),
            Err(error) if strict => return Err(IngestError::Row(error)),
            Err(error) => {
                parsed.skipped += 1;
                if parsed.errors.len() < MAX_KEPT_ERRORS {
                    parsed.errors.push(error);
                }
            }
        }
    }
    Ok(parsed)
}

const STATION_FIELDS: &[&str] =
    &["station_id", "name", "latitude", "longitude", "dock_count", "landmark", "installation"];

pub fn parse_station_csv<R: Read>(
    reader: R,
    schema: &TableSchema,
    strict: bool,
) -> Result<Parsed<StationRecord>, IngestError> {
    parse_table(reader, schema, STATION_FIELDS, strict, |row| {
        let latitude = row.decimal(2)?;
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(row.error(2, "latitude out of range"));
        }
        let longitude = row.decimal(3)?;
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(row.error(3, "longitude out of range"));
        }
        let dock_count: u32 = row.number(4)?;
        if dock_count == 0 {
            return Err(row.error(4, "dock count must be positive"));
        }
        Ok(StationRecord {
            station_id: row.number(0)?,
            name: row.text(1)?.to_string(),
            latitude,
            longitude,
            dock_count,
            landmark: row.text(5)?.to_string(),
            installation: row.date(6)?,
        })
    })
}

const STATUS_FIELDS: &[&str] = &["station_id", "bikes_available", "docks_available", "at"];

pub fn parse_status_csv<R: Read>(
    reader: R,
    schema: &TableSchema,
    strict: bool,
) -> Result<Parsed<StatusRecord>, IngestError> {
    parse_table(reader, schema, STATUS_FIELDS, strict, |row| {
        Ok(StatusRecord {
            station_id: row.number(0)?,
            bikes_available: row.number(1)?,
            docks_available: row.number(2)?,
            at: row.timestamp(3)?,
        })
    })
}

const TRIP_FIELDS: &[&str] = &[
    "trip_id",
    "duration",
    "start_at",
    "start_station_id",
    "start_terminal",
    "end_at",
    "end_station_id",
    "end_terminal",
    "bike_no",
    "zip_code",
    "subscription_type",
];

pub fn parse_trip_csv<R: Read>(
    reader: R,
    schema: &TableSchema,
    strict: bool,
) -> Result<Parsed<TripRecord>, IngestError> {
    parse_table(reader, schema, TRIP_FIELDS, strict, |row| {
        let duration: u64 = row.number(1)?;
        if duration == 0 {
            return Err(row.error(1, "duration must be positive"));
        }
        let start_at = row.timestamp(2)?;
        let end_at = row.timestamp(5)?;
        if end_at < start_at {
            return Err(row.error(5, "trip ends before it starts"));
        }
        Ok(TripRecord {
            trip_id: row.number(0)?,
            duration,
            start_at,
            end_at,
            start_station_id: row.number(3)?,
            end_station_id: row.number(6)?,
            start_terminal: row.text(4)?.to_string(),
            end_terminal: row.text(7)?.to_string(),
            bike_no: row.number(8)?,
            zip_code: row.text(9)?.to_string(),
            subscription_type: row.text(10)?.to_string(),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const STATION_HEADER: &str = "Station_ID,Name,Latitude,Longitude,Dock_count,Landmark,Installation\n";

    #[test]
    fn single_station_row() {
        let text =
            format!("{STATION_HEADER}2,\"San Jose Diridon, Caltrain\",37.329732,-121.901782,27,San Jose,2013-08-06\n");
        let parsed = parse_station_csv(text.as_bytes(), &TableSchema::station_default(), false).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let s = &parsed.records[0];
        assert_eq!(s.station_id, 2);
        assert_eq!(s.name, "San Jose Diridon, Caltrain");
        assert_eq!(s.latitude, 37.329732);
        assert_eq!(s.longitude, -121.901782);
        assert_eq!(s.dock_count, 27);
        assert_eq!(s.landmark, "San Jose");
        assert_eq!(s.installation, NaiveDate::from_ymd_opt(2013, 8, 6).unwrap());
    }

    #[test]
    fn bad_dock_count_skips_only_that_row() {
        let text = format!(
            "{STATION_HEADER}2,A,37.3,-121.9,27,SJ,2013-08-06\n3,B,37.3,-121.9,abc,SJ,2013-08-06\n4,C,37.3,-121.9,15,SJ,8/6/2013\n"
        );
        let parsed = parse_station_csv(text.as_bytes(), &TableSchema::station_default(), false).unwrap();
        assert_eq!(parsed.records.iter().map(|s| s.station_id).collect::<Vec<_>>(), vec![2, 4]);
        assert_eq!(parsed.skipped, 1);
        assert_eq!(parsed.errors[0].line, 3);
        assert_eq!(parsed.errors[0].column, "dock_count");
        assert_eq!(parsed.stats(), ParseStats { data_lines: 3, parsed: 2, skipped: 1 });
    }

    #[test]
    fn strict_mode_fails_fast() {
        let text = format!("{STATION_HEADER}3,B,37.3,-121.9,abc,SJ,2013-08-06\n");
        let err = parse_station_csv(text.as_bytes(), &TableSchema::station_default(), true).unwrap_err();
        assert!(matches!(err, IngestError::Row(RowError { line: 2, .. })));
    }

    #[test]
    fn out_of_range_coordinates_and_zero_docks() {
        let text =
            format!("{STATION_HEADER}1,A,91,0,5,X,2013-08-06\n2,B,0,181,5,X,2013-08-06\n3,C,0,0,0,X,2013-08-06\n");
        let parsed = parse_station_csv(text.as_bytes(), &TableSchema::station_default(), false).unwrap();
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.skipped, 3);
    }

    #[test]
    fn status_columns_follow_header_not_position() {
        let text = "station_id,bikes_available,docks_available,time\n2,11,16,2014-01-05 09:00:00\n";
        let parsed = parse_status_csv(text.as_bytes(), &TableSchema::status_default(), false).unwrap();
        assert_eq!(
            parsed.records,
            vec![StatusRecord {
                station_id: 2,
                bikes_available: 11,
                docks_available: 16,
                at: Timestamp::parse("2014-01-05 09:00:00").unwrap()
            }]
        );

        let reordered = "Time,Dock_available,Bikes_available,Station_ID\n2014-01-05 09:00:00,16,11,2\n";
        let again = parse_status_csv(reordered.as_bytes(), &TableSchema::status_default(), false).unwrap();
        assert_eq!(again.records, parsed.records);
    }

    #[test]
    fn configured_timestamp_format() {
        let mut schema = TableSchema::status_default();
        schema.timestamp_formats.push("%Y/%m/%d %H:%M:%S".into());
        let text = "station_id,bikes_available,docks_available,time\n2,2,25,2013/08/29 12:06:01\n";
        let parsed = parse_status_csv(text.as_bytes(), &schema, false).unwrap();
        assert_eq!(parsed.records[0].at.to_string(), "2013-08-29 12:06:01");
    }

    const TRIP_HEADER: &str = "Trip_ID,Duration,Start_Date,Start_Station,Start_Terminal,End_Date,End_Station,End_Terminal,Bike_No.,Zip_Code,Subscription_Type\n";

    #[test]
    fn trip_ending_before_start_is_skipped() {
        let text = format!(
            "{TRIP_HEADER}1,60,2014-01-01 10:00:00,S2,2,2014-01-01 09:00:00,S3,3,100,94107,Subscriber\n\
             2,60,2014-01-01 10:00:00,S2,2,2014-01-01 10:01:00,S3,3,100,94107,Subscriber\n"
        );
        let parsed = parse_trip_csv(text.as_bytes(), &TableSchema::trip_default(), false).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].trip_id, 2);
        assert_eq!(parsed.errors[0].column, "end_at");
    }

    #[test]
    fn zero_duration_and_short_rows_are_row_errors() {
        let text = format!(
            "{TRIP_HEADER}1,0,2014-01-01 10:00:00,S2,2,2014-01-01 10:00:00,S3,3,100,94107,Subscriber\n2,60,2014-01-01 10:00:00\n"
        );
        let parsed = parse_trip_csv(text.as_bytes(), &TableSchema::trip_default(), false).unwrap();
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.stats(), ParseStats { data_lines: 2, parsed: 0, skipped: 2 });
    }
}
