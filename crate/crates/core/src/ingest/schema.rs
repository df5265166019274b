//! Header-name resolution for the three CSV exports.
//!
//! Columns are located by header name, never by position. Each logical field
//! carries a list of accepted header names; matching ignores case and any
//! non-alphanumeric characters, so `Bike_No.`, `bike no` and `BIKENO` are the
//! same column.

use std::collections::BTreeMap;

use csv::StringRecord;
use serde::{Deserialize, Serialize};

use super::IngestError;

pub(crate) fn normalize_header(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect()
}

/// Accepted header names for every field of one table, plus extra timestamp
/// and date formats to try after the canonical form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableSchema {
    pub columns: BTreeMap<String, Vec<String>>,
    /// chrono format strings, tried in order after the canonical form fails.
    pub timestamp_formats: Vec<String>,
    pub date_formats: Vec<String>,
}

impl TableSchema {
    fn with_columns(columns: &[(&str, &[&str])]) -> Self {
        TableSchema {
            columns: columns
                .iter()
                .map(|(field, names)| (field.to_string(), names.iter().map(|n| n.to_string()).collect()))
                .collect(),
            // Layouts seen in the original exports.
            timestamp_formats: vec!["%Y/%m/%d %H:%M:%S".to_string(), "%m/%d/%Y %H:%M".to_string()],
            date_formats: vec!["%m/%d/%Y".to_string()],
        }
    }

    pub fn station_default() -> Self {
        Self::with_columns(&[
            ("station_id", &["station_id", "id"]),
            ("name", &["name"]),
            ("latitude", &["latitude", "lat"]),
            ("longitude", &["longitude", "long", "lon", "lng"]),
            ("dock_count", &["dock_count", "dockcount"]),
            ("landmark", &["landmark", "city"]),
            ("installation", &["installation", "installation_date"]),
        ])
    }

    pub fn status_default() -> Self {
        Self::with_columns(&[
            ("station_id", &["station_id"]),
            ("bikes_available", &["bikes_available"]),
            ("docks_available", &["docks_available", "dock_available"]),
            ("at", &["time", "at", "timestamp"]),
        ])
    }

    pub fn trip_default() -> Self {
        Self::with_columns(&[
            ("trip_id", &["trip_id", "id"]),
            ("duration", &["duration"]),
            ("start_at", &["start_date"]),
            // The original export names the integer id "Start Terminal" and
            // the station name "Start Station".
            ("start_station_id", &["start_station_id", "start_terminal"]),
            ("start_terminal", &["start_station_name", "start_station"]),
            ("end_at", &["end_date"]),
            ("end_station_id", &["end_station_id", "end_terminal"]),
            ("end_terminal", &["end_station_name", "end_station"]),
            ("bike_no", &["bike_no", "bike", "bike_id"]),
            ("zip_code", &["zip_code"]),
            ("subscription_type", &["subscription_type"]),
        ])
    }

    /// Applies overrides from a config file: any field named there replaces
    /// the default alias list, and extra formats are appended.
    pub fn merged(mut self, overrides: &TableSchema) -> Self {
        for (field, names) in &overrides.columns {
            self.columns.insert(field.clone(), names.clone());
        }
        self.timestamp_formats.extend(overrides.timestamp_formats.iter().cloned());
        self.date_formats.extend(overrides.date_formats.iter().cloned());
        self
    }

    /// Resolves every field this schema knows to a column index.
    pub(crate) fn resolve(&self, headers: &StringRecord, fields: &[&'static str]) -> Result<ColumnMap, IngestError> {
        let normalized: Vec<String> = headers.iter().map(normalize_header).collect();
        let mut indices = Vec::with_capacity(fields.len());
        for field in fields {
            let aliases = self.columns.get(*field).cloned().unwrap_or_else(|| vec![field.to_string()]);
            let found = aliases
                .iter()
                .map(|alias| normalize_header(alias))
                .find_map(|alias| normalized.iter().position(|h| *h == alias));
            match found {
                Some(index) => indices.push(index),
                None => return Err(IngestError::Schema { column: field.to_string() }),
            }
        }
        Ok(ColumnMap { indices })
    }
}

/// Schemas for all three tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaConfig {
    pub station: TableSchema,
    pub status: TableSchema,
    pub trip: TableSchema,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            station: TableSchema::station_default(),
            status: TableSchema::status_default(),
            trip: TableSchema::trip_default(),
        }
    }
}

impl SchemaConfig {
    pub fn merged(self, overrides: &SchemaConfig) -> Self {
        SchemaConfig {
            station: self.station.merged(&overrides.station),
            status: self.status.merged(&overrides.status),
            trip: self.trip.merged(&overrides.trip),
        }
    }
}

pub(crate) struct ColumnMap {
    indices: Vec<usize>,
}

impl ColumnMap {
    pub(crate) fn get<'r>(&self, record: &'r StringRecord, field: usize) -> Option<&'r str> {
        record.get(self.indices[field]).map(str::trim)
    }
}
