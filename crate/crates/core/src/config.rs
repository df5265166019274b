//! Runtime configuration, merged from layers with the precedence
//! flags > environment (`VELOMULE_*`) > TOML file > defaults.
//!
//! File keys (all optional):
//!
//! ```toml
//! data_dir = "data"          # directory holding the three CSV files
//! stations_file = "..."      # per-file overrides of data_dir
//! status_file = "..."
//! trips_file = "..."
//! cache = "store.bin"
//! strict = false
//! weights = [0.25, 0.5, 0.25]   # or "0.25,0.5,0.25"
//! wait_weights = [0.25, 0.5, 0.25]
//! weeks = 6
//! months = 6
//! match_minutes = 5
//! horizon_minutes = 30
//! threshold = 0.5
//!
//! [sim]
//! bikes = 10
//! seed = 42
//! duration = 3600.0
//! radio_range = 100.0
//! bike_speed = 4.0
//! sense_rate = 8
//! tick = 1.0
//! max_start_delay = 300.0
//!
//! [schema.trip.columns]
//! start_at = ["Start Date", "starttime"]
//! ```
//!
//! Environment variables use the upper-cased key with the `VELOMULE_` prefix,
//! and `VELOMULE_SIM_` for the `[sim]` keys: `VELOMULE_WEIGHTS=0.2,0.6,0.2`,
//! `VELOMULE_SIM_SEED=7`. `VELOMULE_CONFIG` names the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::analytics::{AnalysisSettings, HistoryWindows, Weights};
use crate::ingest::{DatasetPaths, SchemaConfig, TableSchema};
use crate::sim::SimConfig;

pub const ENV_PREFIX: &str = "VELOMULE_";
pub const CONFIG_FILE_ENV: &str = "VELOMULE_CONFIG";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config file {path}: {reason}")]
    File { path: PathBuf, reason: String },
    #[error("no data source configured: set --data, data_dir or VELOMULE_DATA_DIR")]
    NoData,
}

fn invalid(key: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), reason: reason.to_string() }
}

/// Simulator values that any layer may set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimLayer {
    pub bikes: Option<u32>,
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    pub radio_range: Option<f64>,
    pub bike_speed: Option<f64>,
    pub sense_rate: Option<u64>,
    pub tick: Option<f64>,
    pub max_start_delay: Option<f64>,
}

/// One configuration source. `None` leaves the lower layer's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigLayer {
    pub data_dir: Option<PathBuf>,
    pub stations_file: Option<PathBuf>,
    pub status_file: Option<PathBuf>,
    pub trips_file: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub strict: Option<bool>,
    pub weights: Option<Weights>,
    pub wait_weights: Option<Weights>,
    pub weeks: Option<u32>,
    pub months: Option<u32>,
    pub match_minutes: Option<i64>,
    pub horizon_minutes: Option<u32>,
    pub threshold: Option<f64>,
    /// Only settable from a file.
    pub schema: Option<SchemaConfig>,
    pub sim: SimLayer,
}

/// Schema overrides as written in a file: tables left out change nothing.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SchemaOverrides {
    station: TableSchema,
    status: TableSchema,
    trip: TableSchema,
}

fn parse_weights(key: &str, value: &toml::Value) -> Result<Weights, ConfigError> {
    match value {
        toml::Value::String(s) => s.parse().map_err(|e| invalid(key, e)),
        other => {
            let values: [f64; 3] = typed(key, other)?;
            Weights::new(values).map_err(|e| invalid(key, e))
        }
    }
}

fn typed<T: DeserializeOwned>(key: &str, value: &toml::Value) -> Result<T, ConfigError> {
    value.clone().try_into().map_err(|e: toml::de::Error| invalid(key, e.message().trim()))
}

/// Reads a float key, accepting integer literals too.
fn float(key: &str, value: &toml::Value) -> Result<f64, ConfigError> {
    match value {
        toml::Value::Integer(i) => Ok(*i as f64),
        toml::Value::Float(f) => Ok(*f),
        _ => Err(invalid(key, "expected a number")),
    }
}

impl ConfigLayer {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::File {
            path: PathBuf::new(),
            reason: e.message().trim().to_string(),
        })?;
        let mut layer = ConfigLayer::default();
        for (key, value) in &table {
            let k = key.as_str();
            match k {
                "data_dir" => layer.data_dir = Some(typed(k, value)?),
                "stations_file" => layer.stations_file = Some(typed(k, value)?),
                "status_file" => layer.status_file = Some(typed(k, value)?),
                "trips_file" => layer.trips_file = Some(typed(k, value)?),
                "cache" => layer.cache = Some(typed(k, value)?),
                "strict" => layer.strict = Some(typed(k, value)?),
                "weights" => layer.weights = Some(parse_weights(k, value)?),
                "wait_weights" => layer.wait_weights = Some(parse_weights(k, value)?),
                "weeks" => layer.weeks = Some(typed(k, value)?),
                "months" => layer.months = Some(typed(k, value)?),
                "match_minutes" => layer.match_minutes = Some(typed(k, value)?),
                "horizon_minutes" => layer.horizon_minutes = Some(typed(k, value)?),
                "threshold" => layer.threshold = Some(float(k, value)?),
                "schema" => {
                    let o: SchemaOverrides = typed(k, value)?;
                    layer.schema = Some(SchemaConfig { station: o.station, status: o.status, trip: o.trip });
                }
                "sim" => {
                    let toml::Value::Table(sim) = value else {
                        return Err(invalid(k, "expected a table"));
                    };
                    for (sim_key, v) in sim {
                        let full = format!("sim.{sim_key}");
                        let f = full.as_str();
                        let s = &mut layer.sim;
                        match sim_key.as_str() {
                            "bikes" => s.bikes = Some(typed(f, v)?),
                            "seed" => s.seed = Some(typed(f, v)?),
                            "duration" => s.duration = Some(float(f, v)?),
                            "radio_range" => s.radio_range = Some(float(f, v)?),
                            "bike_speed" => s.bike_speed = Some(float(f, v)?),
                            "sense_rate" => s.sense_rate = Some(typed(f, v)?),
                            "tick" => s.tick = Some(float(f, v)?),
                            "max_start_delay" => s.max_start_delay = Some(float(f, v)?),
                            _ => return Err(ConfigError::UnknownKey(full)),
                        }
                    }
                }
                _ => return Err(ConfigError::UnknownKey(key.clone())),
            }
        }
        Ok(layer)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::File { path: path.to_owned(), reason: e.to_string() })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ConfigError::File { reason, .. } => ConfigError::File { path: path.to_owned(), reason },
            other => other,
        })
    }

    /// Reads `VELOMULE_*` variables from `vars`. Unknown names under the
    /// prefix are rejected so a typo does not silently fall back.
    pub fn from_env<I, K, V>(vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.trim().parse().map_err(|e| invalid(key, e))
        }
        let mut layer = ConfigLayer::default();
        for (name, value) in vars {
            let (name, v) = (name.as_ref(), value.as_ref());
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            let s = &mut layer.sim;
            match key {
                "CONFIG" => {}
                "DATA_DIR" => layer.data_dir = Some(v.into()),
                "STATIONS_FILE" => layer.stations_file = Some(v.into()),
                "STATUS_FILE" => layer.status_file = Some(v.into()),
                "TRIPS_FILE" => layer.trips_file = Some(v.into()),
                "CACHE" => layer.cache = Some(v.into()),
                "STRICT" => {
                    layer.strict = Some(match v.trim().to_ascii_lowercase().as_str() {
                        "1" | "true" | "yes" => true,
                        "0" | "false" | "no" => false,
                        _ => return Err(invalid(name, "expected true or false")),
                    })
                }
                "WEIGHTS" => layer.weights = Some(v.parse().map_err(|e| invalid(name, e))?),
                "WAIT_WEIGHTS" => layer.wait_weights = Some(v.parse().map_err(|e| invalid(name, e))?),
                "WEEKS" => layer.weeks = Some(num(name, v)?),
                "MONTHS" => layer.months = Some(num(name, v)?),
                "MATCH_MINUTES" => layer.match_minutes = Some(num(name, v)?),
                "HORIZON_MINUTES" => layer.horizon_minutes = Some(num(name, v)?),
                "THRESHOLD" => layer.threshold = Some(num(name, v)?),
                "SIM_BIKES" => s.bikes = Some(num(name, v)?),
                "SIM_SEED" => s.seed = Some(num(name, v)?),
                "SIM_DURATION" => s.duration = Some(num(name, v)?),
                "SIM_RADIO_RANGE" => s.radio_range = Some(num(name, v)?),
                "SIM_BIKE_SPEED" => s.bike_speed = Some(num(name, v)?),
                "SIM_SENSE_RATE" => s.sense_rate = Some(num(name, v)?),
                "SIM_TICK" => s.tick = Some(num(name, v)?),
                "SIM_MAX_START_DELAY" => s.max_start_delay = Some(num(name, v)?),
                _ => return Err(ConfigError::UnknownKey(name.to_string())),
            }
        }
        Ok(layer)
    }

    /// Overlays `top` onto `self`.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        let s = self.sim;
        let t = top.sim;
        ConfigLayer {
            data_dir: top.data_dir.or(self.data_dir),
            stations_file: top.stations_file.or(self.stations_file),
            status_file: top.status_file.or(self.status_file),
            trips_file: top.trips_file.or(self.trips_file),
            cache: top.cache.or(self.cache),
            strict: top.strict.or(self.strict),
            weights: top.weights.or(self.weights),
            wait_weights: top.wait_weights.or(self.wait_weights),
            weeks: top.weeks.or(self.weeks),
            months: top.months.or(self.months),
            match_minutes: top.match_minutes.or(self.match_minutes),
            horizon_minutes: top.horizon_minutes.or(self.horizon_minutes),
            threshold: top.threshold.or(self.threshold),
            schema: top.schema.or(self.schema),
            sim: SimLayer {
                bikes: t.bikes.or(s.bikes),
                seed: t.seed.or(s.seed),
                duration: t.duration.or(s.duration),
                radio_range: t.radio_range.or(s.radio_range),
                bike_speed: t.bike_speed.or(s.bike_speed),
                sense_rate: t.sense_rate.or(s.sense_rate),
                tick: t.tick.or(s.tick),
                max_start_delay: t.max_start_delay.or(s.max_start_delay),
            },
        }
    }
}

/// The merged configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeConfig {
    pub data_dir: Option<PathBuf>,
    pub stations_file: Option<PathBuf>,
    pub status_file: Option<PathBuf>,
    pub trips_file: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub strict: bool,
    pub settings: AnalysisSettings,
    pub schema: SchemaConfig,
    /// Simulator parameters, over the default station grid.
    pub sim: SimConfig,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig::from_layer(ConfigLayer::default()).expect("defaults are valid")
    }
}

impl RuntimeConfig {
    /// Resolves a merged layer against the defaults.
    pub fn from_layer(layer: ConfigLayer) -> Result<Self, ConfigError> {
        let defaults = AnalysisSettings::default();
        let default_windows = HistoryWindows::default();
        let threshold = layer.threshold.unwrap_or(defaults.wait_threshold);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(invalid("threshold", "must lie in [0, 1]"));
        }
        let match_minutes = layer.match_minutes.unwrap_or(default_windows.match_minutes);
        if match_minutes < 0 {
            return Err(invalid("match_minutes", "must be non-negative"));
        }
        let settings = AnalysisSettings {
            forecast_weights: layer.weights.unwrap_or(defaults.forecast_weights),
            wait_weights: layer.wait_weights.unwrap_or(defaults.wait_weights),
            windows: HistoryWindows {
                weeks: layer.weeks.unwrap_or(default_windows.weeks),
                months: layer.months.unwrap_or(default_windows.months),
                match_minutes,
            },
            horizon_minutes: layer.horizon_minutes.unwrap_or(defaults.horizon_minutes),
            wait_threshold: threshold,
        };

        let base = SimConfig::default();
        let s = layer.sim;
        let sim = SimConfig {
            n_bikes: s.bikes.unwrap_or(base.n_bikes),
            seed: s.seed.unwrap_or(base.seed),
            duration: s.duration.unwrap_or(base.duration),
            radio_range: s.radio_range.unwrap_or(base.radio_range),
            bike_speed: s.bike_speed.unwrap_or(base.bike_speed),
            sense_rate: s.sense_rate.unwrap_or(base.sense_rate),
            tick: s.tick.unwrap_or(base.tick),
            max_start_delay: s.max_start_delay.unwrap_or(base.max_start_delay),
            stations: base.stations,
        };
        sim.validate().map_err(|e| invalid(&format!("sim.{}", e.field), e.reason))?;

        let schema = match &layer.schema {
            Some(overrides) => SchemaConfig::default().merged(overrides),
            None => SchemaConfig::default(),
        };
        Ok(RuntimeConfig {
            data_dir: layer.data_dir,
            stations_file: layer.stations_file,
            status_file: layer.status_file,
            trips_file: layer.trips_file,
            cache: layer.cache,
            strict: layer.strict.unwrap_or(false),
            settings,
            schema,
            sim,
        })
    }

    /// Merges the layers in precedence order. The file is `file_path` if
    /// given, else `VELOMULE_CONFIG` from `env`, else none.
    pub fn load<I, K, V>(file_path: Option<&Path>, env: I, flags: ConfigLayer) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let env: Vec<(String, String)> =
            env.into_iter().map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string())).collect();
        let env_file = env
            .iter()
            .find(|(k, _)| k == CONFIG_FILE_ENV)
            .map(|(_, v)| PathBuf::from(v))
            .filter(|_| file_path.is_none());
        let file = match file_path.map(Path::to_path_buf).or(env_file) {
            Some(path) => ConfigLayer::from_file(&path)?,
            None => ConfigLayer::default(),
        };
        let env = ConfigLayer::from_env(env)?;
        Self::from_layer(file.overlay(env).overlay(flags))
    }

    /// Where to read the three files from.
    pub fn dataset_paths(&self) -> Result<DatasetPaths, ConfigError> {
        let from_dir = self.data_dir.as_deref().map(DatasetPaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, from_dir: Option<&PathBuf>| explicit.clone().or(from_dir.cloned());
        match (
            pick(&self.stations_file, from_dir.as_ref().map(|d| &d.stations)),
            pick(&self.status_file, from_dir.as_ref().map(|d| &d.status)),
            pick(&self.trips_file, from_dir.as_ref().map(|d| &d.trips)),
        ) {
            (Some(stations), Some(status), Some(trips)) => Ok(DatasetPaths { stations, status, trips }),
            _ => Err(ConfigError::NoData),
        }
    }
}
