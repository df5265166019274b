//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Every error goes to
//! stderr as one line starting with `error:`, usage errors followed by a
//! `usage:` hint.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::analytics::Weights;
use crate::config::{ConfigLayer, RuntimeConfig, SimLayer};
use crate::ingest::{load_dataset_cached, HistoryStore, IngestSummary, StationRecord};
use crate::query::{self, Answer, Query, QueryError};
use crate::report::{self, format_value, ReportParams};
use crate::sim::{self, format_trace, parse_trace, run_simulation};

#[derive(Debug, Parser)]
#[command(name = "velomule", version, about = "Bike-share history analytics and a sensor-offload simulator")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML config file (default: $VELOMULE_CONFIG)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory holding the station, status and trip CSV files
    #[arg(long = "data", global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    stations_file: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    status_file: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    trips_file: Option<PathBuf>,
    /// Binary snapshot of the parsed store, rebuilt when the inputs change
    #[arg(long, global = true, value_name = "FILE")]
    cache: Option<PathBuf>,
    /// Fail on the first malformed row or dangling reference
    #[arg(long, global = true)]
    strict: bool,
    /// Forecast weights: day of week, current week, day of month
    #[arg(long, global = true, value_name = "W1,W2,W3", value_parser = parse_weights)]
    weights: Option<Weights>,
    /// Wait-series weights, same order
    #[arg(long, global = true, value_name = "W1,W2,W3", value_parser = parse_weights)]
    wait_weights: Option<Weights>,
    #[arg(long, global = true, value_name = "N")]
    weeks: Option<u32>,
    #[arg(long, global = true, value_name = "N")]
    months: Option<u32>,
    #[arg(long, global = true, value_name = "MINUTES")]
    match_minutes: Option<i64>,
    #[arg(long, global = true, value_name = "MINUTES")]
    horizon: Option<u32>,
    /// Probability at or above which waiting is recommended
    #[arg(long, global = true, value_name = "P")]
    threshold: Option<f64>,
}

fn parse_weights(text: &str) -> Result<Weights, String> {
    text.parse().map_err(|e: crate::analytics::AnalyticsError| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the dataset, report counts and refresh the cache
    Ingest {
        #[arg(long)]
        json: bool,
    },
    /// Run one analytics query
    Analyze {
        /// Print the answer as JSON
        #[arg(long, global = true)]
        json: bool,
        #[command(subcommand)]
        op: AnalyzeOp,
    },
    /// Run the offload simulator and write its trace
    Simulate(SimulateArgs),
    /// Write the figure tables as CSV and JSON
    Report(ReportArgs),
    /// Start the read-only JSON service
    Serve {
        #[arg(long, value_name = "HOST:PORT", default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Debug, Subcommand)]
enum AnalyzeOp {
    /// Expected available bikes on a date
    Forecast {
        #[arg(long)]
        station: Option<String>,
        #[arg(long, value_name = "YYYY-MM-DD")]
        date: Option<String>,
    },
    /// Incoming plus outgoing trips
    Busyness {
        #[arg(long)]
        station: Option<String>,
        #[arg(long, value_name = "START/END")]
        window: Option<String>,
    },
    /// Busiest stations
    Rank {
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, value_name = "START/END")]
        window: Option<String>,
    },
    /// Busyness by clock hour
    Hourly {
        #[arg(long)]
        station: Option<String>,
        /// One hour, or all 24 when omitted
        #[arg(long)]
        hour: Option<String>,
        #[arg(long, value_name = "START/END")]
        window: Option<String>,
    },
    /// Mean trip time between two stations, both directions pooled
    TripTime {
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, value_name = "START/END")]
        window: Option<String>,
    },
    /// Trips on a route, both directions
    Route {
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, value_name = "START/END")]
        window: Option<String>,
    },
    /// Available bikes plus empty docks at an instant
    Load {
        #[arg(long)]
        station: Option<String>,
        #[arg(long, value_name = "TIMESTAMP")]
        at: Option<String>,
    },
    /// Probability of a bike being available over the next minutes
    Wait {
        #[arg(long)]
        station: Option<String>,
        #[arg(long, value_name = "TIMESTAMP")]
        at: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StationSource {
    /// Six stations on a 3×2 grid
    Grid,
    /// Stations of the loaded dataset, projected to meters
    Data,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    bikes: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds of simulated time
    #[arg(long)]
    duration: Option<f64>,
    /// Trace file to write
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "METERS")]
    radio_range: Option<f64>,
    #[arg(long, value_name = "M/S")]
    bike_speed: Option<f64>,
    #[arg(long, value_name = "BYTES/S")]
    sense_rate: Option<u64>,
    #[arg(long, value_name = "SECONDS")]
    tick: Option<f64>,
    #[arg(long, value_name = "SECONDS")]
    max_start_delay: Option<f64>,
    #[arg(long, value_enum, default_value_t = StationSource::Grid)]
    stations: StationSource,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Forecast date (default: the day after the last reading)
    #[arg(long, value_name = "YYYY-MM-DD")]
    date: Option<String>,
    /// Clock hour for the busyness tables
    #[arg(long)]
    hour: Option<String>,
    #[arg(long, value_name = "START/END")]
    window: Option<String>,
    /// Instant for the load-factor table (default: the last reading)
    #[arg(long, value_name = "TIMESTAMP")]
    at: Option<String>,
    /// Station for the wait-series table (default: the lowest id)
    #[arg(long)]
    station: Option<String>,
    /// Arrival for the wait-series table (default: the last reading)
    #[arg(long, value_name = "TIMESTAMP")]
    arrival: Option<String>,
    /// Summarize this trace instead of running the simulator
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage { message: String, hint: String },
    Data(String),
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// The one-line usage of a subcommand path, e.g. `["analyze", "wait"]`.
fn usage_of(path: &[&str]) -> String {
    let mut command = Cli::command();
    command.build();
    for name in path {
        match command.find_subcommand(name) {
            Some(sub) => command = sub.clone(),
            None => break,
        }
    }
    let usage = command.render_usage().to_string();
    usage.trim_start_matches("Usage: ").to_string()
}

fn required<T>(value: Option<T>, flag: &str, path: &[&str]) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage { message: format!("missing {flag}"), hint: usage_of(path) })
}

/// Malformed values are usage errors; unknown stations and empty results
/// are data errors.
fn from_query(path: &'static [&'static str]) -> impl Fn(QueryError) -> CliError {
    move |e| match e {
        QueryError::BadRequest(message) => CliError::Usage { message, hint: usage_of(path) },
        QueryError::NotFound(message) => CliError::Data(message),
    }
}

impl GlobalArgs {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            data_dir: self.data_dir.clone(),
            stations_file: self.stations_file.clone(),
            status_file: self.status_file.clone(),
            trips_file: self.trips_file.clone(),
            cache: self.cache.clone(),
            strict: self.strict.then_some(true),
            weights: self.weights,
            wait_weights: self.wait_weights,
            weeks: self.weeks,
            months: self.months,
            match_minutes: self.match_minutes,
            horizon_minutes: self.horizon,
            threshold: self.threshold,
            schema: None,
            sim: SimLayer::default(),
        }
    }
}

fn load_store(config: &RuntimeConfig) -> CliResult<(HistoryStore, IngestSummary)> {
    let paths = config.dataset_paths().map_err(CliError::data)?;
    load_dataset_cached(&paths, &config.schema, config.strict, config.cache.as_deref()).map_err(CliError::data)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn opt(value: Option<f64>) -> String {
    value.map_or_else(|| "NA".to_string(), format_value)
}

/// Plain-text rendering of an answer, one fact per line.
fn render_text(answer: &Answer) -> String {
    let mut lines = Vec::new();
    match answer {
        Answer::Stations(stations) => {
            for s in stations {
                lines.push(format!("{}\t{}\t{}\t{}", s.station_id, s.dock_count, s.landmark, s.name));
            }
        }
        Answer::Forecast(f) => {
            lines.push(format!("station {} on {}", f.station_id, f.target_date));
            lines.push(format!("expected_bikes {}", format_value(f.n_expected)));
            lines.push(format!("day_of_week_mean {}", opt(f.dow_mean)));
            lines.push(format!("current_week_mean {}", opt(f.current_week_mean)));
            lines.push(format!("day_of_month_mean {}", opt(f.dom_mean)));
        }
        Answer::Busyness(b) => {
            lines.push(format!("incoming {}", b.incoming));
            lines.push(format!("outgoing {}", b.outgoing));
            lines.push(format!("busyness {}", b.busyness));
        }
        Answer::Rank(reports) => {
            for (rank, b) in reports.iter().enumerate() {
                lines.push(format!("{}\t{}\t{}", rank + 1, b.station_id, b.busyness));
            }
        }
        Answer::Hourly(h) => {
            for c in &h.hours {
                lines.push(format!("{:02}\t{}", c.hour, c.trips));
            }
        }
        Answer::TripTime(t) => {
            lines.push(format!("trips {}", t.n_xy + t.n_yx));
            lines.push(format!("mean_seconds {}", format_value(t.mean_seconds)));
            lines.push(format!("min_seconds {}", t.min_seconds));
            lines.push(format!("max_seconds {}", t.max_seconds));
        }
        Answer::Route(r) => {
            lines.push(format!("trips {}", r.trips));
            lines.push(format!("{}_to_{} {}", r.station_a, r.station_b, r.a_to_b));
            lines.push(format!("{}_to_{} {}", r.station_b, r.station_a, r.b_to_a));
        }
        Answer::Load(l) => {
            lines.push(format!("observed_at {}", l.observed_at));
            lines.push(format!("bikes_available {}", l.bikes_available));
            lines.push(format!("empty_docks {}", l.empty_docks));
            lines.push(format!("load_factor {}", l.load_factor));
        }
        Answer::Wait(w) => {
            for p in &w.series.points {
                lines.push(format!("{}\t{}", p.minute_offset, opt(p.probability)));
            }
        }
    }
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

fn analyze_query(op: &AnalyzeOp) -> CliResult<(Query, &'static [&'static str])> {
    use AnalyzeOp::*;
    let window = |w: &Option<String>, path| query::parse_window(w.as_deref()).map_err(from_query(path));
    Ok(match op {
        Forecast { station, date } => {
            let path = &["analyze", "forecast"];
            let station = query::parse_station(required(station.as_ref(), "--station", path)?);
            let date = query::parse_day(required(date.as_ref(), "--date", path)?);
            (
                Query::Forecast { station: station.map_err(from_query(path))?, date: date.map_err(from_query(path))? },
                path,
            )
        }
        Busyness { station, window: w } => {
            let path = &["analyze", "busyness"];
            let station = query::parse_station(required(station.as_ref(), "--station", path)?);
            (Query::Busyness { station: station.map_err(from_query(path))?, window: window(w, path)? }, path)
        }
        Rank { top, window: w } => {
            let path = &["analyze", "rank"];
            (Query::Rank { window: window(w, path)?, top: *top }, path)
        }
        Hourly { station, hour, window: w } => {
            let path = &["analyze", "hourly"];
            let station = query::parse_station(required(station.as_ref(), "--station", path)?);
            let hour = hour.as_deref().map(query::parse_hour).transpose().map_err(from_query(path))?;
            (Query::Hourly { station: station.map_err(from_query(path))?, hour, window: window(w, path)? }, path)
        }
        TripTime { from, to, window: w } | Route { from, to, window: w } => {
            let path: &'static [&'static str] =
                if matches!(op, TripTime { .. }) { &["analyze", "trip-time"] } else { &["analyze", "route"] };
            let from = query::parse_station(required(from.as_ref(), "--from", path)?).map_err(from_query(path))?;
            let to = query::parse_station(required(to.as_ref(), "--to", path)?).map_err(from_query(path))?;
            let window = window(w, path)?;
            let query = if matches!(op, TripTime { .. }) {
                Query::TripTime { from, to, window }
            } else {
                Query::Route { from, to, window }
            };
            (query, path)
        }
        Load { station, at } | Wait { station, at } => {
            let path: &'static [&'static str] =
                if matches!(op, Load { .. }) { &["analyze", "load"] } else { &["analyze", "wait"] };
            let station =
                query::parse_station(required(station.as_ref(), "--station", path)?).map_err(from_query(path))?;
            let at = query::parse_at(required(at.as_ref(), "--at", path)?).map_err(from_query(path))?;
            let query =
                if matches!(op, Load { .. }) { Query::Load { station, at } } else { Query::Wait { station, at } };
            (query, path)
        }
    })
}

fn run_analyze(config: &RuntimeConfig, op: &AnalyzeOp, json: bool, out: &mut dyn Write) -> CliResult<()> {
    // Arguments are checked before the dataset is read.
    let (query, path) = analyze_query(op)?;
    let (store, _) = load_store(config)?;
    let answer = query::answer(&store, &config.settings, &query).map_err(from_query(path))?;
    let text = if json {
        let mut text = serde_json::to_string_pretty(&answer).map_err(CliError::data)?;
        text.push('\n');
        text
    } else {
        render_text(&answer)
    };
    out.write_all(text.as_bytes()).map_err(CliError::data)
}

fn run_ingest(config: &RuntimeConfig, json: bool, out: &mut dyn Write) -> CliResult<()> {
    let (_, summary) = load_store(config)?;
    let text = if json {
        serde_json::to_string_pretty(&summary).map_err(CliError::data)? + "\n"
    } else {
        let b = &summary.build;
        format!(
            "stations {} ({} lines, {} skipped)\nstatus {} ({} lines, {} skipped)\ntrips {} ({} lines, {} skipped)\n\
             dangling_status {}\ndangling_trips {}\nduplicate_stations {}\nduplicate_trips {}\nduration_mismatches {}\n",
            b.stations,
            summary.stations.data_lines,
            summary.stations.skipped,
            b.status,
            summary.status.data_lines,
            summary.status.skipped,
            b.trips,
            summary.trips.data_lines,
            summary.trips.skipped,
            b.dangling_status,
            b.dangling_trips,
            b.duplicate_stations,
            b.duplicate_trips,
            b.duration_mismatches,
        )
    };
    out.write_all(text.as_bytes()).map_err(CliError::data)
}

fn run_simulate(config: &RuntimeConfig, args: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let path = &["simulate"];
    let out_path = required(args.out.as_ref(), "--out", path)?;
    let mut sim_config = config.sim.clone();
    if let Some(v) = args.bikes {
        sim_config.n_bikes = v;
    }
    if let Some(v) = args.seed {
        sim_config.seed = v;
    }
    if let Some(v) = args.duration {
        sim_config.duration = v;
    }
    if let Some(v) = args.radio_range {
        sim_config.radio_range = v;
    }
    if let Some(v) = args.bike_speed {
        sim_config.bike_speed = v;
    }
    if let Some(v) = args.sense_rate {
        sim_config.sense_rate = v;
    }
    if let Some(v) = args.tick {
        sim_config.tick = v;
    }
    if let Some(v) = args.max_start_delay {
        sim_config.max_start_delay = v;
    }
    if let Err(e) = sim_config.validate() {
        return Err(CliError::Usage { message: e.to_string(), hint: usage_of(path) });
    }
    if args.stations == StationSource::Data {
        let (store, _) = load_store(config)?;
        let records: Vec<StationRecord> = store.stations().cloned().collect();
        sim_config.stations = sim::project_stations(&records);
    }
    let trace = run_simulation(&sim_config).map_err(CliError::data)?;
    write_file(out_path, &format_trace(&trace))?;
    let sent: u64 = trace.sent_by_bike.values().sum();
    let received: u64 = trace.received_by_station.values().sum();
    writeln!(
        out,
        "wrote {} events to {}\nbytes_sent {sent}\nbytes_received {received}",
        trace.events.len(),
        out_path.display()
    )
    .map_err(CliError::data)
}

fn run_report(config: &RuntimeConfig, args: &ReportArgs, out: &mut dyn Write) -> CliResult<()> {
    let path = &["report"];
    let dir = required(args.out.as_ref(), "--out", path)?;
    let bad = from_query(path);
    let date = args.date.as_deref().map(query::parse_day).transpose().map_err(&bad)?;
    let hour = args.hour.as_deref().map(query::parse_hour).transpose().map_err(&bad)?;
    let window = args.window.as_deref().map(|w| query::parse_window(Some(w))).transpose().map_err(&bad)?;
    let at = args.at.as_deref().map(query::parse_at).transpose().map_err(&bad)?;
    let station = args.station.as_deref().map(query::parse_station).transpose().map_err(&bad)?;
    let arrival = args.arrival.as_deref().map(query::parse_at).transpose().map_err(&bad)?;

    let trace = match &args.trace {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| CliError::Data(format!("cannot read {}: {e}", p.display())))?;
            parse_trace(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
        }
        None => run_simulation(&config.sim).map_err(CliError::data)?,
    };

    let (store, _) = load_store(config)?;
    let defaults = ReportParams::defaults_for(&store);
    let params = ReportParams {
        forecast_date: date.unwrap_or(defaults.forecast_date),
        hour: hour.unwrap_or(defaults.hour),
        window: window.unwrap_or(defaults.window),
        at: at.unwrap_or(defaults.at),
        wait_station: station.unwrap_or(defaults.wait_station),
        arrival: arrival.unwrap_or(defaults.arrival),
    };
    let mut tables = report::figure_tables(&store, &params, &config.settings);
    tables.push(("sim_summary", report::sim_summary(&trace)));
    report::write_tables(dir, &tables).map_err(CliError::data)?;
    for (stem, _) in &tables {
        writeln!(out, "{}", dir.join(format!("{stem}.csv")).display()).map_err(CliError::data)?;
    }
    Ok(())
}

fn run_serve(config: &RuntimeConfig, addr: &str, out: &mut dyn Write) -> CliResult<()> {
    let (store, _) = load_store(config)?;
    let app = crate::service::router(Arc::new(store), config.settings);
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::data)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Data(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(CliError::data)?;
        writeln!(out, "listening on http://{local}").and_then(|_| out.flush()).map_err(CliError::data)?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        crate::service::serve(listener, app, shutdown).await.map_err(CliError::data)
    })
}

fn dispatch(cli: Cli, env: Vec<(String, String)>, out: &mut dyn Write) -> CliResult<()> {
    let config = RuntimeConfig::load(cli.global.config.as_deref(), env, cli.global.layer()).map_err(CliError::data)?;
    match &cli.command {
        Command::Ingest { json } => run_ingest(&config, *json, out),
        Command::Analyze { json, op } => run_analyze(&config, op, *json, out),
        Command::Simulate(args) => run_simulate(&config, args, out),
        Command::Report(args) => run_report(&config, args, out),
        Command::Serve { addr } => run_serve(&config, addr, out),
    }
}

/// Runs the CLI with explicit environment and output streams; returns the
/// exit code.
pub fn run_cli<I, T>(args: I, env: Vec<(String, String)>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = out.write_all(rendered.as_bytes());
                return 0;
            }
            let message = rendered.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let hint =
                rendered.lines().find_map(|l| l.strip_prefix("Usage: ")).map_or_else(|| usage_of(&[]), str::to_string);
            let _ = writeln!(err, "error: {message}\nusage: {hint}");
            return 1;
        }
    };
    match dispatch(cli, env, out) {
        Ok(()) => 0,
        Err(CliError::Usage { message, hint }) => {
            let _ = writeln!(err, "error: {message}\nusage: {hint}");
            1
        }
        Err(CliError::Data(message)) => {
            let _ = writeln!(err, "error: {message}");
            2
        }
    }
}

/// Entry point for the binary: real arguments, environment and streams.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env: Vec<(String, String)> = std::env::vars().collect();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli(args, env, &mut stdout.lock(), &mut stderr.lock())
}
