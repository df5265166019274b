pub mod analytics;
pub mod cli;
pub mod config;
pub mod ingest;
pub mod query;
pub mod report;
pub mod service;
pub mod sim;
pub mod time;
