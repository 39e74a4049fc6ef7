//! Configuration, time-series recording, reports and the command layer.

pub mod commands;
pub mod config;
pub mod report;
pub mod sink;
