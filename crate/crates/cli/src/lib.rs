//! Scenario configuration and experiment runner for the `qlidar` binary.

pub mod app;
pub mod config;
pub mod scenario;
