//! Experiment runner for `gossipsim-core`: configuration files, CSV/JSON
//! outputs, parallel drivers and the command-line interface.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;
