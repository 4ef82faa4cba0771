//! Configuration, simulation pipeline, metrics and file output for the
//! `vpbias` command-line tool.

pub mod config;
pub mod csvio;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
