//! Command-line front end for the `subci` library.

pub mod commands;
pub mod config;
pub mod output;
