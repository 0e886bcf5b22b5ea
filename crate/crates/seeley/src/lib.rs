//! Configuration, scenario catalog, batch runs and report formats on top of
//! `seeley-core`.

pub mod config;
pub mod report;
pub mod run;
pub mod scenarios;
