//! Energy profiling of collection implementations and least-energy
//! substitution advice.
//!
//! The pipeline: [`meter`] takes energy readings, [`adapters`] and
//! [`workloads`] define what gets exercised, [`runner`] executes the
//! benchmark matrix, [`profile`] stores and reports the resulting tables and
//! [`advisor`] turns a table plus a usage profile into recommendations.

pub mod adapters;
pub mod meter;
pub mod workloads;
pub mod profile;
pub mod runner;
pub mod advisor;
pub mod cli;
