//! Command-line front end for the auction identified-set library.
//!
//! The binary ingests bid data from CSV, prepares raw dollar records for
//! the integer grid the solver works on, and exposes the library's
//! identification, counterfactual, and inference queries as subcommands.
//! Everything is deterministic: identical inputs, flags, and seeds produce
//! byte-identical output files.
//!
//! Module map:
//! - [`gridspec`]: `lo:hi:step` and comma-list grid parsing.
//! - [`ingest`]: headered-CSV auction tables with row-level diagnostics.
//! - [`prep`]: bidder-count filtering, per-acre normalization, outlier
//!   dropping, grid scaling, and the audit log.
//! - [`sample`]: bridging ingested tables to grid-indexed bid samples.
//! - [`fixture`]: the synthetic offshore-lease-shaped data set used by
//!   schema and pipeline tests.
//! - [`emit`]: deterministic CSV/JSON writers and the run manifest.
//! - [`args`]: the clap surface.
//! - [`commands`]: command implementations and the exit-code contract.

pub mod args;
pub mod commands;
pub mod emit;
pub mod fixture;
pub mod gridspec;
pub mod ingest;
pub mod prep;
pub mod sample;
