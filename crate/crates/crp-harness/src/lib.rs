//! Fixtures, acceptance suites and reporting for the `crp` command-line tool.

pub mod cli;
pub mod config;
pub mod convergence;
pub mod fixtures;
pub mod report;
pub mod suites;

/// Seed used when none is configured.
pub const DEFAULT_SEED: u64 = 0x5eed_c0de_2024_0001;
