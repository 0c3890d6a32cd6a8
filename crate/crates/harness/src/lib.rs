//! Convergence sweeps, time series and timing runs for the `ngo-core` solvers,
//! with presets, TOML configuration and CSV reports.

pub mod config;
pub mod error;
pub mod problems;
pub mod registry;
pub mod report;
pub mod runs;

pub use config::{preset, Overrides, ProblemKind, RunConfig};
pub use error::{HarnessError, Result};
pub use problems::ReferenceCache;
pub use report::{ErrorReport, ErrorRow};
