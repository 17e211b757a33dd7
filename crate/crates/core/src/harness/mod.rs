//! Simulation studies and block-size diagnostics.

pub mod config;
pub mod coverage;
pub mod diagnose;

pub use config::{Cell, ExperimentConfig, Method, OneOrMany, Target, WORKERS_ENV};
pub use coverage::{
    mse_ratio, run_coverage, run_mse_ratio, CellFailures, CoverageReport, CoverageRow, MseReport, MseRow,
    MAX_FAILURE_RATE,
};
pub use diagnose::{diagnose_blocks, AcfRow, BlockDiagnostics, QqRow, StabilityRow};
