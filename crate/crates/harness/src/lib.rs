//! Verification, volume-accounting, benchmark, and tuning harness around
//! the distributed FFT engine, plus the reference oracles the acceptance
//! checks are written against.

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod oracle;
pub mod report;
pub mod runner;

pub use commands::{cmd_bench, cmd_tune, cmd_verify, cmd_volume, VERIFY_TOLERANCE};
pub use config::{parse_ranks_file, BenchConfig, MethodChoice, OutputFormat, TransportChoice};
pub use report::{Report, ReportRow};
pub use runner::{execute_job, run_ranks, seeded_global_input, JobSpec, TransportSetup};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Engine(#[from] slabfft::EngineError),
    #[error(transparent)]
    Comm(#[from] slabfft::comm::CommError),
    #[error(transparent)]
    Decomp(#[from] slabfft::decomp::DecompError),
    #[error(transparent)]
    Grid(#[from] slabfft::grid::GridError),
    #[error("rank worker failure: {0}")]
    Spawn(String),
    #[error("grid of {total} points exceeds the oracle cap of {cap}")]
    OracleCap { total: usize, cap: usize },
    #[error("{0}")]
    Invalid(String),
}
