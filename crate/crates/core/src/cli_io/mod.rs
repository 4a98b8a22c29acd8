//! Configuration, experiment orchestration and persistence.

pub mod commands;
pub mod config;
pub mod files;
pub mod verify;

pub use commands::{cmd_generate, cmd_report, cmd_run, GenerateReport, RunManifest, RunOptions};
pub use config::{EngineConfig, ExperimentConfig, Scenario};
pub use verify::{run_suite, Suite, VerifyReport};

use crate::state::HaltReason;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_HALT: i32 = 4;

pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        _ => EXIT_ERROR,
    }
}

/// Exit code for a finished run: engine halts first, then invariants.
pub fn run_exit_code(m: &RunManifest) -> i32 {
    if matches!(m.halt, HaltReason::NodeCap { .. }) {
        EXIT_HALT
    } else if !m.invariant_failures.is_empty() {
        EXIT_INVARIANT
    } else {
        EXIT_OK
    }
}
