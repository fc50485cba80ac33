//! Configuration, file output and the command implementations behind the
//! `splitfem-rsw` binary.

pub mod bench;
pub mod commands;
pub mod config;
pub mod output;

pub use bench::{cmd_bench, BenchReport};
pub use commands::{cmd_converge, cmd_dispersion, cmd_run, ConvergenceRow, RunSummary};
pub use config::RunConfig;

use crate::error::Error;

/// Environment variable overriding `output.dir`.
pub const OUT_DIR_ENV: &str = "SPLITFEM_OUT_DIR";

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

/// Machine-readable error report.
pub fn error_report(err: &Error) -> serde_json::Value {
    let kind = match err {
        Error::Validation(_) => "validation",
        Error::Singular { .. } => "singular",
        Error::Convergence { .. } => "convergence",
        Error::BlowUp { .. } => "blow_up",
        Error::Analysis(_) => "analysis",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
    };
    let mut report = serde_json::json!({
        "error": kind,
        "message": err.to_string(),
        "exit_code": exit_code(err),
    });
    match err {
        Error::BlowUp { step, t, stage } => {
            report["step"] = (*step).into();
            report["t"] = (*t).into();
            report["stage"] = (*stage).into();
        }
        Error::Convergence { iterations, residual } => {
            report["iterations"] = (*iterations).into();
            report["residual"] = (*residual).into();
        }
        _ => {}
    }
    report
}
