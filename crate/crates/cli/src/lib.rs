//! Command-line surface of the free-time minimizer lab: problem files,
//! report and table serialization, and the `ftm` subcommands.

pub mod commands;
pub mod format;
pub mod problem;
pub mod report;

pub use commands::{run_command, EXIT_CHECK_FAILED, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
pub use format::{fmt_f64, to_json_bytes, Table};
pub use problem::{parse_problem, serialize_problem, PathRecord, ProblemFile, ProblemOptions};
pub use report::{Defaults, RunReport};

use ftm_core::{DiagnosticsSeriesF64, MassSystemF64, TrajectoryF64};

/// Trajectory as a table (`t`, positions, velocities) in JSON or CSV.
pub fn serialize_trajectory(sys: &MassSystemF64, traj: &TrajectoryF64, csv: bool) -> Vec<u8> {
    let t = commands::trajectory_table(sys, traj);
    if csv {
        t.to_csv()
    } else {
        to_json_bytes(&t)
    }
}

/// Diagnostic series as a table in JSON or CSV.
pub fn serialize_series(series: &DiagnosticsSeriesF64, csv: bool) -> Vec<u8> {
    let t = commands::series_table(series);
    if csv {
        t.to_csv()
    } else {
        to_json_bytes(&t)
    }
}
