//! Experiment orchestration: configuration, launch-power sweeps,
//! subcarrier power optimization and CSV output.
//!
//! Seeds: every (power, technique) point gets
//! `derive_seed(master, [power_dbm bits, label hash])`; block `b` of the
//! point uses `derive_seed(point, [b])`, and within a block channel `c`
//! draws its data from `derive_seed(block, [c, 1])` and the ASE from
//! `derive_seed(block, [2])`. Sequence libraries use
//! `derive_seed(master, [power bits, n_subcarriers, 4])`.

mod config;
mod csvio;
mod run;
mod scopt;

pub use config::{
    AmpConfig, ExperimentConfig, InputSpec, MetricSpec, OutputPaths, Precision, Processing,
    Scenario, SelectionConfig, SubcarrierOptConfig, SweepSpec, Technique,
};
pub use csvio::{csv_string, emit_csv, format_g6, parse_csv, plot_table, CsvRow, CSV_HEADER};
pub use run::{build_library, point_seed, run_point, run_sweep, SweepResult, SweepRow};
pub use scopt::{optimize_subcarrier_powers, tilt_profile, SubcarrierOptimum};
