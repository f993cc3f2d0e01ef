//! Experiment orchestration: TOML configs, single runs, step-size sweeps,
//! CSV/JSON reports, model snapshots and the command line.

mod cli;
mod config;
mod run;
mod snapshot;

pub use cli::{cli_main, EXIT_DATA, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE};
pub use config::{
    default_gamma_grid, DataSection, DataSource, EvalSection, ExperimentConfig, OutputSection, Overrides,
    SweepSection, TrainSection,
};
pub use run::{
    prepare_data, run_cell, run_single, run_single_on, run_sweep, run_sweep_on, sweep_csv, write_single_outputs,
    write_sweep_outputs, BestCell, CellOutput, PreparedData, RunRecord, RunStatus, SweepResult, SweepRow,
    SweepSummary, TrainSummary, CSV_COLUMNS,
};
pub use snapshot::{ModelSnapshot, SNAPSHOT_SCHEMA_VERSION};
