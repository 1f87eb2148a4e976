//! Configuration, convergence studies, rate fits, artifacts and the
//! verification suite behind the command line tool.

mod config;
mod output;
mod presets;
mod rate;
mod study;
mod verify;

pub use config::{ExperimentConfig, PotentialShape, RunSetup, TauRule};
pub use output::{emit_outputs, write_convergence_csv, CONVERGENCE_HEADER};
pub use presets::{preset, preset_names, preset_text};
pub use rate::{fit_rate, read_convergence_columns, RateFit};
pub use study::{
    run_experiment, run_experiment_with, run_single, ConvergenceRecord, ConvergenceRow,
    FinalSnapshot, RunOutcome, StudyResult, FLOOR,
};
pub use verify::{verify_suite, CheckStatus, VerifyEntry, VerifyReport};
