//! Library side of the `spiketrans` command: experiment specs, the runner that
//! pairs Monte Carlo with the limiting predictions, and CSV/JSON/SVG output.

pub mod commands;
pub mod error;
pub mod figures;
pub mod output;
pub mod runner;
pub mod spec;

pub use error::CliError;
pub use figures::{figure_ids, figure_spec};
pub use output::{write_outputs, Provenance};
pub use runner::{prepare_transform, run_experiment, ExperimentResult, PreparedTransform, Row};
pub use spec::{ExperimentSpec, Grid, Mode, Trials};
