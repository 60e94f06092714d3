//! Experiment configuration, benchmark examples, synthetic data, result
//! tables, convergence studies and CSV export.

mod config;
mod convergence;
mod data;
mod examples;
mod export;
mod run;
mod table;

pub use config::{ExampleId, ExperimentConfig, Isp};
pub use convergence::{
    fitted_slope, l2_error, run_convergence_study, ConvergenceConfig, ConvergenceReport,
    ConvergenceRow, Refinement,
};
pub use data::{
    add_noise, cell_stream, exact_data, observation_kind, synthesize_data, NoiseModel,
    SyntheticData, SyntheticPair,
};
pub use examples::{make_example, Example};
pub use export::{export_plot_data, PlotFiles};
pub use run::{
    build_model, noisy_data, reconstruct, run_fixed_point, run_reconstruction, stopping_rule,
    validate_example, FixedPointOutcome, RunOutput,
};
pub use table::{run_table, TableCell, TableReport, TableSpec};
