//! Experiment runners with reproducible CSV/JSON/SVG output.

mod config;
mod csvio;
mod experiments;
mod rollout;
mod svg;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{
    noise_bias_table, remedies_outcomes, run_convergence, run_experiment, run_noise_bias,
    run_remedies, run_rollout, run_spectrum, spectrum_summary, BiasRow, RemedyArm, RemedyOutcome,
};
pub use rollout::{rollout, RolloutMode, RolloutStep};

use std::path::PathBuf;

/// Files produced by one experiment run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub csv_paths: Vec<PathBuf>,
    pub metadata_path: PathBuf,
}
