//! Experiment configuration (JSON) and run metadata.

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initgen::InitScheme;
use crate::rng::DERIVED_SEED_RULE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Spectrum,
    Convergence,
    NoiseBias,
    Remedies,
    Rollout,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::NoiseBias => "noise_bias",
            ExperimentKind::Remedies => "remedies",
            ExperimentKind::Rollout => "rollout",
        }
    }
}

/// Experiment configuration, loaded from a JSON object whose keys mirror
/// these field names. Omitted fields take experiment-specific defaults;
/// unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// State dimension.
    pub n: Option<usize>,
    /// Invariant-subspace (data) dimension.
    pub r: Option<usize>,
    /// Number of snapshot pairs (rollout reads this as the step count).
    pub m: Option<usize>,
    /// Snapshot spacing; presence selects the continuous-time variant.
    pub dt: Option<f64>,
    /// Noise standard deviation.
    pub sigma: Option<f64>,
    /// Trials / noise draws / seeds, depending on the experiment.
    pub trials: Option<usize>,
    pub base_seed: Option<u64>,
    /// Initializer schemes (spectrum and rollout experiments).
    pub schemes: Option<Vec<InitScheme>>,
    /// Pseudo-time grid for convergence curves.
    pub tau_grid: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit_svg: bool,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !dt.is_finite() || dt <= 0.0 {
                return Err(Error::Config(format!("dt must be positive, got {dt}")));
            }
        }
        if let Some(sigma) = self.sigma {
            if sigma < 0.0 {
                return Err(Error::Config(format!("sigma must be >= 0, got {sigma}")));
            }
        }
        if let Some(grid) = &self.tau_grid {
            if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return Err(Error::Config("tau_grid entries must be finite and >= 0".into()));
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("tau_grid must be strictly increasing".into()));
            }
        }
        match self.experiment {
            ExperimentKind::Spectrum | ExperimentKind::Rollout => {
                if let Some(schemes) = &self.schemes {
                    if schemes.is_empty() {
                        return Err(Error::Config("schemes must be nonempty".into()));
                    }
                }
            }
            ExperimentKind::Convergence | ExperimentKind::Remedies => {
                let n = self.n.unwrap_or(default_n(self.experiment));
                let r = self.r.unwrap_or(default_r(self.experiment));
                if r == 0 || r >= n {
                    return Err(Error::Config(format!(
                        "{} needs 1 <= r < n, got r={r}, n={n}",
                        self.experiment.name()
                    )));
                }
            }
            ExperimentKind::NoiseBias => {
                let n = self.n.unwrap_or(default_n(self.experiment));
                if let Some(m) = self.m {
                    if m < n {
                        return Err(Error::Config(format!(
                            "noise_bias needs m >= n, got m={m}, n={n}"
                        )));
                    }
                }
                if let Some(trials) = self.trials {
                    if trials < 100 {
                        return Err(Error::Config(format!(
                            "noise_bias needs at least 100 trials, got {trials}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed.unwrap_or(0)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(self.experiment.name()))
    }
}

pub(crate) fn default_n(kind: ExperimentKind) -> usize {
    match kind {
        ExperimentKind::Convergence => 3,
        ExperimentKind::NoiseBias => 4,
        ExperimentKind::Remedies => 6,
        _ => 8,
    }
}

pub(crate) fn default_r(kind: ExperimentKind) -> usize {
    match kind {
        ExperimentKind::Convergence => 2,
        ExperimentKind::NoiseBias => 3,
        ExperimentKind::Remedies => 3,
        _ => 8,
    }
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    config: &'a ExperimentConfig,
    base_seed: u64,
    derived_seed_rule: &'static str,
    version: &'static str,
    /// Unix timestamp (seconds) at which the run started.
    started_at: f64,
    wall_seconds: f64,
}

/// Tracks metadata across an experiment run. The metadata file is written
/// once before any data file and rewritten with the wall time at the end,
/// so a crashed run still leaves its configuration on disk.
pub(crate) struct MetadataWriter {
    path: PathBuf,
    started: std::time::Instant,
    started_at: f64,
}

impl MetadataWriter {
    pub fn begin(config: &ExperimentConfig, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("metadata.json");
        let started_at = SystemTime::now()
            .duration_since(SystemTime::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let writer = MetadataWriter {
            path,
            started: std::time::Instant::now(),
            started_at,
        };
        writer.write(config, 0.0)?;
        Ok(writer)
    }

    pub fn finish(self, config: &ExperimentConfig) -> Result<PathBuf> {
        self.write(config, self.started.elapsed().as_secs_f64())?;
        Ok(self.path)
    }

    fn write(&self, config: &ExperimentConfig, wall_seconds: f64) -> Result<()> {
        let metadata = RunMetadata {
            config,
            base_seed: config.base_seed(),
            derived_seed_rule: DERIVED_SEED_RULE,
            version: env!("CARGO_PKG_VERSION"),
            started_at: self.started_at,
            wall_seconds,
        };
        let text = serde_json::to_string_pretty(&metadata)?;
        std::fs::write(&self.path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let config: ExperimentConfig =
            serde_json::from_str(r#"{"experiment": "spectrum"}"#).unwrap();
        assert_eq!(config.experiment, ExperimentKind::Spectrum);
        assert!(config.validate().is_ok());
    }

    #[test]
    fn rejects_unknown_fields() {
        let parsed: std::result::Result<ExperimentConfig, _> =
            serde_json::from_str(r#"{"experiment": "spectrum", "bogus": 1}"#);
        assert!(parsed.is_err());
    }

    #[test]
    fn rejects_inconsistent_remedies_rank() {
        let config: ExperimentConfig =
            serde_json::from_str(r#"{"experiment": "remedies", "n": 4, "r": 4}"#).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn rejects_unsorted_tau_grid() {
        let config: ExperimentConfig = serde_json::from_str(
            r#"{"experiment": "convergence", "tau_grid": [1.0, 0.5]}"#,
        )
        .unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn scheme_list_round_trips() {
        let config: ExperimentConfig = serde_json::from_str(
            r#"{
                "experiment": "spectrum",
                "schemes": [
                    {"kind": "glorot_normal", "n": 8},
                    {"kind": "gershgorin_discrete", "n": 16}
                ],
                "emit_svg": true
            }"#,
        )
        .unwrap();
        assert_eq!(config.schemes.as_ref().unwrap().len(), 2);
        assert!(config.emit_svg);
    }
}
