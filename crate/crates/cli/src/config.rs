use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use tofplane::metrics::DEFAULT_LOSS_SCALE;
use tofplane::ransac::RansacConfig;

use crate::Failure;

/// Everything a subcommand needs. Saved with `--save-config` and reloaded with
/// `--config`; flags given on the command line win over file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub predicted: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub intrinsics: Option<PathBuf>,
    pub loose: RansacConfig,
    pub tight: RansacConfig,
    pub seed: u64,
    pub scale_s: f64,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            predicted: None,
            output: None,
            intrinsics: None,
            loose: RansacConfig::loose(),
            tight: RansacConfig::tight(),
            seed: 0,
            scale_s: DEFAULT_LOSS_SCALE,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Input directory (for `simulate`, the scene spec JSON file)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Second directory: predicted frames for `losses`, comparison set for `evaluate`
    #[arg(long)]
    pub predicted: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Intrinsics JSON (default: intrinsics.json inside the input directory)
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
    #[arg(long)]
    pub loose_th: Option<f64>,
    /// Degrees
    #[arg(long)]
    pub loose_angle: Option<f64>,
    #[arg(long)]
    pub tight_th: Option<f64>,
    /// Degrees
    #[arg(long)]
    pub tight_angle: Option<f64>,
    /// RANSAC rounds for both stages
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Loss scale hyperparameter
    #[arg(long)]
    pub scale_s: Option<f64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Run configuration JSON used as the base for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the effective run configuration to this file
    #[arg(long)]
    pub save_config: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($dst:expr => $src:expr),* $(,)?) => {
                $(if let Some(v) = $src.clone() { $dst = v.into(); })*
            };
        }
        set! {
            cfg.input => self.input,
            cfg.predicted => self.predicted,
            cfg.output => self.output,
            cfg.intrinsics => self.intrinsics,
            cfg.loose.distance_threshold => self.loose_th,
            cfg.loose.max_axis_angle => self.loose_angle,
            cfg.tight.distance_threshold => self.tight_th,
            cfg.tight.max_axis_angle => self.tight_angle,
            cfg.loose.iterations => self.iterations,
            cfg.tight.iterations => self.iterations,
            cfg.seed => self.seed,
            cfg.scale_s => self.scale_s,
            cfg.jobs => self.jobs,
        }
        if cfg.jobs == Some(0) {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        if let Some(path) = &self.save_config {
            cfg.save(path)?;
        }
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }

    pub fn require_input(&self) -> Result<&Path, Failure> {
        self.input
            .as_deref()
            .ok_or_else(|| Failure::Usage("--input is required".into()))
    }

    pub fn require_output(&self) -> Result<&Path, Failure> {
        self.output
            .as_deref()
            .ok_or_else(|| Failure::Usage("--output is required".into()))
    }

    pub fn require_predicted(&self) -> Result<&Path, Failure> {
        self.predicted
            .as_deref()
            .ok_or_else(|| Failure::Usage("--predicted is required".into()))
    }
}
