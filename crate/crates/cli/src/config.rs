//! The TOML configuration file. Every command-line flag has a key here;
//! flags win over the file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lanewatch::behavior::BehaviorConfig;
use lanewatch::imaging::ImagingParams;
use lanewatch::lane::LaneParams;
use lanewatch::pipeline::PipelineConfig;
use lanewatch::scenario::ScenarioSpec;
use lanewatch::tracking::TrackerParams;
use serde::Deserialize;

pub const SEED_ENV: &str = "LANEWATCH_SEED";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub detections: Option<PathBuf>,
    pub lane_truth: Option<PathBuf>,
    pub frames_dir: Option<PathBuf>,
    pub truth_domain: [f64; 2],
}

impl Default for InputSection {
    fn default() -> Self {
        Self {
            detections: None,
            lane_truth: None,
            frames_dir: None,
            truth_domain: PipelineConfig::default().truth_domain,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub overlay_dir: Option<PathBuf>,
    pub csv_trim_zeros: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub lenient: bool,
}

/// Destinations for `simulate`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub detections: Option<PathBuf>,
    pub lane_truth: Option<PathBuf>,
    pub frames_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSection,
    pub output: OutputSection,
    pub run: RunSection,
    pub imaging: ImagingParams,
    pub lane: LaneParams,
    pub tracking: TrackerParams,
    pub behavior: BehaviorConfig,
    pub scenario: ScenarioSpec,
    pub simulate: SimulateSection,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("I/O error: {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    /// Applies `LANEWATCH_SEED` to the RANSAC and scenario seeds.
    pub fn apply_seed_env(&mut self, value: Option<String>) -> Result<()> {
        if let Some(v) = value {
            let seed: u64 = v
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))?;
            self.lane.seed = seed;
            self.scenario.seed = seed;
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            imaging: self.imaging.clone(),
            lane: self.lane,
            tracking: self.tracking,
            behavior: self.behavior.clone(),
            truth_domain: self.input.truth_domain,
            csv_trim_zeros: self.output.csv_trim_zeros,
            lenient: self.run.lenient,
        }
    }
}
