//! Run configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use teamtrack_core::model::PointPrompt;
use teamtrack_core::pipeline::{OcclusionThresholds, PipelineConfig, RecoveryConfig};
use teamtrack_core::segmenter::SegmenterConfig;
use teamtrack_core::tracker::TrackerConfig;

use crate::{CliResult, Failure};

/// Where the frames come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ScenarioSource {
    /// Built-in scene rendered in memory.
    Preset(String),
    /// Directory holding `frame_%06d.ppm` files and `gt.jsonl`.
    Sequence(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSource,
    pub prompts: Vec<PointPrompt>,
    #[serde(default)]
    pub thresholds: OcclusionThresholds,
    #[serde(default)]
    pub recovery: RecoveryConfig,
    #[serde(default)]
    pub segmenter: SegmenterConfig,
    #[serde(default)]
    pub tracker: TrackerConfig,
    /// Directory receiving `track.jsonl`, `events.jsonl` and `run.json`.
    pub output: PathBuf,
    /// Reserved; the pipeline is deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            thresholds: self.thresholds.clone(),
            recovery: self.recovery.clone(),
            tracker: self.tracker.clone(),
        }
    }

    /// Parse `path` and resolve relative paths against its directory. Unknown keys are rejected.
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::io(anyhow::anyhow!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = RunConfig::parse(&text).map_err(|f| f.context(format!("config {}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let ScenarioSource::Sequence(dir) = &mut cfg.scenario {
            *dir = base.join(&*dir);
        }
        cfg.output = base.join(&cfg.output);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> CliResult<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(Failure::validation)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.prompts.is_empty() {
            return Err(Failure::validation(anyhow::anyhow!("at least one prompt is required")));
        }
        self.pipeline().validate()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Check every prompt against the frame size, naming the first offender.
    pub fn check_prompts(&self, width: usize, height: usize) -> CliResult<()> {
        for (i, p) in self.prompts.iter().enumerate() {
            p.check_bounds(width, height)
                .map_err(|e| Failure::validation(anyhow::anyhow!("prompt {i} at ({}, {}): {e}", p.x, p.y)))?;
        }
        Ok(())
    }
}
