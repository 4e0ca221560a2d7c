//! Config file, effective run config, and output placement.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tabe_core::pipeline::{ChunkConfig, PipelineConfig};
use tabe_core::{AnalysisConfig, BoxConfig, CompositeConfig, MaskGenConfig, OcclusionConfig, TargetConfig};

use crate::CliError;

/// Module configs read from `--config`; every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub occlusion: OcclusionConfig,
    pub boxes: BoxConfig,
    pub target: TargetConfig,
    pub composite: CompositeConfig,
    pub mask_generation: MaskGenConfig,
    pub chunks: ChunkConfig,
    pub token: String,
    pub parallel_chunks: bool,
}

impl Default for FileConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            occlusion: p.analysis.occlusion,
            boxes: p.analysis.boxes,
            target: p.analysis.target,
            composite: CompositeConfig::default(),
            mask_generation: p.mask_generation,
            chunks: p.chunks,
            token: p.token,
            parallel_chunks: p.parallel_chunks,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            occlusion: self.occlusion,
            boxes: self.boxes,
            target: self.target,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            analysis: self.analysis(),
            mask_generation: self.mask_generation,
            token: self.token.clone(),
            chunks: self.chunks,
            parallel_chunks: self.parallel_chunks,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.pipeline().validate()?;
        self.composite.validate()?;
        Ok(())
    }
}

pub const RUN_CONFIG_VERSION: u32 = 1;

/// The effective configuration of one invocation, written beside its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig<'a, A: Serialize> {
    pub version: u32,
    pub subcommand: &'a str,
    pub seed: Option<u64>,
    pub arguments: &'a A,
    pub config: &'a FileConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<&'a Path>,
}

/// `run_config.json` inside an output directory.
pub fn run_config_in(dir: &Path) -> PathBuf {
    dir.join("run_config.json")
}

/// `<stem>.run_config.json` beside an output file.
pub fn run_config_beside(file: &Path) -> PathBuf {
    let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    file.with_file_name(format!("{stem}.run_config.json"))
}
