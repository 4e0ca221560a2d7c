//! Zero-shot amodal video segmentation: occlusion reasoning over depth,
//! amodal box estimation, outpainting target regions, fine-tuning data
//! preparation, evaluation, and a pipeline driving external segmentation,
//! depth and outpainting backends.

pub mod analysis;
pub mod bbox;
pub mod composite;
pub mod data;
pub mod error;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod occlusion;
pub mod pipeline;
pub mod render;
pub mod synth;
pub mod target;
pub mod trainprep;

pub use analysis::{analyze_sequence, AnalysisConfig, SequenceAnalysis};
pub use bbox::{AmodalBox, BoxConfig, Provenance};
pub use composite::{AlphaMatte, CompositeConfig, CompositeScene};
pub use data::{DepthConvention, FrameImage, Mask, MaskSequence, NearnessMap, VideoGeometry};
pub use error::{Error, Result};
pub use manifest::{LoadedManifest, SequenceManifest};
pub use metrics::{DatasetReport, EvalReport};
pub use occlusion::{Connectivity, OcclusionConfig, OcclusionLabel, OcclusionVerdict};
pub use target::{TargetConfig, TargetRegion};
pub use trainprep::{FinetuneManifest, MaskGenConfig};
