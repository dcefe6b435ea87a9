//! Optional TOML run configuration. Command-line flags override it.

use std::path::Path;

use anyhow::Context;
use emotag_core::{PipelineConfig, StdConvention, TrainParams};
use serde::Deserialize;

/// ```toml
/// jobs = 4
///
/// [features]
/// sample_rate = 22050
/// n_frames = 124
/// n_subbands = 10
/// peak_target = 0.99
/// mfcc_first_coefficient = 0
/// mode_sign = "major-minus-minor"
///
/// [train]
/// kernel = "rbf"
/// c = 1.0
/// gamma = 0.01
/// tolerance = 0.001
/// max_iterations = 100000
///
/// [analysis]
/// std = "sample"
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub jobs: Option<usize>,
    pub features: PipelineConfig,
    pub train: TrainParams,
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Standard deviation used for the per-label summary table.
    pub std: StdConvention,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            std: StdConvention::Sample,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
