//! Acoustic features, label separability and SVM emotion tagging for
//! 15-second music parts.
//!
//! The pipeline turns a WAV file into a fixed-length mono part
//! ([`audio_io`]), frames it into magnitude spectra ([`spectral`]), reduces
//! those to an 87-value [`FeatureVector`] ([`features`], [`mfcc`],
//! [`musical`]), and then either ranks label pairs by Fisher separability
//! ([`analysis`]) or trains and cross-validates a multiclass SVM
//! ([`classifier`]).

pub mod analysis;
pub mod audio_io;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod features;
pub mod mfcc;
pub mod musical;
pub mod pipeline;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use analysis::{LabelSummary, SeparabilityMatrix};
pub use audio_io::{AudioBuffer, AudioPart};
pub use classifier::{EvalReport, KernelKind, SvmModel, TrainParams};
pub use dataset::{Emotion, FeatureTable, LabeledDataset};
pub use error::{Error, Result};
pub use features::{FeatureConfig, FeatureGroup, FeatureSchema, FeatureVector};
pub use pipeline::PipelineConfig;
pub use spectral::{FramePlan, Spectrogram, SubBandPlan};
pub use stats::StdConvention;
