//! File-level driver: manifest parsing and the decode, resample, cut,
//! normalize and extract chain.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::{decode_wav, extract_part, normalize_peak, resample, AudioPart, CANONICAL_RATE, DEFAULT_PEAK};
use crate::dataset::{format_sig9, Emotion, FeatureTable};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureConfig, FeatureSchema, FeatureVector};
use crate::spectral::{FramePlan, Spectrogram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub sample_rate: u32,
    pub peak_target: f64,
    #[serde(flatten)]
    pub features: FeatureConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_rate: CANONICAL_RATE,
            peak_target: DEFAULT_PEAK,
            features: FeatureConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidParameter("sample_rate must be positive".into()));
        }
        if !(self.peak_target > 0.0 && self.peak_target <= 1.0) {
            return Err(Error::InvalidParameter("peak_target must be in (0, 1]".into()));
        }
        if self.features.n_frames == 0 || self.features.n_subbands < 2 {
            return Err(Error::InvalidParameter("n_frames must be > 0 and n_subbands >= 2".into()));
        }
        if self.features.mfcc_first_coefficient > 1 {
            return Err(Error::InvalidParameter("mfcc_first_coefficient must be 0 or 1".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> std::sync::Arc<FeatureSchema> {
        if self.features.n_subbands == crate::spectral::DEFAULT_SUBBANDS {
            FeatureSchema::standard()
        } else {
            std::sync::Arc::new(FeatureSchema::new(self.features.n_subbands))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    /// Path as written in the manifest.
    pub path: String,
    /// Path resolved against the manifest's directory.
    pub resolved: PathBuf,
    pub label: Emotion,
    pub start: f64,
}

impl ManifestRow {
    pub fn part_id(&self) -> String {
        format!("{}@{}", self.path, format_sig9(self.start))
    }
}

/// Parses a manifest CSV with columns `path`, `label` and optional `start`
/// (seconds, default 0). Relative paths resolve against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let path_col = col("path").ok_or_else(|| Error::Schema("manifest lacks a path column".into()))?;
    let label_col = col("label").ok_or_else(|| Error::Schema("manifest lacks a label column".into()))?;
    let start_col = col("start");
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Schema(e.to_string()))?;
        let line = i + 2;
        let path = record.get(path_col).unwrap_or("").to_string();
        if path.is_empty() {
            return Err(Error::Schema(format!("manifest line {line}: empty path")));
        }
        let label: Emotion = record.get(label_col).unwrap_or("").parse()?;
        let start = match start_col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
            None => 0.0,
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| *v >= 0.0 && v.is_finite())
                .ok_or_else(|| Error::Schema(format!("manifest line {line}: bad start {s:?}")))?,
        };
        let resolved = {
            let p = Path::new(&path);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        rows.push(ManifestRow {
            path,
            resolved,
            label,
            start,
        });
    }
    Ok(rows)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

/// Decodes a WAV file and cuts the normalized canonical part at `start`.
///
/// A silent part is passed through unscaled.
pub fn load_part(path: &Path, start: f64, part_id: &str, config: &PipelineConfig) -> Result<AudioPart> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = decode_wav(&bytes)?;
    let buffer = resample(&decoded, config.sample_rate)?;
    let part = extract_part(&buffer, start, part_id)?;
    match normalize_peak(part.buffer(), config.peak_target) {
        Ok(normalized) => AudioPart::new(normalized, part_id, start),
        Err(Error::SilentInput) => Ok(part),
        Err(e) => Err(e),
    }
}

pub fn extract_file(path: &Path, start: f64, part_id: &str, config: &PipelineConfig) -> Result<FeatureVector> {
    let part = load_part(path, start, part_id, config)?;
    extract_features(&part, &config.features)
}

/// A manifest row that could not be processed.
#[derive(Debug)]
pub struct FileFailure {
    pub row: usize,
    pub path: String,
    pub error: Error,
}

/// Extracts every manifest row, in manifest order, on up to `jobs` threads
/// (0 = rayon default). Failing rows are collected, not fatal.
pub fn extract_manifest(
    rows: &[ManifestRow],
    config: &PipelineConfig,
    jobs: usize,
) -> Result<(FeatureTable, Vec<FileFailure>)> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<Result<FeatureVector>> = pool.install(|| {
        rows.par_iter()
            .map(|r| extract_file(&r.resolved, r.start, &r.part_id(), config))
            .collect()
    });
    let mut table = FeatureTable::new(config.schema());
    let mut failures = Vec::new();
    for (i, (row, result)) in rows.iter().zip(results).enumerate() {
        match result {
            Ok(v) => table.push(row.part_id(), Some(row.label), &v)?,
            Err(error) => failures.push(FileFailure {
                row: i,
                path: row.path.clone(),
                error,
            }),
        }
    }
    Ok((table, failures))
}

/// Writes the spectrogram of each part as `<dir>/<index>.csv` for inspection.
pub fn dump_spectrogram(part: &AudioPart, config: &PipelineConfig, out: &Path) -> Result<()> {
    let plan = FramePlan::for_part(part, config.features.n_frames)?;
    let spec = Spectrogram::compute(part, &plan)?;
    let file = fs::File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = std::io::BufWriter::new(file);
    spec.write_csv(&mut w).map_err(|e| Error::io(out, e))?;
    w.flush().map_err(|e| Error::io(out, e))
}
