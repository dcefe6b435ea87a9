//! Per-part scalar features: intensity, timbre, MFCC and temporal groups,
//! plus aggregation of the rhythm and harmony descriptors into one vector.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::audio_io::AudioPart;
use crate::error::{Error, Result};
use crate::mfcc::{MfccExtractor, MFCC_COUNT};
use crate::musical::{self, ModeSign};
use crate::spectral::{
    frame_signal, make_subband_plan, FramePlan, Spectrogram, SubBandPlan, DEFAULT_FRAMES,
    DEFAULT_SUBBANDS,
};
use crate::stats::population_mean_std;

pub const ROLLOFF_FRACTION: f64 = 0.85;
pub const AUTOCORR_LAGS: usize = 13;
/// Feature count under the default configuration.
pub const FEATURE_COUNT: usize = 87;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    Intensity,
    Timbre,
    #[serde(rename = "MFCC")]
    Mfcc,
    Rhythm,
    Harmony,
    Temporal,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 6] = [
        FeatureGroup::Intensity,
        FeatureGroup::Timbre,
        FeatureGroup::Mfcc,
        FeatureGroup::Rhythm,
        FeatureGroup::Harmony,
        FeatureGroup::Temporal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Intensity => "Intensity",
            FeatureGroup::Timbre => "Timbre",
            FeatureGroup::Mfcc => "MFCC",
            FeatureGroup::Rhythm => "Rhythm",
            FeatureGroup::Harmony => "Harmony",
            FeatureGroup::Temporal => "Temporal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered feature names and their groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    names: Vec<String>,
    groups: Vec<FeatureGroup>,
}

impl FeatureSchema {
    pub fn new(n_subbands: usize) -> Self {
        let mut names = Vec::new();
        let mut groups = Vec::new();
        let mut push = |name: String, group| {
            names.push(name);
            groups.push(group);
        };
        let stats = |push: &mut dyn FnMut(String, FeatureGroup), base: &str, group| {
            push(format!("{base}_mean"), group);
            push(format!("{base}_std"), group);
        };
        stats(&mut push, "intensity", FeatureGroup::Intensity);
        for i in 1..=n_subbands {
            stats(&mut push, &format!("subband_{i:02}"), FeatureGroup::Intensity);
        }
        for base in ["centroid", "rolloff", "flux"] {
            stats(&mut push, base, FeatureGroup::Timbre);
        }
        for i in 0..MFCC_COUNT {
            stats(&mut push, &format!("mfcc_{i:02}"), FeatureGroup::Mfcc);
        }
        stats(&mut push, "zcr", FeatureGroup::Temporal);
        for lag in 1..=AUTOCORR_LAGS {
            push(format!("autocorr_{lag:02}"), FeatureGroup::Temporal);
        }
        push("tempo_bpm".into(), FeatureGroup::Rhythm);
        push("rhythm_clarity".into(), FeatureGroup::Rhythm);
        push("mode".into(), FeatureGroup::Harmony);
        push("inharmonicity".into(), FeatureGroup::Harmony);
        Self { names, groups }
    }

    /// The shared default (10 sub-band, 87 feature) schema.
    pub fn standard() -> Arc<FeatureSchema> {
        static STANDARD: OnceLock<Arc<FeatureSchema>> = OnceLock::new();
        STANDARD
            .get_or_init(|| Arc::new(FeatureSchema::new(DEFAULT_SUBBANDS)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// A named, ordered feature vector for one part.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    schema: Arc<FeatureSchema>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(schema: Arc<FeatureSchema>, values: Vec<f64>) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::Dimension {
                expected: schema.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "feature {} is not finite ({})",
                schema.names[i], values[i]
            )));
        }
        Ok(Self { schema, values })
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.schema.index_of(name).map(|i| self.values[i])
    }
}

/// Knobs of the feature pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub n_frames: usize,
    pub n_subbands: usize,
    /// 0 keeps cepstral coefficients c0..c19, 1 keeps c1..c20.
    pub mfcc_first_coefficient: usize,
    pub mode_sign: ModeSign,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_frames: DEFAULT_FRAMES,
            n_subbands: DEFAULT_SUBBANDS,
            mfcc_first_coefficient: 0,
            mode_sign: ModeSign::MajorMinusMinor,
        }
    }
}

// ---- per-frame measures on a single spectrum row --------------------------

/// Total magnitude of a spectrum row.
pub fn row_intensity(row: &[f64]) -> f64 {
    row.iter().sum()
}

/// Fraction of the row's magnitude in each sub-band, or `None` for a silent row.
pub fn row_subband_ratios(row: &[f64], plan: &SubBandPlan) -> Option<Vec<f64>> {
    let total = row_intensity(row);
    if total <= 0.0 {
        return None;
    }
    let mut sums = vec![0.0; plan.n_bands()];
    for (a, &band) in row.iter().zip(&plan.bin_assignment) {
        sums[band] += a;
    }
    Some(sums.into_iter().map(|s| s / total).collect())
}

/// Magnitude-weighted mean bin index, or `None` for a silent row.
pub fn row_centroid(row: &[f64]) -> Option<f64> {
    let total = row_intensity(row);
    if total <= 0.0 {
        return None;
    }
    let weighted: f64 = row.iter().enumerate().map(|(k, a)| a * k as f64).sum();
    Some(weighted / total)
}

/// Smallest bin whose cumulative magnitude reaches 85% of the total, or
/// `None` for a silent row.
pub fn row_rolloff(row: &[f64]) -> Option<usize> {
    let total = row_intensity(row);
    if total <= 0.0 {
        return None;
    }
    let target = ROLLOFF_FRACTION * total;
    let mut acc = 0.0;
    for (k, a) in row.iter().enumerate() {
        acc += a;
        if acc >= target {
            return Some(k);
        }
    }
    Some(row.len() - 1)
}

/// Squared Euclidean distance between consecutive spectrum rows.
pub fn row_flux(prev: &[f64], cur: &[f64]) -> f64 {
    prev.iter().zip(cur).map(|(p, c)| (c - p) * (c - p)).sum()
}

/// Sign changes in a frame, with zero counted as positive.
pub fn frame_zero_crossings(frame: &[f64]) -> usize {
    frame
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count()
}

// ---- spectrogram / part level operations ----------------------------------

pub fn frame_intensity(spec: &Spectrogram, n: usize) -> f64 {
    row_intensity(spec.row(n))
}

pub fn subband_ratios(spec: &Spectrogram, plan: &SubBandPlan, n: usize) -> Option<Vec<f64>> {
    row_subband_ratios(spec.row(n), plan)
}

pub fn spectral_centroid(spec: &Spectrogram, n: usize) -> Option<f64> {
    row_centroid(spec.row(n))
}

pub fn rolloff(spec: &Spectrogram, n: usize) -> Option<usize> {
    row_rolloff(spec.row(n))
}

/// Flux between frames `n - 1` and `n`. Frame 0 has no predecessor.
pub fn spectral_flux(spec: &Spectrogram, n: usize) -> Option<f64> {
    (n >= 1).then(|| row_flux(spec.row(n - 1), spec.row(n)))
}

/// Mean squared amplitude of every frame.
pub fn frame_energies(part: &AudioPart, plan: &FramePlan) -> Result<Vec<f64>> {
    Ok(frame_signal(part, plan)?
        .into_iter()
        .map(|f| f.iter().map(|x| x * x).sum::<f64>() / f.len() as f64)
        .collect())
}

/// Mean and population standard deviation of the per-frame energy sequence.
pub fn energy_stats(part: &AudioPart, plan: &FramePlan) -> Result<(f64, f64)> {
    Ok(population_mean_std(&frame_energies(part, plan)?))
}

pub fn zero_crossings(part: &AudioPart, plan: &FramePlan) -> Result<Vec<usize>> {
    Ok(frame_signal(part, plan)?
        .into_iter()
        .map(frame_zero_crossings)
        .collect())
}

/// Autocorrelation of the whole part at lags 1..=13, divided by the lag-0
/// energy. A silent part gives zeros.
pub fn autocorr_features(part: &AudioPart) -> [f64; AUTOCORR_LAGS] {
    let x = part.samples();
    let mut out = [0.0; AUTOCORR_LAGS];
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy <= 0.0 {
        return out;
    }
    for (i, slot) in out.iter_mut().enumerate() {
        let lag = i + 1;
        let r: f64 = x.iter().zip(&x[lag.min(x.len())..]).map(|(a, b)| a * b).sum();
        *slot = (r / energy).clamp(-1.0, 1.0);
    }
    out
}

/// Runs the full pipeline on one part.
pub fn extract_features(part: &AudioPart, config: &FeatureConfig) -> Result<FeatureVector> {
    let schema = if config.n_subbands == DEFAULT_SUBBANDS {
        FeatureSchema::standard()
    } else {
        Arc::new(FeatureSchema::new(config.n_subbands))
    };
    let plan = FramePlan::for_part(part, config.n_frames).map_err(|e| e.in_feature("framing"))?;
    let spec = Spectrogram::compute(part, &plan).map_err(|e| e.in_feature("spectrogram"))?;
    let bands = make_subband_plan(part.sample_rate(), config.n_subbands, plan.fft_size)
        .map_err(|e| e.in_feature("subband"))?;

    let mut values = Vec::with_capacity(schema.len());
    let push_stats = |values: &mut Vec<f64>, series: &[f64]| {
        let (m, s) = population_mean_std(series);
        values.push(m);
        values.push(s);
    };

    // Intensity.
    let intensities: Vec<f64> = spec.rows().map(row_intensity).collect();
    push_stats(&mut values, &intensities);
    let ratios: Vec<Vec<f64>> = spec
        .rows()
        .filter_map(|r| row_subband_ratios(r, &bands))
        .collect();
    for band in 0..config.n_subbands {
        let series: Vec<f64> = ratios.iter().map(|r| r[band]).collect();
        push_stats(&mut values, &series);
    }

    // Timbre.
    let centroids: Vec<f64> = spec.rows().filter_map(row_centroid).collect();
    push_stats(&mut values, &centroids);
    let rolloffs: Vec<f64> = spec
        .rows()
        .filter_map(row_rolloff)
        .map(|r| r as f64)
        .collect();
    push_stats(&mut values, &rolloffs);
    let fluxes: Vec<f64> = (1..spec.n_frames())
        .map(|n| row_flux(spec.row(n - 1), spec.row(n)))
        .collect();
    push_stats(&mut values, &fluxes);

    // MFCC.
    let extractor = MfccExtractor::for_spectrogram(&spec, config.mfcc_first_coefficient);
    let coeffs: Vec<Vec<f64>> = spec.rows().map(|r| extractor.coefficients(r)).collect();
    for c in 0..MFCC_COUNT {
        let series: Vec<f64> = coeffs.iter().map(|row| row[c]).collect();
        push_stats(&mut values, &series);
    }

    // Temporal.
    let zcr: Vec<f64> = zero_crossings(part, &plan)
        .map_err(|e| e.in_feature("zcr"))?
        .into_iter()
        .map(|z| z as f64)
        .collect();
    push_stats(&mut values, &zcr);
    values.extend(autocorr_features(part));

    // Rhythm.
    let env = musical::onset_envelope(part).map_err(|e| e.in_feature("tempo_bpm"))?;
    let tempo = musical::tempo_and_clarity(&env);
    values.push(tempo.bpm);
    values.push(tempo.clarity);

    // Harmony.
    let harmony =
        musical::harmony(part, &spec, config.mode_sign).map_err(|e| e.in_feature("inharmonicity"))?;
    values.push(harmony.mode);
    values.push(harmony.inharmonicity);

    FeatureVector::new(schema, values)
}
