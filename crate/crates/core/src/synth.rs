//! Deterministic synthetic signals and datasets for tests, benchmarks and
//! demos.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::audio_io::{part_len, AudioBuffer, AudioPart, CANONICAL_RATE};
use crate::dataset::{Emotion, LabeledDataset, LabeledRow};
use crate::features::FeatureSchema;
use crate::stats::population_mean_std;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum of sinusoids `(frequency Hz, amplitude)` over `len` samples.
pub fn partials(components: &[(f64, f64)], len: usize, rate: u32) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let t = i as f64 / rate as f64;
            components
                .iter()
                .map(|&(f, a)| a * (2.0 * PI * f * t).sin())
                .sum()
        })
        .collect()
}

pub fn sine(freq: f64, amplitude: f64, len: usize, rate: u32) -> Vec<f64> {
    partials(&[(freq, amplitude)], len, rate)
}

/// Unit impulses every `60 / bpm` seconds, starting at `offset` seconds.
pub fn click_train(bpm: f64, len: usize, rate: u32, offset: f64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let period = 60.0 / bpm;
    let mut t = offset;
    loop {
        let i = (t * rate as f64).round() as usize;
        if i >= len {
            break;
        }
        out[i] = 1.0;
        t += period;
    }
    out
}

pub fn white_noise(seed: u64, len: usize, amplitude: f64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len)
        .map(|_| amplitude * (2.0 * r.gen::<f64>() - 1.0))
        .collect()
}

pub fn midi_hz(note: f64) -> f64 {
    440.0 * 2f64.powf((note - 69.0) / 12.0)
}

/// Equal-amplitude sine chord of MIDI notes.
pub fn chord(notes: &[f64], amplitude: f64, len: usize, rate: u32) -> Vec<f64> {
    let comps: Vec<(f64, f64)> = notes.iter().map(|&n| (midi_hz(n), amplitude)).collect();
    partials(&comps, len, rate)
}

/// Wraps samples of exactly one part length at the canonical rate.
pub fn canonical_part(samples: Vec<f64>) -> AudioPart {
    assert_eq!(samples.len(), part_len(CANONICAL_RATE), "not a canonical part length");
    AudioPart::new(
        AudioBuffer::new(samples, CANONICAL_RATE).expect("finite samples"),
        "synthetic",
        0.0,
    )
    .expect("canonical length")
}

/// A canonical part of band-limited noise plus a few random partials,
/// loosely music-like. Used for throughput checks.
pub fn random_part(seed: u64) -> AudioPart {
    let len = part_len(CANONICAL_RATE);
    let mut r = rng(seed);
    let comps: Vec<(f64, f64)> = (0..4)
        .map(|_| (r.gen_range(80.0..2000.0), r.gen_range(0.05..0.3)))
        .collect();
    let tone = partials(&comps, len, CANONICAL_RATE);
    let noise = white_noise(seed ^ 0x9e37_79b9, len, 0.1);
    canonical_part(tone.iter().zip(&noise).map(|(a, b)| a + b).collect())
}

fn gaussian_row(r: &mut ChaCha8Rng, center: &[f64], sigma: f64) -> Vec<f64> {
    center
        .iter()
        .map(|c| c + sigma * r.sample::<f64, _>(StandardNormal))
        .collect()
}

/// `k` orthonormal vectors of dimension `d` in a random orientation
/// (Gram-Schmidt on Gaussian draws).
fn random_orthonormal(r: &mut ChaCha8Rng, k: usize, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// One unit-sigma Gaussian cluster per label over all features. Centers are
/// `spacing` apart pairwise, along random orthonormal directions.
pub fn gaussian_clusters(seed: u64, labels: &[Emotion], per_label: usize, spacing: f64) -> LabeledDataset {
    let schema = FeatureSchema::standard();
    let d = schema.len();
    let mut r = rng(seed);
    let directions = random_orthonormal(&mut r, labels.len(), d);
    let scale = spacing / 2f64.sqrt();
    let mut rows = Vec::new();
    for (&label, dir) in labels.iter().zip(&directions) {
        let center: Vec<f64> = dir.iter().map(|x| scale * x).collect();
        for i in 0..per_label {
            rows.push(LabeledRow {
                part_id: format!("{label}_{i:03}"),
                label,
                features: gaussian_row(&mut r, &center, 1.0),
            });
        }
    }
    LabeledDataset::new(schema, rows).expect("generated rows are valid")
}

/// Standard-normal features with labels dealt out evenly and shuffled.
pub fn random_label_noise(seed: u64, n_rows: usize) -> LabeledDataset {
    let schema = FeatureSchema::standard();
    let d = schema.len();
    let mut r = rng(seed);
    let mut labels: Vec<Emotion> = (0..n_rows).map(|i| Emotion::ALL[i % 6]).collect();
    labels.shuffle(&mut r);
    let zero = vec![0.0; d];
    let rows = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| LabeledRow {
            part_id: format!("noise_{i:03}"),
            label,
            features: gaussian_row(&mut r, &zero, 1.0),
        })
        .collect();
    LabeledDataset::new(schema, rows).expect("generated rows are valid")
}

/// Two labels whose rows are i.i.d. standard normal except feature
/// `column`, which is standardized per label to sample mean 0 and `gap` and
/// population std 1. Its Fisher ratio is therefore exactly `gap² / 2`.
pub fn single_feature_gap(
    seed: u64,
    labels: (Emotion, Emotion),
    per_label: usize,
    column: usize,
    gap: f64,
) -> LabeledDataset {
    let schema = FeatureSchema::standard();
    let d = schema.len();
    let mut r = rng(seed);
    let zero = vec![0.0; d];
    let mut rows = Vec::new();
    for (k, label) in [labels.0, labels.1].into_iter().enumerate() {
        let mut block: Vec<LabeledRow> = (0..per_label)
            .map(|i| LabeledRow {
                part_id: format!("{label}_{i:03}"),
                label,
                features: gaussian_row(&mut r, &zero, 1.0),
            })
            .collect();
        let values: Vec<f64> = block.iter().map(|row| row.features[column]).collect();
        let (m, s) = population_mean_std(&values);
        for row in &mut block {
            row.features[column] = (row.features[column] - m) / s + gap * k as f64;
        }
        rows.extend(block);
    }
    LabeledDataset::new(schema, rows).expect("generated rows are valid")
}
