//! Mel filterbank and cepstral coefficients.

use std::f64::consts::PI;

use crate::spectral::Spectrogram;

pub const MEL_FILTERS: usize = 26;
pub const MFCC_COUNT: usize = 20;
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale, stored as sparse
/// `(first_bin, weights)` rows over a half spectrum.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    filters: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    /// `n_bins` bins at `sample_rate / fft_size` Hz spacing, filters spanning
    /// `[0, sample_rate / 2]`.
    pub fn new(sample_rate: u32, fft_size: usize, n_bins: usize, n_filters: usize) -> Self {
        let fmax = sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(fmax);
        let edges: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (n_filters + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / fft_size as f64;
        let filters = (1..=n_filters)
            .map(|m| {
                let (lo, center, hi) = (edges[m - 1], edges[m], edges[m + 1]);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > lo && f <= center {
                            (f - lo) / (center - lo)
                        } else if f > center && f < hi {
                            (hi - f) / (hi - center)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                match weights.first() {
                    Some(&(first, _)) => (first, weights.into_iter().map(|(_, w)| w).collect()),
                    None => (0, Vec::new()),
                }
            })
            .collect();
        Self { filters }
    }

    pub fn n_filters(&self) -> usize {
        self.filters.len()
    }

    /// Filter energies of a power spectrum.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|(first, weights)| {
                weights
                    .iter()
                    .zip(&power[*first..])
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect()
    }
}

/// Orthonormal DCT-II.
pub fn dct2_orthonormal(input: &[f64], n_out: usize) -> Vec<f64> {
    let n = input.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(m, x)| x * (PI * k as f64 * (m as f64 + 0.5) / n).cos())
                .sum();
            scale * sum
        })
        .collect()
}

/// Computes MFCCs from magnitude spectra.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    bank: MelFilterbank,
    first_coefficient: usize,
}

impl MfccExtractor {
    /// `first_coefficient` is 0 to keep c0..c19, or 1 for c1..c20.
    pub fn new(sample_rate: u32, fft_size: usize, n_bins: usize, first_coefficient: usize) -> Self {
        Self {
            bank: MelFilterbank::new(sample_rate, fft_size, n_bins, MEL_FILTERS),
            first_coefficient,
        }
    }

    pub fn for_spectrogram(spec: &Spectrogram, first_coefficient: usize) -> Self {
        Self::new(
            spec.sample_rate(),
            spec.plan().fft_size,
            spec.n_bins(),
            first_coefficient,
        )
    }

    pub fn coefficients(&self, magnitudes: &[f64]) -> Vec<f64> {
        let power: Vec<f64> = magnitudes.iter().map(|a| a * a).collect();
        let log_mel: Vec<f64> = self
            .bank
            .apply(&power)
            .into_iter()
            .map(|e| e.max(LOG_FLOOR).ln())
            .collect();
        let mut c = dct2_orthonormal(&log_mel, self.first_coefficient + MFCC_COUNT);
        c.drain(..self.first_coefficient);
        c
    }
}

/// The first 20 cepstral coefficients (c0..c19) of frame `n`.
pub fn mfcc(spec: &Spectrogram, n: usize) -> Vec<f64> {
    MfccExtractor::for_spectrogram(spec, 0).coefficients(spec.row(n))
}
