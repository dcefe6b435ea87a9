//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Symmetric Hann window written from its textbook definition.
pub fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| (PI * i as f64 / (len - 1) as f64).sin().powi(2))
        .collect()
}

/// O(N²) DFT magnitudes of `frame` zero-padded to `n`, bins `[0, n / 2)`.
pub fn naive_dft_magnitudes(frame: &[f64], n: usize) -> Vec<f64> {
    (0..n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in frame.iter().enumerate() {
                // Reduce the phase index first so large k·t stays exact.
                let phase = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += x * phase.cos();
                im -= x * phase.sin();
            }
            re.hypot(im)
        })
        .collect()
}

pub fn windowed(frame: &[f64]) -> Vec<f64> {
    frame.iter().zip(hann(frame.len())).map(|(x, w)| x * w).collect()
}

/// Largest absolute difference divided by the largest reference magnitude.
pub fn max_relative_error(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    got.iter()
        .zip(want)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / scale
}

/// Mel scale as used by HTK.
pub fn mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn inv_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// MFCCs of one magnitude row from first principles: triangular filters with
/// edges equally spaced in mel, log energies, orthonormal DCT-II.
pub fn reference_mfcc(mags: &[f64], rate: f64, fft_size: usize, n_filters: usize, first: usize, n_out: usize) -> Vec<f64> {
    let top = mel(rate / 2.0);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| inv_mel(top * i as f64 / (n_filters + 1) as f64))
        .collect();
    let energies: Vec<f64> = (0..n_filters)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let e: f64 = mags
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let f = k as f64 * rate / fft_size as f64;
                    let w = if f > lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    };
                    w * a * a
                })
                .sum();
            e.max(1e-10).ln()
        })
        .collect();
    let n = n_filters as f64;
    (first..first + n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * energies
                    .iter()
                    .enumerate()
                    .map(|(m, e)| e * (PI * k as f64 * (m as f64 + 0.5) / n).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Fisher ratio from its definition with population moments.
pub fn fisher(a: &[f64], b: &[f64]) -> f64 {
    let moments = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
        (m, var)
    };
    let (ma, va) = moments(a);
    let (mb, vb) = moments(b);
    (ma - mb).powi(2) / (va + vb)
}
