//! Framing, windowed FFT magnitudes and the dyadic sub-band plan.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio_io::AudioPart;
use crate::error::{Error, Result};

/// Frames per part.
pub const DEFAULT_FRAMES: usize = 124;
/// Dyadic sub-bands per spectrum.
pub const DEFAULT_SUBBANDS: usize = 10;

/// Non-overlapping framing of a part. Trailing samples that do not fill a
/// whole frame are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FramePlan {
    pub n_frames: usize,
    pub frame_len: usize,
    pub fft_size: usize,
}

impl FramePlan {
    pub fn new(part_len: usize, n_frames: usize) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::InvalidParameter("frame count must be positive".into()));
        }
        if part_len < n_frames {
            return Err(Error::InvalidParameter(format!(
                "{part_len} samples cannot fill {n_frames} frames"
            )));
        }
        let frame_len = part_len / n_frames;
        Ok(Self {
            n_frames,
            frame_len,
            fft_size: frame_len.next_power_of_two(),
        })
    }

    pub fn for_part(part: &AudioPart, n_frames: usize) -> Result<Self> {
        Self::new(part.len(), n_frames)
    }

    /// Number of bins kept per spectrum row (DC up to, excluding, Nyquist).
    pub fn n_bins(&self) -> usize {
        (self.fft_size / 2).max(1)
    }

    pub fn dropped_samples(&self, part_len: usize) -> usize {
        part_len - self.n_frames * self.frame_len
    }
}

/// Splits a part into `plan.n_frames` contiguous frames.
pub fn frame_signal<'a>(part: &'a AudioPart, plan: &FramePlan) -> Result<Vec<&'a [f64]>> {
    let samples = part.samples();
    if samples.len() < plan.n_frames {
        return Err(Error::InvalidParameter(format!(
            "part of {} samples is shorter than {} frames",
            samples.len(),
            plan.n_frames
        )));
    }
    if plan.n_frames * plan.frame_len > samples.len() {
        return Err(Error::InvalidParameter("frame plan does not fit the part".into()));
    }
    Ok(samples
        .chunks_exact(plan.frame_len)
        .take(plan.n_frames)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Symmetric window coefficients of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann if len <= 1 => vec![1.0; len],
            Window::Hann => {
                let denom = (len - 1) as f64;
                (0..len)
                    .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / denom).cos())
                    .collect()
            }
        }
    }
}

/// Reusable windowed FFT of fixed frame length and transform size.
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    fft_size: usize,
    scratch: Vec<Complex<f64>>,
    buffer: Vec<Complex<f64>>,
}

impl SpectrumAnalyzer {
    pub fn new(frame_len: usize, fft_size: usize, window: Window) -> Result<Self> {
        if fft_size == 0 || !fft_size.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "fft size {fft_size} is not a power of two"
            )));
        }
        if frame_len > fft_size {
            return Err(Error::InvalidParameter(format!(
                "frame of {frame_len} samples exceeds fft size {fft_size}"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Ok(Self {
            fft,
            window: window.coefficients(frame_len),
            fft_size,
            scratch,
            buffer: vec![Complex::default(); fft_size],
        })
    }

    /// Complex spectrum over all `fft_size` bins of the windowed, zero-padded frame.
    pub fn complex_spectrum(&mut self, frame: &[f64]) -> &[Complex<f64>] {
        assert_eq!(frame.len(), self.window.len(), "frame length changed");
        for (slot, (x, w)) in self.buffer.iter_mut().zip(frame.iter().zip(&self.window)) {
            *slot = Complex::new(x * w, 0.0);
        }
        for slot in &mut self.buffer[frame.len()..] {
            *slot = Complex::default();
        }
        self.fft
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        &self.buffer
    }

    /// Magnitudes of bins `[0, fft_size / 2)`.
    pub fn magnitudes(&mut self, frame: &[f64], out: &mut Vec<f64>) {
        let half = (self.fft_size / 2).max(1);
        let spectrum = self.complex_spectrum(frame);
        out.clear();
        out.extend(spectrum[..half].iter().map(|c| c.norm()));
    }
}

/// Hann-windowed, zero-padded FFT magnitudes of one frame, bins `[0, fft_size / 2)`.
pub fn magnitude_spectrum(frame: &[f64], fft_size: usize) -> Result<Vec<f64>> {
    magnitude_spectrum_with(frame, fft_size, Window::Hann)
}

pub fn magnitude_spectrum_with(frame: &[f64], fft_size: usize, window: Window) -> Result<Vec<f64>> {
    let mut analyzer = SpectrumAnalyzer::new(frame.len(), fft_size, window)?;
    let mut out = Vec::new();
    analyzer.magnitudes(frame, &mut out);
    Ok(out)
}

/// Per-frame magnitude spectra `A(n, k)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    mags: Vec<f64>,
    n_bins: usize,
    sample_rate: u32,
    plan: FramePlan,
}

impl Spectrogram {
    /// Builds a spectrogram directly from rows of magnitudes.
    pub fn from_rows(rows: Vec<Vec<f64>>, sample_rate: u32, plan: FramePlan) -> Result<Self> {
        let n_bins = plan.n_bins();
        if rows.len() != plan.n_frames {
            return Err(Error::InvalidParameter(format!(
                "expected {} rows, got {}",
                plan.n_frames,
                rows.len()
            )));
        }
        let mut mags = Vec::with_capacity(rows.len() * n_bins);
        for row in rows {
            if row.len() != n_bins {
                return Err(Error::InvalidParameter(format!(
                    "expected {n_bins} bins, got {}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidParameter("magnitudes must be finite and >= 0".into()));
            }
            mags.extend(row);
        }
        Ok(Self {
            mags,
            n_bins,
            sample_rate,
            plan,
        })
    }

    pub fn compute(part: &AudioPart, plan: &FramePlan) -> Result<Self> {
        let frames = frame_signal(part, plan)?;
        let mut analyzer = SpectrumAnalyzer::new(plan.frame_len, plan.fft_size, Window::Hann)?;
        let n_bins = plan.n_bins();
        let mut mags = Vec::with_capacity(plan.n_frames * n_bins);
        let mut row = Vec::with_capacity(n_bins);
        for frame in frames {
            analyzer.magnitudes(frame, &mut row);
            mags.extend_from_slice(&row);
        }
        Ok(Self {
            mags,
            n_bins,
            sample_rate: part.sample_rate(),
            plan: *plan,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.plan.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn plan(&self) -> &FramePlan {
        &self.plan
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.mags[n * self.n_bins..(n + 1) * self.n_bins]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.mags.chunks_exact(self.n_bins)
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.plan.fft_size as f64
    }

    /// Debug dump: one line per frame, one column per bin.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Dyadic partition of `[0, f_0 / 2)` and the band index of every bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SubBandPlan {
    /// `[low, high)` edges in Hz, lowest band first.
    pub bands: Vec<(f64, f64)>,
    /// Band index (0-based) of each bin in `[0, fft_size / 2)`.
    pub bin_assignment: Vec<usize>,
}

impl SubBandPlan {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    /// Bins per band.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.bands.len()];
        for &b in &self.bin_assignment {
            counts[b] += 1;
        }
        counts
    }
}

/// Dyadic bands `[0, f0/2^n), [f0/2^n, f0/2^(n-1)), ..., [f0/4, f0/2)`.
pub fn make_subband_plan(sample_rate: u32, n_bands: usize, fft_size: usize) -> Result<SubBandPlan> {
    if n_bands < 2 {
        return Err(Error::InvalidParameter("need at least 2 sub-bands".into()));
    }
    if fft_size < 2 || !fft_size.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "fft size {fft_size} is not a power of two"
        )));
    }
    if n_bands >= 63 {
        return Err(Error::InvalidParameter(format!("{n_bands} sub-bands is too many")));
    }
    let f0 = sample_rate as f64;
    // Band i (0-based) has upper edge f0 / 2^(n_bands - i).
    let bands: Vec<(f64, f64)> = (0..n_bands)
        .map(|i| {
            let hi = f0 / (1u64 << (n_bands - i)) as f64;
            let lo = if i == 0 { 0.0 } else { f0 / (1u64 << (n_bands - i + 1)) as f64 };
            (lo, hi)
        })
        .collect();

    // Bin b sits at b * f0 / fft_size, so b >= f0 / 2^m  <=>  b * 2^m >= fft_size.
    // Integer comparison keeps edge bins exact.
    let n_bins = fft_size / 2;
    let bin_assignment: Vec<usize> = (0..n_bins)
        .map(|b| {
            let b = b as u128;
            (1..n_bands)
                .rev()
                .find(|&i| b << (n_bands - i + 1) >= fft_size as u128)
                .unwrap_or(0)
        })
        .collect();

    let plan = SubBandPlan {
        bands,
        bin_assignment,
    };
    if let Some(empty) = plan.counts().iter().position(|&c| c == 0) {
        return Err(Error::InvalidParameter(format!(
            "sub-band {} [{:.3} Hz, {:.3} Hz) is narrower than one bin",
            empty + 1,
            plan.bands[empty].0,
            plan.bands[empty].1
        )));
    }
    Ok(plan)
}
