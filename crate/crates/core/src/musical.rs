//! Rhythm and harmony descriptors: tempo, rhythm clarity, mode and
//! inharmonicity.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioPart;
use crate::error::Result;
use crate::spectral::{frame_signal, FramePlan, Spectrogram, SpectrumAnalyzer, Window};

pub const ONSET_FRAME_LEN: usize = 2048;
pub const ONSET_HOP: usize = 1024;
pub const MIN_BPM: f64 = 40.0;
pub const MAX_BPM: f64 = 200.0;
/// Centre of the tempo prior; its spread is one octave.
pub const TEMPO_PRIOR_BPM: f64 = 120.0;
/// Number of period multiples used to refine the tempo estimate.
const REFINE_MULTIPLES: usize = 4;
/// Shortest envelope, in seconds, that tempo estimation will use.
pub const MIN_TEMPO_SECONDS: f64 = 4.0;

pub const PITCH_MIN_HZ: f64 = 55.0;
pub const PITCH_MAX_HZ: f64 = 2000.0;
/// Normalized autocorrelation a frame needs at its best lag to count as voiced.
pub const VOICING_THRESHOLD: f64 = 0.3;
/// Spectral peaks below this fraction of the frame maximum are ignored.
pub const PEAK_THRESHOLD: f64 = 0.05;

const CHROMA_MIN_HZ: f64 = 55.0;
const CHROMA_MAX_HZ: f64 = 5000.0;

/// Krumhansl-Kessler probe-tone ratings, tonic first.
pub const MAJOR_PROFILE: [f64; 12] = [
    6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88,
];
pub const MINOR_PROFILE: [f64; 12] = [
    6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17,
];

#[derive(Debug, Clone, PartialEq)]
pub struct OnsetEnvelope {
    pub values: Vec<f64>,
    pub frame_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempoEstimate {
    pub bpm: f64,
    pub clarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonyEstimate {
    pub mode: f64,
    pub inharmonicity: f64,
}

/// Sign convention of the mode feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSign {
    /// Positive for major-sounding material.
    #[default]
    MajorMinusMinor,
    MinorMinusMajor,
}

/// Half-wave rectified spectral flux on 2048-sample frames with a 1024 hop,
/// mean removed and floored at zero.
pub fn onset_envelope(part: &AudioPart) -> Result<OnsetEnvelope> {
    let samples = part.samples();
    let frame_rate = part.sample_rate() as f64 / ONSET_HOP as f64;
    if samples.len() < ONSET_FRAME_LEN {
        return Ok(OnsetEnvelope {
            values: Vec::new(),
            frame_rate,
        });
    }
    let n_frames = (samples.len() - ONSET_FRAME_LEN) / ONSET_HOP + 1;
    let mut analyzer = SpectrumAnalyzer::new(ONSET_FRAME_LEN, ONSET_FRAME_LEN, Window::Hann)?;
    let mut prev: Vec<f64> = Vec::new();
    let mut cur: Vec<f64> = Vec::new();
    let mut flux = Vec::with_capacity(n_frames);
    for n in 0..n_frames {
        let start = n * ONSET_HOP;
        analyzer.magnitudes(&samples[start..start + ONSET_FRAME_LEN], &mut cur);
        let value = if n == 0 {
            0.0
        } else {
            cur.iter()
                .zip(&prev)
                .map(|(a, b): (&f64, &f64)| (a - b).max(0.0))
                .sum()
        };
        flux.push(value);
        std::mem::swap(&mut prev, &mut cur);
    }
    let mean = flux.iter().sum::<f64>() / flux.len() as f64;
    let values = flux.into_iter().map(|v| (v - mean).max(0.0)).collect();
    Ok(OnsetEnvelope { values, frame_rate })
}

fn autocorrelation(values: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|lag| {
            values
                .iter()
                .zip(values.iter().skip(lag))
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Vertex offset in `[-0.5, 0.5]` of the parabola through three points.
fn parabolic_offset(left: f64, center: f64, right: f64) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Refines an integer period from the autocorrelation peaks at its first few
/// multiples: each peak `m·p` is located near `m·lag` and refined
/// parabolically, then `p` is the least-squares fit through the origin.
fn refine_period(ac: &[f64], lag: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for m in 1..=REFINE_MULTIPLES {
        let guess = if den > 0.0 { num / den * m as f64 } else { (m * lag) as f64 };
        let centre = guess.round() as usize;
        let lo = centre.saturating_sub(1).max(1);
        let hi = centre + 1;
        if hi + 1 >= ac.len() {
            break;
        }
        let k = (lo..=hi).max_by(|&a, &b| ac[a].total_cmp(&ac[b])).expect("non-empty");
        if ac[k] <= 0.0 {
            break;
        }
        let peak = k as f64 + parabolic_offset(ac[k - 1], ac[k], ac[k + 1]);
        num += m as f64 * peak;
        den += (m * m) as f64;
    }
    if den > 0.0 {
        num / den
    } else {
        lag as f64
    }
}

/// Tempo from the strongest envelope autocorrelation peak between 40 and
/// 200 BPM; clarity is that peak's height relative to lag zero.
pub fn tempo_and_clarity(env: &OnsetEnvelope) -> TempoEstimate {
    let none = TempoEstimate {
        bpm: 0.0,
        clarity: 0.0,
    };
    let fr = env.frame_rate;
    if (env.values.len() as f64) < MIN_TEMPO_SECONDS * fr {
        return none;
    }
    // Light smoothing so a beat period that falls between frame lags still
    // produces a single rounded peak.
    let kernel: Vec<f64> = (-2i32..=2).map(|k| (-(k * k) as f64 / 2.0).exp()).collect();
    let n = env.values.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(j, w)| {
                    let idx = i as isize + j as isize - 2;
                    (0..n as isize)
                        .contains(&idx)
                        .then(|| w * env.values[idx as usize])
                })
                .sum()
        })
        .collect();

    let lag_min = (60.0 * fr / MAX_BPM).ceil() as usize;
    let lag_max = ((60.0 * fr / MIN_BPM).floor() as usize).min(n - 2);
    let ac = autocorrelation(&smooth, (REFINE_MULTIPLES * (lag_max + 1)).min(n - 1));
    if ac[0] <= 0.0 || lag_min > lag_max {
        return none;
    }
    // A log-normal prior around 120 BPM settles octave ambiguity, where a
    // multiple of the beat period can otherwise score marginally higher.
    let weighted = |lag: usize| {
        let octaves = (60.0 * fr / lag as f64 / TEMPO_PRIOR_BPM).log2();
        ac[lag] * (-0.5 * octaves * octaves).exp()
    };
    let best = (lag_min..=lag_max)
        .max_by(|&a, &b| weighted(a).total_cmp(&weighted(b)).then(b.cmp(&a)))
        .expect("non-empty lag range");
    if ac[best] <= 0.0 {
        return none;
    }
    let lag = refine_period(&ac, best);
    TempoEstimate {
        bpm: 60.0 * fr / lag,
        clarity: (ac[best] / ac[0]).clamp(0.0, 1.0),
    }
}

fn pitch_class(hz: f64) -> usize {
    let midi = 69.0 + 12.0 * (hz / 440.0).log2();
    (midi.round() as i64).rem_euclid(12) as usize
}

/// Energy per pitch class (C = 0), accumulated over all frames.
pub fn chromagram(spec: &Spectrogram) -> [f64; 12] {
    let mut chroma = [0.0; 12];
    let classes: Vec<Option<usize>> = (0..spec.n_bins())
        .map(|k| {
            let hz = spec.bin_hz(k);
            (CHROMA_MIN_HZ..=CHROMA_MAX_HZ)
                .contains(&hz)
                .then(|| pitch_class(hz))
        })
        .collect();
    for row in spec.rows() {
        for (a, pc) in row.iter().zip(&classes) {
            if let Some(pc) = pc {
                chroma[*pc] += a * a;
            }
        }
    }
    chroma
}

fn pearson(a: &[f64; 12], b: &[f64; 12]) -> f64 {
    let ma = a.iter().sum::<f64>() / 12.0;
    let mb = b.iter().sum::<f64>() / 12.0;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Correlations of `chroma` with the 12 rotations of `profile`; index = tonic.
pub fn key_correlations(chroma: &[f64; 12], profile: &[f64; 12]) -> [f64; 12] {
    let mut out = [0.0; 12];
    for (tonic, slot) in out.iter_mut().enumerate() {
        let mut rotated = [0.0; 12];
        for (pc, r) in rotated.iter_mut().enumerate() {
            *r = profile[(pc + 12 - tonic) % 12];
        }
        *slot = pearson(chroma, &rotated);
    }
    out
}

/// Strongest major-key correlation minus strongest minor-key correlation
/// (or the reverse under [`ModeSign::MinorMinusMajor`]). Silence gives 0.
pub fn mode_strength(spec: &Spectrogram, sign: ModeSign) -> f64 {
    let chroma = chromagram(spec);
    if chroma.iter().all(|&c| c == 0.0) {
        return 0.0;
    }
    let best = |profile| {
        key_correlations(&chroma, profile)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let diff = best(&MAJOR_PROFILE) - best(&MINOR_PROFILE);
    match sign {
        ModeSign::MajorMinusMinor => diff,
        ModeSign::MinorMinusMajor => -diff,
    }
}

/// Autocorrelation pitch detector for a fixed frame length.
pub struct PitchDetector {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    size: usize,
    frame_len: usize,
    sample_rate: f64,
}

impl PitchDetector {
    pub fn new(frame_len: usize, sample_rate: u32) -> Self {
        let size = (2 * frame_len).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            size,
            frame_len,
            sample_rate: sample_rate as f64,
        }
    }

    /// Fundamental in Hz, or `None` for unvoiced or silent frames.
    pub fn detect(&self, frame: &[f64]) -> Option<f64> {
        assert_eq!(frame.len(), self.frame_len);
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::default()))
            .take(self.size)
            .collect();
        self.forward.process(&mut buf);
        for c in &mut buf {
            *c = Complex::new(c.norm_sqr(), 0.0);
        }
        self.inverse.process(&mut buf);
        let r: Vec<f64> = buf.iter().map(|c| c.re).collect();
        if r[0] <= 1e-12 * self.size as f64 {
            return None;
        }
        let lag_min = (self.sample_rate / PITCH_MAX_HZ).ceil() as usize;
        let lag_max = ((self.sample_rate / PITCH_MIN_HZ).floor() as usize).min(self.frame_len - 2);
        if lag_min < 1 || lag_min > lag_max {
            return None;
        }
        let best = (lag_min..=lag_max).max_by(|&a, &b| r[a].total_cmp(&r[b]).then(b.cmp(&a)))?;
        if r[best] / r[0] < VOICING_THRESHOLD {
            return None;
        }
        let lag = best as f64 + parabolic_offset(r[best - 1], r[best], r[best + 1]);
        Some(self.sample_rate / lag)
    }
}

/// Frequencies (Hz) and magnitudes of local maxima above the peak threshold.
pub fn spectral_peaks(row: &[f64], bin_hz: f64) -> Vec<(f64, f64)> {
    let max = row.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let floor = PEAK_THRESHOLD * max;
    let min_bin = (PITCH_MIN_HZ / 2.0 / bin_hz).ceil().max(1.0) as usize;
    (min_bin..row.len().saturating_sub(1))
        .filter(|&k| row[k] >= floor && row[k] > row[k - 1] && row[k] >= row[k + 1])
        .map(|k| {
            let ln = |v: f64| v.max(1e-300).ln();
            let offset = parabolic_offset(ln(row[k - 1]), ln(row[k]), ln(row[k + 1]));
            ((k as f64 + offset) * bin_hz, row[k])
        })
        .collect()
}

/// Energy-weighted mean relative deviation of spectral peaks from the
/// harmonic series of `f0`. Each peak contributes `2|f - h f0| / f0`, with
/// `h` the nearest harmonic number (at least 1), capped at 1.
pub fn frame_inharmonicity(peaks: &[(f64, f64)], f0: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(f, a) in peaks {
        let h = (f / f0).round().max(1.0);
        let dev = (2.0 * (f - h * f0).abs() / f0).min(1.0);
        num += a * a * dev;
        den += a * a;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Inharmonicity of a part using a precomputed spectrogram of the same framing.
///
/// The autocorrelation pitch of each frame is snapped to the spectral peak
/// closest in log frequency, so the fundamental is always one of the
/// measured partials.
pub fn inharmonicity_with(part: &AudioPart, spec: &Spectrogram) -> Result<f64> {
    let plan = spec.plan();
    let frames = frame_signal(part, plan)?;
    let detector = PitchDetector::new(plan.frame_len, part.sample_rate());
    let bin_hz = spec.bin_hz(1);
    let mut total = 0.0;
    let mut voiced = 0usize;
    for (n, frame) in frames.iter().enumerate() {
        let Some(estimate) = detector.detect(frame) else {
            continue;
        };
        let peaks = spectral_peaks(spec.row(n), bin_hz);
        let Some(&(f0, _)) = peaks
            .iter()
            .min_by(|a, b| (a.0 / estimate).ln().abs().total_cmp(&(b.0 / estimate).ln().abs()))
        else {
            continue;
        };
        total += frame_inharmonicity(&peaks, f0);
        voiced += 1;
    }
    Ok(if voiced == 0 {
        0.0
    } else {
        (total / voiced as f64).clamp(0.0, 1.0)
    })
}

pub fn inharmonicity(part: &AudioPart, n_frames: usize) -> Result<f64> {
    let plan = FramePlan::for_part(part, n_frames)?;
    let spec = Spectrogram::compute(part, &plan)?;
    inharmonicity_with(part, &spec)
}

pub fn harmony(part: &AudioPart, spec: &Spectrogram, sign: ModeSign) -> Result<HarmonyEstimate> {
    Ok(HarmonyEstimate {
        mode: mode_strength(spec, sign),
        inharmonicity: inharmonicity_with(part, spec)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pitch_classes() {
        assert_eq!(pitch_class(440.0), 9);
        assert_eq!(pitch_class(261.63), 0);
        assert_eq!(pitch_class(311.13), 3);
        assert_eq!(pitch_class(130.81), 0);
    }

    #[test]
    fn profile_matches_itself() {
        let corr = key_correlations(&MAJOR_PROFILE, &MAJOR_PROFILE);
        assert!((corr[0] - 1.0).abs() < 1e-12);
        assert!(corr[1..].iter().all(|&c| c < 1.0));
    }

    #[test]
    fn inharmonicity_of_exact_harmonics_is_zero() {
        let peaks = [(200.0, 1.0), (400.0, 0.5), (600.0, 0.25)];
        assert_eq!(frame_inharmonicity(&peaks, 200.0), 0.0);
        let peaks = [(200.0, 1.0), (300.0, 1.0)];
        assert!((frame_inharmonicity(&peaks, 200.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn short_envelope_gives_no_tempo() {
        let env = OnsetEnvelope {
            values: vec![1.0; 10],
            frame_rate: 21.5,
        };
        assert_eq!(tempo_and_clarity(&env).bpm, 0.0);
    }

    #[test]
    fn parabola_vertex() {
        assert_eq!(parabolic_offset(1.0, 2.0, 1.0), 0.0);
        assert!((parabolic_offset(0.0, 1.0, 1.0) - 0.5).abs() < 1e-12);
    }
}
