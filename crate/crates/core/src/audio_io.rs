//! WAV decoding, resampling, peak normalization and 15-second part cutting.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Canonical analysis rate in Hz.
pub const CANONICAL_RATE: u32 = 22_050;
/// Length of a music part in seconds.
pub const PART_SECONDS: u32 = 15;
/// Default peak level applied by [`normalize_peak`].
pub const DEFAULT_PEAK: f64 = 0.99;
/// Number of taps of the resampling kernel at the lower of the two rates.
pub const RESAMPLER_TAPS: usize = 64;
const KAISER_BETA: f64 = 8.6;

/// Mono sampled audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

/// A fixed-length excerpt of a track, the unit every feature is computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioPart {
    buffer: AudioBuffer,
    source_id: String,
    start_offset: f64,
}

impl AudioPart {
    /// Wraps a buffer that already has exactly `PART_SECONDS` of audio.
    pub fn new(buffer: AudioBuffer, source_id: impl Into<String>, start_offset: f64) -> Result<Self> {
        let expected = part_len(buffer.sample_rate());
        if buffer.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "a part needs exactly {expected} samples, got {}",
                buffer.len()
            )));
        }
        Ok(Self {
            buffer,
            source_id: source_id.into(),
            start_offset,
        })
    }

    /// Builds a part from raw samples, bypassing the length check. Used for
    /// short synthetic signals in tests and for callers with their own framing.
    pub fn from_samples_unchecked(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Ok(Self {
            buffer: AudioBuffer::new(samples, sample_rate)?,
            source_id: String::new(),
            start_offset: 0.0,
        })
    }

    pub fn buffer(&self) -> &AudioBuffer {
        &self.buffer
    }

    pub fn samples(&self) -> &[f64] {
        self.buffer.samples()
    }

    pub fn sample_rate(&self) -> u32 {
        self.buffer.sample_rate()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn start_offset(&self) -> f64 {
        self.start_offset
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }
}

/// Number of samples in a part at `sample_rate`.
pub fn part_len(sample_rate: u32) -> usize {
    PART_SECONDS as usize * sample_rate as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SampleFormat {
    Int,
    Float,
}

struct FmtChunk {
    format: SampleFormat,
    channels: u16,
    sample_rate: u32,
    bits: u16,
    block_align: u16,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn decode_err(chunk: &'static str, reason: impl Into<String>) -> Error {
    Error::Decode {
        chunk,
        reason: reason.into(),
    }
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk> {
    if body.len() < 16 {
        return Err(decode_err("fmt", format!("chunk is {} bytes, need 16", body.len())));
    }
    let mut tag = read_u16(body, 0);
    let channels = read_u16(body, 2);
    let sample_rate = read_u32(body, 4);
    let block_align = read_u16(body, 12);
    let bits = read_u16(body, 14);
    if tag == 0xFFFE {
        // WAVE_FORMAT_EXTENSIBLE: the real tag leads the sub-format GUID.
        if body.len() < 26 {
            return Err(decode_err("fmt", "extensible format without sub-format"));
        }
        tag = read_u16(body, 24);
    }
    let format = match (tag, bits) {
        (1, 8 | 16 | 24 | 32) => SampleFormat::Int,
        (3, 32) => SampleFormat::Float,
        (1, b) | (3, b) => {
            return Err(decode_err("fmt", format!("unsupported bit depth {b}")));
        }
        (t, _) => return Err(decode_err("fmt", format!("unsupported codec tag {t:#06x}"))),
    };
    if channels == 0 {
        return Err(decode_err("fmt", "zero channels"));
    }
    if sample_rate == 0 {
        return Err(decode_err("fmt", "zero sample rate"));
    }
    let min_align = channels as usize * (bits as usize / 8);
    if (block_align as usize) < min_align {
        return Err(decode_err(
            "fmt",
            format!("block align {block_align} smaller than {min_align}"),
        ));
    }
    Ok(FmtChunk {
        format,
        channels,
        sample_rate,
        bits,
        block_align,
    })
}

fn decode_sample(bytes: &[u8], fmt: &FmtChunk) -> f64 {
    match (fmt.format, fmt.bits) {
        (SampleFormat::Int, 8) => (bytes[0] as f64 - 128.0) / 128.0,
        (SampleFormat::Int, 16) => i16::from_le_bytes([bytes[0], bytes[1]]) as f64 / 32_768.0,
        (SampleFormat::Int, 24) => {
            let v = i32::from_le_bytes([0, bytes[0], bytes[1], bytes[2]]) >> 8;
            v as f64 / 8_388_608.0
        }
        (SampleFormat::Int, 32) => {
            i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64 / 2_147_483_648.0
        }
        (SampleFormat::Float, _) => f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64,
        _ => unreachable!("rejected by parse_fmt"),
    }
}

/// Decodes a RIFF/WAVE byte stream into a mono buffer in [-1, 1].
///
/// Multichannel frames are folded down to the arithmetic mean of their
/// channels.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 {
        return Err(decode_err("RIFF", "file shorter than the 12-byte header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::NotRiff);
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(decode_err("RIFF", "form type is not WAVE"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        match id {
            b"fmt " => {
                let end = body_start
                    .checked_add(size)
                    .filter(|&e| e <= bytes.len())
                    .ok_or_else(|| decode_err("fmt", "chunk runs past end of file"))?;
                fmt = Some(parse_fmt(&bytes[body_start..end])?);
            }
            b"data" => {
                let fmt = fmt.ok_or_else(|| decode_err("data", "data chunk before fmt chunk"))?;
                let available = bytes.len() - body_start;
                if size > available {
                    return Err(decode_err(
                        "data",
                        format!("truncated: header declares {size} bytes, {available} present"),
                    ));
                }
                let data = &bytes[body_start..body_start + size];
                let align = fmt.block_align as usize;
                let width = fmt.bits as usize / 8;
                let channels = fmt.channels as usize;
                let samples = data
                    .chunks_exact(align)
                    .map(|frame| {
                        let sum: f64 = (0..channels)
                            .map(|c| decode_sample(&frame[c * width..], &fmt))
                            .sum();
                        sum / channels as f64
                    })
                    .collect();
                return AudioBuffer::new(samples, fmt.sample_rate)
                    .map_err(|e| decode_err("data", e.to_string()));
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }
    Err(match fmt {
        None => decode_err("fmt", "missing fmt chunk"),
        Some(_) => decode_err("data", "missing data chunk"),
    })
}

/// Encodes a mono buffer as 16-bit PCM WAV. Samples are clamped to [-1, 1].
pub fn encode_wav_pcm16(buf: &AudioBuffer) -> Vec<u8> {
    let data_len = buf.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate().to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in buf.samples() {
        let v = (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
///
/// The kernel spans [`RESAMPLER_TAPS`] samples at the lower of the two rates,
/// and its cutoff sits at the lower Nyquist frequency, which makes it the
/// anti-alias filter when downsampling. Weights are renormalized per output
/// sample so DC passes unchanged.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::InvalidParameter("target rate must be positive".into()));
    }
    if buf.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let source_rate = buf.sample_rate();
    if source_rate == target_rate {
        return Ok(buf.clone());
    }
    let input = buf.samples();
    let ratio = source_rate as f64 / target_rate as f64;
    let out_len = (input.len() as f64 / ratio).round() as usize;
    // Cutoff relative to the input Nyquist.
    let cutoff = (1.0 / ratio).min(1.0);
    let half_width = RESAMPLER_TAPS as f64 / 2.0 / cutoff;
    let window_norm = bessel_i0(KAISER_BETA);

    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let t = j as f64 * ratio;
        let lo = (t - half_width).ceil().max(0.0) as usize;
        let hi = ((t + half_width).floor() as usize).min(input.len() - 1);
        let mut acc = 0.0;
        let mut weight_sum = 0.0;
        for (k, &x) in input.iter().enumerate().take(hi + 1).skip(lo) {
            let d = k as f64 - t;
            let r = d / half_width;
            let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / window_norm;
            let w = cutoff * sinc(cutoff * d) * window;
            acc += w * x;
            weight_sum += w;
        }
        out.push(if weight_sum.abs() > 1e-12 { acc / weight_sum } else { 0.0 });
    }
    AudioBuffer::new(out, target_rate)
}

/// Scales the buffer so its largest absolute sample equals `target_peak`.
pub fn normalize_peak(buf: &AudioBuffer, target_peak: f64) -> Result<AudioBuffer> {
    if !(target_peak > 0.0 && target_peak <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target peak {target_peak} outside (0, 1]"
        )));
    }
    let peak = buf.peak();
    if peak == 0.0 {
        return Err(Error::SilentInput);
    }
    let gain = target_peak / peak;
    let samples = buf.samples().iter().map(|s| s * gain).collect();
    AudioBuffer::new(samples, buf.sample_rate())
}

/// Cuts a `PART_SECONDS` excerpt starting at `start` seconds.
pub fn extract_part(buf: &AudioBuffer, start: f64, source_id: &str) -> Result<AudioPart> {
    if !(start >= 0.0) || !start.is_finite() {
        return Err(Error::InvalidParameter(format!("start {start} must be >= 0")));
    }
    let rate = buf.sample_rate();
    let len = part_len(rate);
    let offset = (start * rate as f64).round() as usize;
    if offset + len > buf.len() {
        return Err(Error::Range {
            start,
            end: start + PART_SECONDS as f64,
            available: buf.duration(),
        });
    }
    let samples = buf.samples()[offset..offset + len].to_vec();
    AudioPart::new(AudioBuffer::new(samples, rate)?, source_id, start)
}
