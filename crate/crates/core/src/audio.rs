//! WAV decoding, anti-aliased decimation and chunking.
//!
//! Input recordings are 16-bit PCM WAV. The pipeline decimates them by 5
//! (44.1 kHz -> 8.82 kHz) behind a windowed-sinc low-pass so that energy
//! above the new Nyquist does not fold back into the band the spectral
//! features are computed on.

use crate::error::{Error, Result};

/// Mono audio buffer with its sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    /// Amplitudes in [-1, 1] (16-bit PCM scaled by 1/32768).
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

/// Number of taps of the decimation low-pass.
pub const FIR_TAPS: usize = 64;

/// Cutoff of the decimation low-pass as a fraction of the post-decimation
/// Nyquist frequency.
pub const FIR_CUTOFF_RATIO: f64 = 0.8;

fn read_u32_le(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn read_u16_le(bytes: &[u8], at: usize) -> Option<u16> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
}

/// Decode a RIFF/WAVE byte stream into a mono clip.
///
/// Only 16-bit PCM with one or two channels is accepted; stereo inputs are
/// averaged to mono. Float and compressed encodings are rejected.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 {
        return Err(Error::Format("file too short for a RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("missing RIFF/WAVE signature".into()));
    }

    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;

    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32_le(bytes, pos + 4)
            .ok_or_else(|| Error::Format("truncated chunk header".into()))?
            as usize;
        let body_start = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body_start + 16 > bytes.len() {
                    return Err(Error::Format("fmt chunk too short".into()));
                }
                let format = read_u16_le(bytes, body_start).unwrap();
                let channels = read_u16_le(bytes, body_start + 2).unwrap();
                let rate = read_u32_le(bytes, body_start + 4).unwrap();
                let bits = read_u16_le(bytes, body_start + 14).unwrap();
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => {
                if body_start + size > bytes.len() {
                    return Err(Error::Format(format!(
                        "data chunk declares {size} bytes but only {} remain",
                        bytes.len() - body_start
                    )));
                }
                data = Some(&bytes[body_start..body_start + size]);
            }
            _ => {}
        }
        // chunk bodies are word-aligned
        pos = body_start + size + (size & 1);
    }

    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| Error::Format("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("missing data chunk".into()))?;

    if format != 1 {
        return Err(Error::Unsupported(format!(
            "WAV format code {format}; only PCM (1) is supported"
        )));
    }
    if bits != 16 {
        return Err(Error::Unsupported(format!(
            "{bits}-bit samples; only 16-bit PCM is supported"
        )));
    }
    if channels == 0 || channels > 2 {
        return Err(Error::Unsupported(format!(
            "{channels} channels; only mono or stereo is supported"
        )));
    }
    if rate == 0 {
        return Err(Error::Format("zero sample rate".into()));
    }

    let frame_bytes = 2 * channels as usize;
    if data.len() % frame_bytes != 0 {
        return Err(Error::Format(
            "data chunk size is not a whole number of sample frames".into(),
        ));
    }

    let n_frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut acc = 0.0f64;
        for c in 0..channels as usize {
            let at = f * frame_bytes + 2 * c;
            let v = i16::from_le_bytes([data[at], data[at + 1]]);
            acc += f64::from(v) / 32768.0;
        }
        samples.push(acc / f64::from(channels));
    }

    Ok(AudioClip {
        samples,
        sample_rate_hz: rate,
    })
}

/// Encode interleaved 16-bit PCM channels as a WAV byte stream.
///
/// Used by the fixture generator and by round-trip tests; all channels must
/// have the same length.
pub fn encode_wav_pcm16(channels: &[Vec<i16>], sample_rate_hz: u32) -> Result<Vec<u8>> {
    if channels.is_empty() || channels.len() > 2 {
        return Err(Error::Argument("need one or two channels".into()));
    }
    let n = channels[0].len();
    if channels.iter().any(|c| c.len() != n) {
        return Err(Error::Argument("channel lengths differ".into()));
    }

    let n_ch = channels.len() as u16;
    let data_len = (n * channels.len() * 2) as u32;
    let byte_rate = sample_rate_hz * u32::from(n_ch) * 2;
    let block_align = n_ch * 2;

    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&n_ch.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for f in 0..n {
        for ch in channels {
            out.extend_from_slice(&ch[f].to_le_bytes());
        }
    }
    Ok(out)
}

/// Anti-alias low-pass design ahead of decimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirDesign {
    /// Even tap count of the Hamming-windowed sinc.
    pub taps: usize,
    /// Cutoff as a fraction of the post-decimation Nyquist frequency.
    pub cutoff_ratio: f64,
}

impl Default for FirDesign {
    fn default() -> Self {
        Self {
            taps: FIR_TAPS,
            cutoff_ratio: FIR_CUTOFF_RATIO,
        }
    }
}

impl FirDesign {
    fn validate(&self) -> Result<()> {
        if self.taps < 2 || !self.taps.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "FIR tap count must be even and >= 2, got {}",
                self.taps
            )));
        }
        if !(self.cutoff_ratio > 0.0 && self.cutoff_ratio <= 1.0) {
            return Err(Error::Argument(format!(
                "FIR cutoff ratio must be in (0, 1], got {}",
                self.cutoff_ratio
            )));
        }
        Ok(())
    }
}

/// Hamming-windowed sinc low-pass coefficients for the default design.
pub fn anti_alias_fir(factor: usize) -> Vec<f64> {
    anti_alias_fir_with(factor, FirDesign::default())
}

/// Hamming-windowed sinc low-pass, cutoff `cutoff_ratio` x (new Nyquist),
/// normalized to unity DC gain so constant signals pass through unchanged.
pub fn anti_alias_fir_with(factor: usize, design: FirDesign) -> Vec<f64> {
    assert!(factor >= 1);
    design.validate().expect("invalid FIR design");
    let n_taps = design.taps;
    let cutoff = 0.5 * design.cutoff_ratio / factor as f64; // cycles per input sample
    let center = (n_taps as f64 - 1.0) / 2.0;
    let mut taps: Vec<f64> = (0..n_taps)
        .map(|m| {
            let t = m as f64 - center; // never 0 for even tap counts
            let sinc = (std::f64::consts::TAU * cutoff * t).sin() / (std::f64::consts::PI * t);
            let window =
                0.54 - 0.46 * (std::f64::consts::TAU * m as f64 / (n_taps as f64 - 1.0)).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Low-pass then keep every `factor`-th sample, using the default filter.
pub fn decimate(clip: &AudioClip, factor: usize) -> Result<AudioClip> {
    decimate_with(clip, factor, FirDesign::default())
}

/// Low-pass then keep every `factor`-th sample.
///
/// The convolution is zero-padded at the start (warm-up samples kept), so the
/// output has `ceil(len / factor)` samples at `sample_rate_hz / factor`.
pub fn decimate_with(clip: &AudioClip, factor: usize, design: FirDesign) -> Result<AudioClip> {
    if factor == 0 {
        return Err(Error::Argument("decimation factor must be >= 1".into()));
    }
    if clip.samples.is_empty() {
        return Err(Error::Argument("cannot decimate an empty clip".into()));
    }
    if !(clip.sample_rate_hz as usize).is_multiple_of(factor) {
        return Err(Error::Argument(format!(
            "sample rate {} is not divisible by factor {factor}",
            clip.sample_rate_hz
        )));
    }
    design.validate()?;

    let taps = anti_alias_fir_with(factor, design);
    let x = &clip.samples;
    let mut out = Vec::with_capacity(x.len().div_ceil(factor));
    let mut n = 0usize;
    while n < x.len() {
        let mut acc = 0.0;
        for (m, tap) in taps.iter().enumerate() {
            if m > n {
                break; // x is zero before the first sample
            }
            acc += tap * x[n - m];
        }
        out.push(acc);
        n += factor;
    }

    Ok(AudioClip {
        samples: out,
        sample_rate_hz: clip.sample_rate_hz / factor as u32,
    })
}

/// Split into consecutive non-overlapping chunks of exactly `chunk_len`
/// samples; the trailing remainder is discarded.
pub fn segment_chunks(clip: &AudioClip, chunk_len: usize) -> Vec<&[f64]> {
    assert!(chunk_len > 0, "chunk_len must be positive");
    clip.samples.chunks_exact(chunk_len).collect()
}
