//! Power spectrograms on the fixed 45x100 analysis grid.
//!
//! A 1-second chunk of 8900 samples at 8820 Hz is cut into 100 frames of 89
//! samples. Each frame is Hann-windowed and transformed with an 89-point DFT
//! into a one-sided PSD of 45 bins, so the frequency axis is
//! `f[k] = k * fs / (2*K + 1)` with `K = 44`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::matfile;

/// Highest frequency index of the pipeline grid.
pub const K_MAX: usize = 44;
/// Frequency bins per frame (K + 1).
pub const N_BINS: usize = K_MAX + 1;
/// Samples per analysis frame (2K + 1).
pub const FRAME_LEN: usize = 2 * K_MAX + 1;
/// Frames per spectrogram.
pub const N_FRAMES: usize = 100;
/// Samples per 1-second chunk.
pub const CHUNK_LEN: usize = FRAME_LEN * N_FRAMES;
/// Post-decimation sampling rate of the pipeline.
pub const PIPELINE_SAMPLE_RATE_HZ: f64 = 8820.0;
/// Floor added before taking logs during normalization.
pub const LOG_EPS: f64 = 1e-12;

/// Value domain of a spectrogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Nonnegative power values.
    Linear,
    /// `10*log10(power + eps)` min-max rescaled to [0, 1].
    LogNormalized,
}

impl Scale {
    pub fn tag(self) -> &'static str {
        match self {
            Scale::Linear => "linear",
            Scale::LogNormalized => "lognorm",
        }
    }
}

/// `(K+1) x N` grid of nonnegative values with its frequency axis.
///
/// Stored row-major by frequency index: `values[k * n_frames + n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramMatrix {
    values: Vec<f64>,
    n_bins: usize,
    n_frames: usize,
    sample_rate_hz: f64,
    scale: Scale,
}

impl SpectrogramMatrix {
    pub fn new(
        values: Vec<f64>,
        n_bins: usize,
        n_frames: usize,
        sample_rate_hz: f64,
        scale: Scale,
    ) -> Result<Self> {
        if n_bins == 0 || n_frames == 0 {
            return Err(Error::Argument(
                "spectrogram dimensions must be positive".into(),
            ));
        }
        if values.len() != n_bins * n_frames {
            return Err(Error::Argument(format!(
                "expected {} values for a {}x{} grid, got {}",
                n_bins * n_frames,
                n_bins,
                n_frames,
                values.len()
            )));
        }
        if sample_rate_hz.is_nan() || sample_rate_hz <= 0.0 {
            return Err(Error::Argument("sample rate must be positive".into()));
        }
        for &v in &values {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!(
                    "non-finite or negative cell {v}"
                )));
            }
            if scale == Scale::LogNormalized && v > 1.0 {
                return Err(Error::Validation(format!(
                    "log-normalized cell {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            values,
            n_bins,
            n_frames,
            sample_rate_hz,
            scale,
        })
    }

    pub fn zeros(n_bins: usize, n_frames: usize, sample_rate_hz: f64, scale: Scale) -> Self {
        Self {
            values: vec![0.0; n_bins * n_frames],
            n_bins,
            n_frames,
            sample_rate_hz,
            scale,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn k_max(&self) -> usize {
        self.n_bins - 1
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.values[k * self.n_frames + n]
    }

    /// Frequency of bin `k`: `k * fs / (2*k_max + 1)`.
    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz / (2 * self.k_max() + 1) as f64
    }

    /// Frequency of the highest bin.
    pub fn max_freq(&self) -> f64 {
        self.freq(self.k_max())
    }

    /// Total power of frame `n`.
    pub fn frame_sum(&self, n: usize) -> f64 {
        (0..self.n_bins).map(|k| self.get(k, n)).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        matfile::write_matrix(
            &mut out,
            self.n_bins,
            self.n_frames,
            self.sample_rate_hz,
            self.scale.tag(),
            &self.values,
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        let raw = matfile::read_matrix(&mut input)?;
        let scale = match raw.scale_tag.as_str() {
            "linear" => Scale::Linear,
            "lognorm" => Scale::LogNormalized,
            other => {
                return Err(Error::Format(format!(
                    "expected a spectrogram file, found scale=`{other}`"
                )))
            }
        };
        Self::new(
            raw.values,
            raw.n_bins,
            raw.n_frames,
            raw.sample_rate_hz,
            scale,
        )
    }
}

/// Symmetric Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|m| 0.5 * (1.0 - (std::f64::consts::TAU * m as f64 / (len as f64 - 1.0)).cos()))
        .collect()
}

struct FrameTables {
    window: Vec<f64>,
    window_energy: f64,
    cos_lut: Vec<f64>,
    sin_lut: Vec<f64>,
}

fn frame_tables() -> &'static FrameTables {
    static TABLES: OnceLock<FrameTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let window = hann_window(FRAME_LEN);
        let window_energy = window.iter().map(|w| w * w).sum();
        let cos_lut = (0..FRAME_LEN)
            .map(|r| (std::f64::consts::TAU * r as f64 / FRAME_LEN as f64).cos())
            .collect();
        let sin_lut = (0..FRAME_LEN)
            .map(|r| (std::f64::consts::TAU * r as f64 / FRAME_LEN as f64).sin())
            .collect();
        FrameTables {
            window,
            window_energy,
            cos_lut,
            sin_lut,
        }
    })
}

/// One-sided PSD of one Hann-windowed 89-sample frame.
///
/// Bin 0 carries the DC power, bins 1..=44 are doubled (an odd-length DFT has
/// no Nyquist bin). The output is normalized so that its sum equals the
/// windowed-frame power `sum(w^2 x^2) / U` with `U = sum(w^2)`.
pub fn frame_psd(frame: &[f64]) -> Result<Vec<f64>> {
    if frame.len() != FRAME_LEN {
        return Err(Error::Argument(format!(
            "frame must have {FRAME_LEN} samples, got {}",
            frame.len()
        )));
    }
    let tables = frame_tables();
    let mut windowed = [0.0f64; FRAME_LEN];
    for (m, (x, w)) in frame.iter().zip(&tables.window).enumerate() {
        windowed[m] = x * w;
    }

    let norm = 1.0 / (FRAME_LEN as f64 * tables.window_energy);
    let mut psd = Vec::with_capacity(N_BINS);
    for k in 0..N_BINS {
        let mut re = 0.0;
        let mut im = 0.0;
        for (m, &v) in windowed.iter().enumerate() {
            let r = (k * m) % FRAME_LEN;
            re += v * tables.cos_lut[r];
            im -= v * tables.sin_lut[r];
        }
        let power = (re * re + im * im) * norm;
        psd.push(if k == 0 { power } else { 2.0 * power });
    }
    Ok(psd)
}

/// 45x100 linear-power spectrogram of one 8900-sample chunk.
///
/// Column `n` is the PSD of samples `89n..89n+89`; frames do not overlap.
pub fn compute_spectrogram(chunk: &[f64], sample_rate_hz: f64) -> Result<SpectrogramMatrix> {
    if chunk.len() != CHUNK_LEN {
        return Err(Error::Argument(format!(
            "chunk must have {CHUNK_LEN} samples, got {}",
            chunk.len()
        )));
    }
    let mut values = vec![0.0f64; N_BINS * N_FRAMES];
    for (n, frame) in chunk.chunks_exact(FRAME_LEN).enumerate() {
        let psd = frame_psd(frame)?;
        for (k, &p) in psd.iter().enumerate() {
            values[k * N_FRAMES + n] = p;
        }
    }
    SpectrogramMatrix::new(values, N_BINS, N_FRAMES, sample_rate_hz, Scale::Linear)
}

/// `10*log10(S + eps)` followed by a per-spectrogram min-max rescale to
/// [0, 1]. A constant input maps to all zeros.
pub fn log_normalize(spec: &SpectrogramMatrix) -> Result<SpectrogramMatrix> {
    if spec.scale() != Scale::Linear {
        return Err(Error::Argument(
            "log_normalize expects a linear spectrogram".into(),
        ));
    }
    let log_values: Vec<f64> = spec
        .values()
        .iter()
        .map(|&v| 10.0 * (v + LOG_EPS).log10())
        .collect();
    let min = log_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = log_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let values = if max > min {
        let span = max - min;
        log_values.iter().map(|&v| (v - min) / span).collect()
    } else {
        vec![0.0; log_values.len()]
    };
    SpectrogramMatrix::new(
        values,
        spec.n_bins(),
        spec.n_frames(),
        spec.sample_rate_hz(),
        Scale::LogNormalized,
    )
}
