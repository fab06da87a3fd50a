//! The seven spectral features computed from (weighted) spectrograms.
//!
//! All per-frame quantities are averaged over frames. Heavily thresholded
//! weighted spectrograms routinely contain frames with zero total power;
//! those are skipped (and the average renormalized) or treated as an error,
//! depending on [`ZeroFramePolicy`].

use crate::error::{Error, Result};
use crate::spectrogram::SpectrogramMatrix;

/// What to do with frames whose total power is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroFramePolicy {
    /// Drop the frame and average over the remaining valid frames.
    SkipFrame,
    /// Report a degenerate-input error on the first zero frame.
    Error,
}

/// Which reading of the Renyi entropy to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenyiForm {
    /// Standard order-q Renyi entropy of the per-frame normalized spectrum:
    /// `(1/(1-q)) * ln(sum p^q)`. Scale-invariant; the default.
    Normalized,
    /// `(1/(1-q)) * (ln sum S)^q` without normalization, kept for
    /// comparison.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub renyi_q: f64,
    pub rolloff_fraction: f64,
    /// Floor added inside the flatness logs only.
    pub eps: f64,
    pub zero_frame_policy: ZeroFramePolicy,
    pub renyi_form: RenyiForm,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            renyi_q: 4.0,
            rolloff_fraction: 0.85,
            eps: 1e-12,
            zero_frame_policy: ZeroFramePolicy::SkipFrame,
            renyi_form: RenyiForm::Normalized,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.renyi_q.is_nan() || self.renyi_q <= 0.0 || self.renyi_q == 1.0 {
            return Err(Error::Argument(format!(
                "renyi_q must be positive and != 1, got {}",
                self.renyi_q
            )));
        }
        if self.rolloff_fraction.is_nan()
            || self.rolloff_fraction <= 0.0
            || self.rolloff_fraction >= 1.0
        {
            return Err(Error::Argument(format!(
                "rolloff_fraction must be in (0, 1), got {}",
                self.rolloff_fraction
            )));
        }
        if self.eps.is_nan() || self.eps < 0.0 {
            return Err(Error::Argument("eps must be nonnegative".into()));
        }
        Ok(())
    }
}

/// The seven scalar features of one (weighted) spectrogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFeatures {
    /// Relative AC power, in [0, 1].
    pub ac: f64,
    /// Spectral bandwidth (Hz^2).
    pub sp_bw: f64,
    /// Spectral crest factor (dimensionless).
    pub sp_cf: f64,
    /// Spectral flatness, in (0, 1].
    pub sp_f: f64,
    /// Spectral flux (signed power change per frame step).
    pub sp_fx: f64,
    /// Spectral Renyi entropy (nats).
    pub sp_re: f64,
    /// Spectral roll-off frequency (Hz).
    pub sp_r: f64,
}

/// Feature names in canonical column order.
pub const FEATURE_NAMES: [&str; 7] = ["ac", "sp_bw", "sp_cf", "sp_f", "sp_fx", "sp_re", "sp_r"];

impl SpectralFeatures {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.ac, self.sp_bw, self.sp_cf, self.sp_f, self.sp_fx, self.sp_re, self.sp_r,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.as_array()[i])
    }
}

/// Frames with positive total power, or an error per the policy.
fn valid_frames(s: &SpectrogramMatrix, policy: ZeroFramePolicy) -> Result<Vec<usize>> {
    let mut frames = Vec::with_capacity(s.n_frames());
    for n in 0..s.n_frames() {
        if s.frame_sum(n) > 0.0 {
            frames.push(n);
        } else if policy == ZeroFramePolicy::Error {
            return Err(Error::Degenerate(format!("frame {n} has zero total power")));
        }
    }
    if frames.is_empty() {
        return Err(Error::Degenerate("all frames have zero total power".into()));
    }
    Ok(frames)
}

fn frame_average(
    s: &SpectrogramMatrix,
    policy: ZeroFramePolicy,
    mut per_frame: impl FnMut(usize) -> f64,
) -> Result<f64> {
    let frames = valid_frames(s, policy)?;
    let sum: f64 = frames.iter().map(|&n| per_frame(n)).sum();
    Ok(sum / frames.len() as f64)
}

/// Mean over frames of (non-DC power) / (total power).
pub fn relative_ac_power(s: &SpectrogramMatrix, cfg: &FeatureConfig) -> Result<f64> {
    frame_average(s, cfg.zero_frame_policy, |n| {
        let total = s.frame_sum(n);
        let ac: f64 = (1..s.n_bins()).map(|k| s.get(k, n)).sum();
        ac / total
    })
}

/// Power-weighted mean frequency of frame `n`.
pub fn spectral_centroid_frame(s: &SpectrogramMatrix, n: usize) -> Result<f64> {
    if n >= s.n_frames() {
        return Err(Error::Argument(format!(
            "frame {n} outside 0..{}",
            s.n_frames()
        )));
    }
    let total = s.frame_sum(n);
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Degenerate(format!("frame {n} has zero total power")));
    }
    let weighted: f64 = (0..s.n_bins()).map(|k| s.freq(k) * s.get(k, n)).sum();
    Ok(weighted / total)
}

/// Mean over frames of the power-weighted variance around the centroid.
pub fn spectral_bandwidth(s: &SpectrogramMatrix, cfg: &FeatureConfig) -> Result<f64> {
    frame_average(s, cfg.zero_frame_policy, |n| {
        let total = s.frame_sum(n);
        let centroid = (0..s.n_bins())
            .map(|k| s.freq(k) * s.get(k, n))
            .sum::<f64>()
            / total;
        let spread: f64 = (0..s.n_bins())
            .map(|k| {
                let d = s.freq(k) - centroid;
                d * d * s.get(k, n)
            })
            .sum();
        spread / total
    })
}

/// Mean over frames of `max_k S / (C * sum_k S)` with
/// `C = 1 / (max f - min f + 1)`.
pub fn spectral_crest(s: &SpectrogramMatrix, cfg: &FeatureConfig) -> Result<f64> {
    let c = 1.0 / (s.max_freq() - s.freq(0) + 1.0);
    frame_average(s, cfg.zero_frame_policy, |n| {
        let total = s.frame_sum(n);
        let peak = (0..s.n_bins())
            .map(|k| s.get(k, n))
            .fold(f64::NEG_INFINITY, f64::max);
        peak / (c * total)
    })
}

/// Mean over frames of the geometric-to-arithmetic mean ratio, with `eps`
/// guarding the logs.
pub fn spectral_flatness(s: &SpectrogramMatrix, cfg: &FeatureConfig) -> Result<f64> {
    let bins = s.n_bins() as f64;
    frame_average(s, cfg.zero_frame_policy, |n| {
        let mut log_sum = 0.0;
        let mut lin_sum = 0.0;
        for k in 0..s.n_bins() {
            let v = s.get(k, n) + cfg.eps;
            log_sum += v.ln();
            lin_sum += v;
        }
        (log_sum / bins).exp() / (lin_sum / bins)
    })
}

/// `(1/(N-1)) * sum_n sum_k (S[k,n] - S[k,n-1])` — signed differences, as
/// defined. By telescoping this equals the mean per-step change between the
/// last and first frames.
pub fn spectral_flux(s: &SpectrogramMatrix) -> Result<f64> {
    let n_frames = s.n_frames();
    if n_frames < 2 {
        return Err(Error::Argument(
            "spectral flux needs at least two frames".into(),
        ));
    }
    let mut total = 0.0;
    for n in 1..n_frames {
        for k in 0..s.n_bins() {
            total += s.get(k, n) - s.get(k, n - 1);
        }
    }
    Ok(total / (n_frames - 1) as f64)
}

/// Mean over frames of the Renyi entropy in the configured form.
pub fn renyi_entropy(s: &SpectrogramMatrix, cfg: &FeatureConfig) -> Result<f64> {
    cfg.validate()?;
    let q = cfg.renyi_q;
    match cfg.renyi_form {
        RenyiForm::Normalized => frame_average(s, cfg.zero_frame_policy, |n| {
            let total = s.frame_sum(n);
            let sum_pq: f64 = (0..s.n_bins()).map(|k| (s.get(k, n) / total).powf(q)).sum();
            sum_pq.ln() / (1.0 - q)
        }),
        RenyiForm::Literal => frame_average(s, cfg.zero_frame_policy, |n| {
            s.frame_sum(n).ln().powf(q) / (1.0 - q)
        }),
    }
}

/// Mean over frames of `f[k85]` where `k85` is the smallest bin index whose
/// cumulative power reaches the configured fraction of the frame total.
pub fn spectral_rolloff(s: &SpectrogramMatrix, cfg: &FeatureConfig) -> Result<f64> {
    cfg.validate()?;
    frame_average(s, cfg.zero_frame_policy, |n| {
        let target = cfg.rolloff_fraction * s.frame_sum(n);
        let mut cumulative = 0.0;
        for k in 0..s.n_bins() {
            cumulative += s.get(k, n);
            if cumulative >= target {
                return s.freq(k);
            }
        }
        s.max_freq() // unreachable for finite sums; rounding safety
    })
}

/// All seven features with a shared zero-frame policy.
pub fn extract_features(s: &SpectrogramMatrix, cfg: &FeatureConfig) -> Result<SpectralFeatures> {
    cfg.validate()?;
    Ok(SpectralFeatures {
        ac: relative_ac_power(s, cfg)?,
        sp_bw: spectral_bandwidth(s, cfg)?,
        sp_cf: spectral_crest(s, cfg)?,
        sp_f: spectral_flatness(s, cfg)?,
        sp_fx: spectral_flux(s)?,
        sp_re: renyi_entropy(s, cfg)?,
        sp_r: spectral_rolloff(s, cfg)?,
    })
}
