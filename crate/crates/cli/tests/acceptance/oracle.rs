//! Independent direct-summation oracles for the seven spectral features.
//!
//! Everything here is computed straight from the defining formulas on a
//! frame-major copy of the matrix, deliberately sharing no code with the
//! library implementation.

/// Frame-major view: `frames[n][k]`, plus the frequency axis.
pub struct OracleMatrix {
    pub frames: Vec<Vec<f64>>,
    pub freqs: Vec<f64>,
}

impl OracleMatrix {
    /// Build from bin-major values (`values[k * n_frames + n]`).
    pub fn from_bin_major(values: &[f64], n_bins: usize, n_frames: usize, fs: f64) -> Self {
        let frames = (0..n_frames)
            .map(|n| (0..n_bins).map(|k| values[k * n_frames + n]).collect())
            .collect();
        let freqs = (0..n_bins)
            .map(|k| k as f64 * fs / (2 * (n_bins - 1) + 1) as f64)
            .collect();
        Self { frames, freqs }
    }

    fn frame_total(&self, n: usize) -> f64 {
        self.frames[n].iter().sum()
    }

    fn valid(&self) -> Vec<usize> {
        (0..self.frames.len())
            .filter(|&n| self.frame_total(n) > 0.0)
            .collect()
    }

    fn mean_over_valid(&self, f: impl Fn(usize) -> f64) -> f64 {
        let valid = self.valid();
        valid.iter().map(|&n| f(n)).sum::<f64>() / valid.len() as f64
    }

    pub fn ac(&self) -> f64 {
        self.mean_over_valid(|n| {
            let total = self.frame_total(n);
            let ac: f64 = self.frames[n][1..].iter().sum();
            ac / total
        })
    }

    fn centroid(&self, n: usize) -> f64 {
        let num: f64 = self.frames[n]
            .iter()
            .zip(&self.freqs)
            .map(|(s, f)| f * s)
            .sum();
        num / self.frame_total(n)
    }

    pub fn bandwidth(&self) -> f64 {
        self.mean_over_valid(|n| {
            let c = self.centroid(n);
            let num: f64 = self.frames[n]
                .iter()
                .zip(&self.freqs)
                .map(|(s, f)| (f - c) * (f - c) * s)
                .sum();
            num / self.frame_total(n)
        })
    }

    pub fn crest(&self) -> f64 {
        let c = 1.0 / (self.freqs[self.freqs.len() - 1] - self.freqs[0] + 1.0);
        self.mean_over_valid(|n| {
            let peak = self.frames[n]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            peak / (c * self.frame_total(n))
        })
    }

    pub fn flatness(&self, eps: f64) -> f64 {
        let bins = self.freqs.len() as f64;
        self.mean_over_valid(|n| {
            let log_mean: f64 = self.frames[n].iter().map(|s| (s + eps).ln()).sum::<f64>() / bins;
            let lin_mean: f64 = self.frames[n].iter().map(|s| s + eps).sum::<f64>() / bins;
            log_mean.exp() / lin_mean
        })
    }

    pub fn flux(&self) -> f64 {
        let n_frames = self.frames.len();
        let mut total = 0.0;
        for n in 1..n_frames {
            for k in 0..self.freqs.len() {
                total += self.frames[n][k] - self.frames[n - 1][k];
            }
        }
        total / (n_frames as f64 - 1.0)
    }

    pub fn renyi(&self, q: f64) -> f64 {
        self.mean_over_valid(|n| {
            let total = self.frame_total(n);
            let sum_pq: f64 = self.frames[n].iter().map(|s| (s / total).powf(q)).sum();
            sum_pq.ln() / (1.0 - q)
        })
    }

    pub fn rolloff(&self, fraction: f64) -> f64 {
        self.mean_over_valid(|n| {
            let target = fraction * self.frame_total(n);
            let mut acc = 0.0;
            for (k, s) in self.frames[n].iter().enumerate() {
                acc += s;
                if acc >= target {
                    return self.freqs[k];
                }
            }
            self.freqs[self.freqs.len() - 1]
        })
    }
}
