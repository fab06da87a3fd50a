//! Occlusion maps, patient-level averaging and threshold weighting.
//!
//! An occlusion map scores how much each input region contributes to the
//! cough probability: a patch is replaced with a baseline value, the window
//! is re-scored, and the probability drop becomes the region's importance.
//! The coarse patch grid is resized back to the input resolution and min-max
//! normalized. Weighted spectrograms keep only cells whose map value exceeds
//! a threshold.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::cnn::Scorer;
use crate::error::{Error, Result};
use crate::matfile;
use crate::spectrogram::{Scale, SpectrogramMatrix};

/// Fill value used for an occluded patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Zero, the minimum of the normalized input range.
    Zero,
    /// The minimum value of the window being occluded.
    MapMin,
}

/// Occlusion geometry: patch size and stride in grid cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionConfig {
    pub patch_h: usize,
    pub patch_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub baseline: Baseline,
}

impl Default for OcclusionConfig {
    /// Non-overlapping 5x10 patches covering a 45x100 input with a 9x10 grid.
    fn default() -> Self {
        Self {
            patch_h: 5,
            patch_w: 10,
            stride_h: 5,
            stride_w: 10,
            baseline: Baseline::Zero,
        }
    }
}

impl OcclusionConfig {
    fn validate(&self, n_bins: usize, n_frames: usize) -> Result<()> {
        if self.patch_h == 0 || self.patch_h > n_bins {
            return Err(Error::Argument(format!(
                "patch_h {} outside 1..={n_bins}",
                self.patch_h
            )));
        }
        if self.patch_w == 0 || self.patch_w > n_frames {
            return Err(Error::Argument(format!(
                "patch_w {} outside 1..={n_frames}",
                self.patch_w
            )));
        }
        if self.stride_h == 0 || self.stride_w == 0 {
            return Err(Error::Argument("strides must be >= 1".into()));
        }
        Ok(())
    }
}

/// Importance values in [0, 1] on the same grid as the source spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionMap {
    values: Vec<f64>,
    n_bins: usize,
    n_frames: usize,
    sample_rate_hz: f64,
}

impl OcclusionMap {
    pub fn new(
        values: Vec<f64>,
        n_bins: usize,
        n_frames: usize,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        if values.len() != n_bins * n_frames {
            return Err(Error::Argument(format!(
                "expected {} values for a {}x{} map, got {}",
                n_bins * n_frames,
                n_bins,
                n_frames,
                values.len()
            )));
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("map value {v} outside [0, 1]")));
            }
        }
        Ok(Self {
            values,
            n_bins,
            n_frames,
            sample_rate_hz,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.values[k * self.n_frames + n]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        matfile::write_matrix(
            &mut out,
            self.n_bins,
            self.n_frames,
            self.sample_rate_hz,
            "map",
            &self.values,
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        let raw = matfile::read_matrix(&mut input)?;
        if raw.scale_tag != "map" {
            return Err(Error::Format(format!(
                "expected an occlusion map file, found scale=`{}`",
                raw.scale_tag
            )));
        }
        Self::new(raw.values, raw.n_bins, raw.n_frames, raw.sample_rate_hz)
    }
}

/// Raw (pre-resize, pre-normalization) per-patch importance values.
#[derive(Debug, Clone)]
pub struct ImportanceGrid {
    pub values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    /// Patch-center coordinates in input cells, used as resize anchors.
    pub row_centers: Vec<f64>,
    pub col_centers: Vec<f64>,
}

fn grid_positions(extent: usize, patch: usize, stride: usize) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut at = 0usize;
    while at < extent {
        spans.push((at, (at + patch).min(extent)));
        at += stride;
    }
    spans
}

fn occluded_score<S: Scorer + ?Sized>(
    scorer: &S,
    input: &SpectrogramMatrix,
    rows: (usize, usize),
    cols: (usize, usize),
    fill: f64,
) -> Result<f64> {
    let mut values = input.values().to_vec();
    for k in rows.0..rows.1 {
        for n in cols.0..cols.1 {
            values[k * input.n_frames() + n] = fill;
        }
    }
    let occluded = SpectrogramMatrix::new(
        values,
        input.n_bins(),
        input.n_frames(),
        input.sample_rate_hz(),
        input.scale(),
    )?;
    Ok(scorer.score(&occluded)?.p_cough)
}

/// Per-patch importance `max(0, p_orig - p_occluded)` on the stride grid.
pub fn occlusion_grid<S: Scorer + ?Sized>(
    scorer: &S,
    input: &SpectrogramMatrix,
    cfg: &OcclusionConfig,
) -> Result<ImportanceGrid> {
    occlusion_grid_threaded(scorer, input, cfg, 1)
}

/// Same as [`occlusion_grid`], evaluating patch positions on `threads`
/// workers. Output is bit-identical for any thread count: every grid cell is
/// computed independently and written to its own slot.
pub fn occlusion_grid_threaded<S: Scorer + ?Sized>(
    scorer: &S,
    input: &SpectrogramMatrix,
    cfg: &OcclusionConfig,
    threads: usize,
) -> Result<ImportanceGrid> {
    cfg.validate(input.n_bins(), input.n_frames())?;
    if input.scale() != Scale::LogNormalized {
        return Err(Error::Argument(
            "occlusion expects the log-normalized classifier input".into(),
        ));
    }

    let p_orig = scorer.score(input)?.p_cough;
    let fill = match cfg.baseline {
        Baseline::Zero => 0.0,
        Baseline::MapMin => input.values().iter().cloned().fold(f64::INFINITY, f64::min),
    };

    let row_spans = grid_positions(input.n_bins(), cfg.patch_h, cfg.stride_h);
    let col_spans = grid_positions(input.n_frames(), cfg.patch_w, cfg.stride_w);
    let positions: Vec<(usize, usize)> = (0..row_spans.len())
        .flat_map(|i| (0..col_spans.len()).map(move |j| (i, j)))
        .collect();

    let mut values = vec![0.0f64; positions.len()];
    let workers = threads.max(1).min(positions.len().max(1));
    if workers <= 1 {
        for (slot, &(i, j)) in values.iter_mut().zip(&positions) {
            let p = occluded_score(scorer, input, row_spans[i], col_spans[j], fill)?;
            *slot = (p_orig - p).max(0.0);
        }
    } else {
        let chunk = positions.len().div_ceil(workers);
        let row_spans_ref = &row_spans;
        let col_spans_ref = &col_spans;
        let results: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = positions
                .chunks(chunk)
                .map(|slab| {
                    scope.spawn(move || {
                        slab.iter()
                            .map(|&(i, j)| {
                                occluded_score(
                                    scorer,
                                    input,
                                    row_spans_ref[i],
                                    col_spans_ref[j],
                                    fill,
                                )
                                .map(|p| (p_orig - p).max(0.0))
                            })
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut at = 0usize;
        for slab in results {
            for v in slab? {
                values[at] = v;
                at += 1;
            }
        }
    }

    let center = |&(a, b): &(usize, usize)| (a + b - 1) as f64 / 2.0;
    Ok(ImportanceGrid {
        values,
        rows: row_spans.len(),
        cols: col_spans.len(),
        row_centers: row_spans.iter().map(center).collect(),
        col_centers: col_spans.iter().map(center).collect(),
    })
}

fn bracket(centers: &[f64], pos: f64) -> (usize, usize, f64) {
    if pos <= centers[0] || centers.len() == 1 {
        return (0, 0, 0.0);
    }
    let last = centers.len() - 1;
    if pos >= centers[last] {
        return (last, last, 0.0);
    }
    let mut i = 0;
    while centers[i + 1] < pos {
        i += 1;
    }
    let t = (pos - centers[i]) / (centers[i + 1] - centers[i]);
    (i, i + 1, t)
}

fn resize_bilinear(grid: &ImportanceGrid, out_rows: usize, out_cols: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; out_rows * out_cols];
    for y in 0..out_rows {
        let (r0, r1, ty) = bracket(&grid.row_centers, y as f64);
        for x in 0..out_cols {
            let (c0, c1, tx) = bracket(&grid.col_centers, x as f64);
            let g = |r: usize, c: usize| grid.values[r * grid.cols + c];
            let top = g(r0, c0) * (1.0 - tx) + g(r0, c1) * tx;
            let bottom = g(r1, c0) * (1.0 - tx) + g(r1, c1) * tx;
            out[y * out_cols + x] = top * (1.0 - ty) + bottom * ty;
        }
    }
    out
}

fn normalize_to_unit(values: &mut [f64]) {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        let span = max - min;
        for v in values.iter_mut() {
            *v = (*v - min) / span;
        }
    } else {
        for v in values.iter_mut() {
            *v = 0.0;
        }
    }
}

/// Occlusion map of one window: importance grid, bilinear resize to the
/// input dimensions, then min-max normalization to [0, 1]. A flat importance
/// grid yields an all-zero map.
pub fn occlusion_map<S: Scorer + ?Sized>(
    scorer: &S,
    input: &SpectrogramMatrix,
    cfg: &OcclusionConfig,
) -> Result<OcclusionMap> {
    occlusion_map_threaded(scorer, input, cfg, 1)
}

pub fn occlusion_map_threaded<S: Scorer + ?Sized>(
    scorer: &S,
    input: &SpectrogramMatrix,
    cfg: &OcclusionConfig,
    threads: usize,
) -> Result<OcclusionMap> {
    let grid = occlusion_grid_threaded(scorer, input, cfg, threads)?;
    let mut values = resize_bilinear(&grid, input.n_bins(), input.n_frames());
    normalize_to_unit(&mut values);
    OcclusionMap::new(
        values,
        input.n_bins(),
        input.n_frames(),
        input.sample_rate_hz(),
    )
}

/// Elementwise mean of occlusion maps with identical dimensions.
pub fn average_maps(maps: &[OcclusionMap]) -> Result<OcclusionMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::Argument("cannot average zero maps".into()))?;
    let mut acc = vec![0.0f64; first.values.len()];
    for map in maps {
        if map.n_bins != first.n_bins || map.n_frames != first.n_frames {
            return Err(Error::Argument(format!(
                "map dimensions {}x{} do not match {}x{}",
                map.n_bins, map.n_frames, first.n_bins, first.n_frames
            )));
        }
        for (a, v) in acc.iter_mut().zip(&map.values) {
            *a += v;
        }
    }
    let n = maps.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    OcclusionMap::new(acc, first.n_bins, first.n_frames, first.sample_rate_hz)
}

/// Elementwise mean of linear-power spectrograms.
pub fn average_spectrograms(specs: &[SpectrogramMatrix]) -> Result<SpectrogramMatrix> {
    let first = specs
        .first()
        .ok_or_else(|| Error::Argument("cannot average zero spectrograms".into()))?;
    let mut acc = vec![0.0f64; first.values().len()];
    for spec in specs {
        if spec.scale() != Scale::Linear {
            return Err(Error::Argument(
                "spectrogram averaging works in the linear power domain".into(),
            ));
        }
        if spec.n_bins() != first.n_bins() || spec.n_frames() != first.n_frames() {
            return Err(Error::Argument(format!(
                "spectrogram dimensions {}x{} do not match {}x{}",
                spec.n_bins(),
                spec.n_frames(),
                first.n_bins(),
                first.n_frames()
            )));
        }
        for (a, v) in acc.iter_mut().zip(spec.values()) {
            *a += v;
        }
    }
    let n = specs.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    SpectrogramMatrix::new(
        acc,
        first.n_bins(),
        first.n_frames(),
        first.sample_rate_hz(),
        Scale::Linear,
    )
}

/// How surviving cells are weighted when thresholding a spectrogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Multiply by the map value where it exceeds the threshold (default).
    MapValue,
    /// Keep the spectrogram value unchanged where the map exceeds the
    /// threshold.
    Indicator,
}

/// Threshold-weighted spectrogram: cells where `map > th` survive, the rest
/// become zero.
pub fn weight_spectrogram(
    s0: &SpectrogramMatrix,
    map: &OcclusionMap,
    th: f64,
    mode: WeightMode,
) -> Result<SpectrogramMatrix> {
    if s0.scale() != Scale::Linear {
        return Err(Error::Argument(
            "weighting expects a linear spectrogram".into(),
        ));
    }
    if s0.n_bins() != map.n_bins() || s0.n_frames() != map.n_frames() {
        return Err(Error::Argument(format!(
            "spectrogram {}x{} and map {}x{} dimensions differ",
            s0.n_bins(),
            s0.n_frames(),
            map.n_bins(),
            map.n_frames()
        )));
    }
    if !(0.0..=1.0).contains(&th) {
        return Err(Error::Argument(format!("threshold {th} outside [0, 1]")));
    }
    let values: Vec<f64> = s0
        .values()
        .iter()
        .zip(map.values())
        .map(|(&s, &m)| {
            if m > th {
                match mode {
                    WeightMode::MapValue => s * m,
                    WeightMode::Indicator => s,
                }
            } else {
                0.0
            }
        })
        .collect();
    SpectrogramMatrix::new(
        values,
        s0.n_bins(),
        s0.n_frames(),
        s0.sample_rate_hz(),
        Scale::Linear,
    )
}

/// Patient-level summary: averaged spectrogram and occlusion map over the
/// qualifying cough windows.
#[derive(Debug, Clone)]
pub struct PatientProfile {
    pub patient_id: String,
    pub avg_spectrogram: SpectrogramMatrix,
    pub avg_map: OcclusionMap,
    pub n_windows: usize,
}

impl PatientProfile {
    pub fn new(
        patient_id: String,
        avg_spectrogram: SpectrogramMatrix,
        avg_map: OcclusionMap,
        n_windows: usize,
    ) -> Result<Self> {
        if n_windows == 0 {
            return Err(Error::Argument(format!(
                "patient {patient_id} has no qualifying windows"
            )));
        }
        if avg_spectrogram.n_bins() != avg_map.n_bins()
            || avg_spectrogram.n_frames() != avg_map.n_frames()
        {
            return Err(Error::Argument(
                "profile spectrogram and map dimensions differ".into(),
            ));
        }
        Ok(Self {
            patient_id,
            avg_spectrogram,
            avg_map,
            n_windows,
        })
    }

    /// Build the profile from per-window artifacts.
    pub fn from_windows(
        patient_id: &str,
        specs: &[SpectrogramMatrix],
        maps: &[OcclusionMap],
    ) -> Result<Self> {
        if specs.len() != maps.len() {
            return Err(Error::Argument(format!(
                "patient {patient_id}: {} spectrograms but {} maps",
                specs.len(),
                maps.len()
            )));
        }
        Self::new(
            patient_id.to_string(),
            average_spectrograms(specs)?,
            average_maps(maps)?,
            specs.len(),
        )
    }
}
