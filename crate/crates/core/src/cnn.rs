//! CNN forward inference and the CNNW weight-file format.
//!
//! Only inference is implemented: Dropout layers are identities, Conv2D uses
//! 'same' zero padding (bottom/right for the even 2x2 kernel), MaxPool2D is
//! 2x2 stride 2 with floor division on odd dimensions. The validated stack is
//! Conv(32)-Pool-Drop-Conv(64)-Pool-Drop-Conv(128)-Drop-Conv(256)-Pool-
//! Flatten-Dense(512,ReLU)-Dense(2)-Softmax over a 45x100x1 input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectrogram::{Scale, SpectrogramMatrix, N_BINS, N_FRAMES, PIPELINE_SAMPLE_RATE_HZ};

/// Kernel height/width of every convolution.
pub const KERNEL: usize = 2;
/// Pool height/width and stride of every max-pooling layer.
pub const POOL: usize = 2;
/// Default gain of the band-energy reference scorer.
///
/// Sized so that a log-normalized noise floor (which min-max normalization
/// places around 0.3-0.4 of the unit range) stays well below a 0.9
/// confidence threshold, while windows with most in-band cells hot score
/// above it.
pub const DEFAULT_BAND_GAIN: f64 = 4.5;

const MAGIC: &[u8; 4] = b"CNNW";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
}

/// One layer of the network, inference parameters only.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Conv2D {
        out_channels: usize,
        activation: Activation,
    },
    MaxPool2D,
    /// Rate is recorded for round-tripping but ignored at inference.
    Dropout {
        rate: f32,
    },
    Flatten,
    Dense {
        out_units: usize,
        activation: Activation,
    },
    Softmax,
}

impl LayerKind {
    fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv2D { .. } => "Conv2D",
            LayerKind::MaxPool2D => "MaxPool2D",
            LayerKind::Dropout { .. } => "Dropout",
            LayerKind::Flatten => "Flatten",
            LayerKind::Dense { .. } => "Dense",
            LayerKind::Softmax => "Softmax",
        }
    }
}

/// Weight tensors of one layer; empty for weightless layers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerWeights {
    /// Conv2D: `out x in x 2 x 2` in (out, in, h, w) order. Dense: row-major
    /// `out x in`.
    pub kernel: Vec<f32>,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Spatial { h: usize, w: usize, c: usize },
    Flat(usize),
}

/// Loaded network: layer descriptors plus their weights, validated against a
/// fixed input size.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    layers: Vec<LayerKind>,
    weights: Vec<LayerWeights>,
    input_h: usize,
    input_w: usize,
}

/// Cough / non-cough probabilities (softmax output, index 0 = cough).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScore {
    pub p_cough: f64,
    pub p_noncough: f64,
}

/// Anything that can score a spectrogram window.
pub trait Scorer: Sync {
    fn score(&self, input: &SpectrogramMatrix) -> Result<ClassScore>;
}

/// Expected weight counts per layer for the given input, or the validation
/// error naming the offending layer.
fn infer_shapes(
    layers: &[LayerKind],
    input_h: usize,
    input_w: usize,
) -> Result<Vec<(Shape, usize, usize)>> {
    if layers.is_empty() {
        return Err(Error::Validation("model has no layers".into()));
    }
    let mut shape = Shape::Spatial {
        h: input_h,
        w: input_w,
        c: 1,
    };
    let mut out = Vec::with_capacity(layers.len());
    let mut seen_flatten = false;
    for (idx, layer) in layers.iter().enumerate() {
        let fail =
            |msg: String| Error::Validation(format!("layer {idx} ({}): {msg}", layer.name()));
        let (kernel_len, bias_len) = match (layer, shape) {
            (LayerKind::Conv2D { out_channels, .. }, Shape::Spatial { h, w, c }) => {
                if *out_channels == 0 {
                    return Err(fail("zero output channels".into()));
                }
                shape = Shape::Spatial {
                    h,
                    w,
                    c: *out_channels,
                };
                (out_channels * c * KERNEL * KERNEL, *out_channels)
            }
            (LayerKind::MaxPool2D, Shape::Spatial { h, w, c }) => {
                if h < POOL || w < POOL {
                    return Err(fail(format!("cannot pool a {h}x{w} map")));
                }
                shape = Shape::Spatial {
                    h: h / POOL,
                    w: w / POOL,
                    c,
                };
                (0, 0)
            }
            (LayerKind::Dropout { .. }, _) => (0, 0),
            (LayerKind::Flatten, Shape::Spatial { h, w, c }) => {
                if seen_flatten {
                    return Err(fail("second Flatten".into()));
                }
                seen_flatten = true;
                shape = Shape::Flat(h * w * c);
                (0, 0)
            }
            (LayerKind::Flatten, Shape::Flat(_)) => {
                return Err(fail("input is already flat".into()))
            }
            (LayerKind::Dense { out_units, .. }, Shape::Flat(d)) => {
                if *out_units == 0 {
                    return Err(fail("zero output units".into()));
                }
                shape = Shape::Flat(*out_units);
                (out_units * d, *out_units)
            }
            (LayerKind::Dense { .. }, Shape::Spatial { .. }) => {
                return Err(fail("Dense before Flatten".into()))
            }
            (LayerKind::Softmax, Shape::Flat(d)) => {
                if idx != layers.len() - 1 {
                    return Err(fail("Softmax must be the final layer".into()));
                }
                shape = Shape::Flat(d);
                (0, 0)
            }
            (LayerKind::Softmax, Shape::Spatial { .. }) => {
                return Err(fail("Softmax before Flatten".into()))
            }
            (_, Shape::Flat(_)) => return Err(fail("spatial layer after Flatten".into())),
        };
        out.push((shape, kernel_len, bias_len));
    }

    // classification head: Dense(2) followed by Softmax
    let n = layers.len();
    if !matches!(layers[n - 1], LayerKind::Softmax) {
        return Err(Error::Validation("final layer must be Softmax".into()));
    }
    match layers.get(n.wrapping_sub(2)) {
        Some(LayerKind::Dense { out_units: 2, .. }) => {}
        _ => {
            return Err(Error::Validation(
                "Softmax must follow a Dense layer with 2 units".into(),
            ))
        }
    }
    Ok(out)
}

impl ClassifierModel {
    /// Assemble and validate a model for a fixed input size.
    pub fn new(
        layers: Vec<LayerKind>,
        weights: Vec<LayerWeights>,
        input_h: usize,
        input_w: usize,
    ) -> Result<Self> {
        if layers.len() != weights.len() {
            return Err(Error::Validation(format!(
                "{} layers but {} weight entries",
                layers.len(),
                weights.len()
            )));
        }
        let shapes = infer_shapes(&layers, input_h, input_w)?;
        for (idx, ((_, kernel_len, bias_len), w)) in shapes.iter().zip(&weights).enumerate() {
            if w.kernel.len() != *kernel_len || w.bias.len() != *bias_len {
                return Err(Error::Validation(format!(
                    "layer {idx} ({}): expected {kernel_len}+{bias_len} weights, got {}+{}",
                    layers[idx].name(),
                    w.kernel.len(),
                    w.bias.len()
                )));
            }
            if w.kernel.iter().chain(&w.bias).any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "layer {idx} ({}): non-finite weight",
                    layers[idx].name()
                )));
            }
        }
        Ok(Self {
            layers,
            weights,
            input_h,
            input_w,
        })
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.input_h, self.input_w)
    }

    /// Deterministic forward pass. Dropout layers are identities; the result
    /// is the softmax over the final two logits.
    pub fn forward(&self, input: &SpectrogramMatrix) -> Result<ClassScore> {
        if input.n_bins() != self.input_h || input.n_frames() != self.input_w {
            return Err(Error::Validation(format!(
                "model expects a {}x{} input, got {}x{}",
                self.input_h,
                self.input_w,
                input.n_bins(),
                input.n_frames()
            )));
        }
        if input.scale() != Scale::LogNormalized {
            return Err(Error::Validation(
                "model input must be a log-normalized spectrogram".into(),
            ));
        }

        // activations in (h, w, c) layout, accumulated in f64; the input's
        // bin-major layout is already (h, w) row-major with c = 1
        let mut h = self.input_h;
        let mut w = self.input_w;
        let mut c = 1usize;
        let mut act: Vec<f64> = input.values().to_vec();
        let mut flat = false;

        for (layer, lw) in self.layers.iter().zip(&self.weights) {
            match layer {
                LayerKind::Conv2D {
                    out_channels,
                    activation,
                } => {
                    act = conv2d_same(&act, h, w, c, *out_channels, &lw.kernel, &lw.bias);
                    c = *out_channels;
                    if *activation == Activation::Relu {
                        relu(&mut act);
                    }
                }
                LayerKind::MaxPool2D => {
                    act = maxpool2(&act, h, w, c);
                    h /= POOL;
                    w /= POOL;
                }
                LayerKind::Dropout { .. } => {}
                LayerKind::Flatten => {
                    flat = true; // (h, w, c) layout is already row-major
                }
                LayerKind::Dense {
                    out_units,
                    activation,
                } => {
                    debug_assert!(flat);
                    act = dense(&act, *out_units, &lw.kernel, &lw.bias);
                    if *activation == Activation::Relu {
                        relu(&mut act);
                    }
                }
                LayerKind::Softmax => softmax(&mut act),
            }
        }

        if act.len() != 2 {
            return Err(Error::Validation(format!(
                "expected 2 output probabilities, got {}",
                act.len()
            )));
        }
        Ok(ClassScore {
            p_cough: act[0],
            p_noncough: act[1],
        })
    }
}

impl Scorer for ClassifierModel {
    fn score(&self, input: &SpectrogramMatrix) -> Result<ClassScore> {
        self.forward(input)
    }
}

fn conv2d_same(
    input: &[f64],
    h: usize,
    w: usize,
    in_c: usize,
    out_c: usize,
    kernel: &[f32],
    bias: &[f32],
) -> Vec<f64> {
    let mut out = vec![0.0f64; h * w * out_c];
    for y in 0..h {
        for x in 0..w {
            for oc in 0..out_c {
                let mut acc = f64::from(bias[oc]);
                for ic in 0..in_c {
                    for dy in 0..KERNEL {
                        let yy = y + dy;
                        if yy >= h {
                            continue; // zero padding below
                        }
                        for dx in 0..KERNEL {
                            let xx = x + dx;
                            if xx >= w {
                                continue; // zero padding to the right
                            }
                            let k = kernel[((oc * in_c + ic) * KERNEL + dy) * KERNEL + dx];
                            acc += f64::from(k) * input[(yy * w + xx) * in_c + ic];
                        }
                    }
                }
                out[(y * w + x) * out_c + oc] = acc;
            }
        }
    }
    out
}

fn maxpool2(input: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let oh = h / POOL;
    let ow = w / POOL;
    let mut out = vec![0.0f64; oh * ow * c];
    for y in 0..oh {
        for x in 0..ow {
            for ch in 0..c {
                let mut best = f64::NEG_INFINITY;
                for dy in 0..POOL {
                    for dx in 0..POOL {
                        let v = input[((y * POOL + dy) * w + (x * POOL + dx)) * c + ch];
                        if v > best {
                            best = v;
                        }
                    }
                }
                out[(y * ow + x) * c + ch] = best;
            }
        }
    }
    out
}

fn dense(input: &[f64], out_units: usize, weights: &[f32], bias: &[f32]) -> Vec<f64> {
    let in_d = input.len();
    (0..out_units)
        .map(|o| {
            let mut acc = f64::from(bias[o]);
            let row = &weights[o * in_d..(o + 1) * in_d];
            for (x, k) in input.iter().zip(row) {
                acc += f64::from(*k) * x;
            }
            acc
        })
        .collect()
}

fn relu(values: &mut [f64]) {
    for v in values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn softmax(values: &mut [f64]) {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values {
        *v /= sum;
    }
}

/// Indices of windows scored strictly above `confidence`.
pub fn classify_windows<S: Scorer + ?Sized>(
    scorer: &S,
    specs: &[SpectrogramMatrix],
    confidence: f64,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&confidence) {
        return Err(Error::Argument(format!(
            "confidence {confidence} outside [0, 1]"
        )));
    }
    let mut hits = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        if scorer.score(spec)?.p_cough > confidence {
            hits.push(i);
        }
    }
    Ok(hits)
}

/// Test-double scorer: `p_cough = logistic(gain * mean in-band value)`.
///
/// Depends only on cells whose frequency falls inside the band, which makes
/// occlusion behavior analytically predictable.
#[derive(Debug, Clone)]
pub struct BandEnergyScorer {
    band_lo_hz: f64,
    band_hi_hz: f64,
    gain: f64,
}

impl BandEnergyScorer {
    pub fn new(band_lo_hz: f64, band_hi_hz: f64, max_freq_hz: f64) -> Result<Self> {
        if !(band_lo_hz >= 0.0 && band_lo_hz < band_hi_hz && band_hi_hz <= max_freq_hz) {
            return Err(Error::Argument(format!(
                "band [{band_lo_hz}, {band_hi_hz}] must satisfy 0 <= lo < hi <= {max_freq_hz}"
            )));
        }
        Ok(Self {
            band_lo_hz,
            band_hi_hz,
            gain: DEFAULT_BAND_GAIN,
        })
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn band(&self) -> (f64, f64) {
        (self.band_lo_hz, self.band_hi_hz)
    }
}

impl Scorer for BandEnergyScorer {
    fn score(&self, input: &SpectrogramMatrix) -> Result<ClassScore> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for k in 0..input.n_bins() {
            let f = input.freq(k);
            if f < self.band_lo_hz || f > self.band_hi_hz {
                continue;
            }
            for n in 0..input.n_frames() {
                sum += input.get(k, n);
                count += 1;
            }
        }
        let mean = if count == 0 { 0.0 } else { sum / count as f64 };
        let p = 1.0 / (1.0 + (-self.gain * mean).exp());
        Ok(ClassScore {
            p_cough: p,
            p_noncough: 1.0 - p,
        })
    }
}

/// Band-energy scorer validated against the pipeline frequency axis.
pub fn reference_classifier(band_lo_hz: f64, band_hi_hz: f64) -> Result<BandEnergyScorer> {
    let max_freq = K_MAX_FREQ;
    BandEnergyScorer::new(band_lo_hz, band_hi_hz, max_freq)
}

/// Frequency of the highest pipeline bin, `f[44]`.
pub const K_MAX_FREQ: f64 =
    (N_BINS - 1) as f64 * PIPELINE_SAMPLE_RATE_HZ / (2 * (N_BINS - 1) + 1) as f64;

/// Descriptor list for the validated architecture shape with configurable
/// widths: four conv stages plus the two-layer head.
pub fn stack_descriptors(conv_channels: [usize; 4], dense_units: usize) -> Vec<LayerKind> {
    vec![
        LayerKind::Conv2D {
            out_channels: conv_channels[0],
            activation: Activation::Relu,
        },
        LayerKind::MaxPool2D,
        LayerKind::Dropout { rate: 0.25 },
        LayerKind::Conv2D {
            out_channels: conv_channels[1],
            activation: Activation::Relu,
        },
        LayerKind::MaxPool2D,
        LayerKind::Dropout { rate: 0.25 },
        LayerKind::Conv2D {
            out_channels: conv_channels[2],
            activation: Activation::Relu,
        },
        LayerKind::Dropout { rate: 0.25 },
        LayerKind::Conv2D {
            out_channels: conv_channels[3],
            activation: Activation::Relu,
        },
        LayerKind::MaxPool2D,
        LayerKind::Flatten,
        LayerKind::Dense {
            out_units: dense_units,
            activation: Activation::Relu,
        },
        LayerKind::Dense {
            out_units: 2,
            activation: Activation::None,
        },
        LayerKind::Softmax,
    ]
}

/// The full-width stack: 32/64/128/256 filters and a 512-unit dense layer.
pub fn default_stack() -> Vec<LayerKind> {
    stack_descriptors([32, 64, 128, 256], 512)
}

/// Deterministic Glorot-uniform weights for an arbitrary valid stack.
pub fn synthetic_model(
    layers: Vec<LayerKind>,
    input_h: usize,
    input_w: usize,
    seed: u64,
) -> Result<ClassifierModel> {
    let shapes = infer_shapes(&layers, input_h, input_w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_dim_spatial_c = 1usize;
    let mut flat_dim = input_h * input_w;
    let mut weights = Vec::with_capacity(layers.len());
    for (layer, (shape, kernel_len, bias_len)) in layers.iter().zip(&shapes) {
        let (fan_in, fan_out) = match layer {
            LayerKind::Conv2D { out_channels, .. } => (
                in_dim_spatial_c * KERNEL * KERNEL,
                out_channels * KERNEL * KERNEL,
            ),
            LayerKind::Dense { out_units, .. } => (flat_dim, *out_units),
            _ => (1, 1),
        };
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let kernel: Vec<f32> = (0..*kernel_len)
            .map(|_| ((rng.random::<f64>() * 2.0 - 1.0) * limit) as f32)
            .collect();
        let bias = vec![0.0f32; *bias_len];
        weights.push(LayerWeights { kernel, bias });
        match shape {
            Shape::Spatial { c, .. } => in_dim_spatial_c = *c,
            Shape::Flat(d) => flat_dim = *d,
        }
    }
    ClassifierModel::new(layers, weights, input_h, input_w)
}

// --- CNNW byte format ---

const KIND_CONV: u8 = 0;
const KIND_POOL: u8 = 1;
const KIND_DROPOUT: u8 = 2;
const KIND_FLATTEN: u8 = 3;
const KIND_DENSE: u8 = 4;
const KIND_SOFTMAX: u8 = 5;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!(
                "unexpected end of file while reading {what}"
            ))),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        let b = self.take(4, what)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn activation_from_u32(v: u32) -> Result<Activation> {
    match v {
        0 => Ok(Activation::None),
        1 => Ok(Activation::Relu),
        other => Err(Error::Format(format!("unknown activation code {other}"))),
    }
}

fn activation_to_u32(a: Activation) -> u32 {
    match a {
        Activation::None => 0,
        Activation::Relu => 1,
    }
}

/// Parse a CNNW byte stream and validate it against a 45x100x1 input.
pub fn load_model(bytes: &[u8]) -> Result<ClassifierModel> {
    load_model_for_input(bytes, N_BINS, N_FRAMES)
}

pub fn load_model_for_input(
    bytes: &[u8],
    input_h: usize,
    input_w: usize,
) -> Result<ClassifierModel> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format("bad magic, not a CNNW file".into()));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported CNNW version {version}")));
    }
    let padding = cur.u8("padding mode")?;
    if padding != 0 {
        return Err(Error::Format(format!("unknown padding mode {padding}")));
    }
    let layer_count = cur.u32("layer count")? as usize;
    if layer_count == 0 || layer_count > 1024 {
        return Err(Error::Format(format!(
            "implausible layer count {layer_count}"
        )));
    }

    // width bound keeps shape arithmetic and allocations sane for hostile
    // headers; the validated stack tops out at 256 channels / 512 units
    const MAX_WIDTH: usize = 1 << 16;
    let mut layers = Vec::with_capacity(layer_count);
    for i in 0..layer_count {
        let kind = cur.u8(&format!("layer {i} kind"))?;
        let layer = match kind {
            KIND_CONV => {
                let out_channels = cur.u32(&format!("layer {i} out_channels"))? as usize;
                if out_channels > MAX_WIDTH {
                    return Err(Error::Format(format!(
                        "layer {i}: implausible channel count {out_channels}"
                    )));
                }
                LayerKind::Conv2D {
                    out_channels,
                    activation: activation_from_u32(cur.u32(&format!("layer {i} activation"))?)?,
                }
            }
            KIND_POOL => LayerKind::MaxPool2D,
            KIND_DROPOUT => LayerKind::Dropout {
                rate: cur.f32(&format!("layer {i} rate"))?,
            },
            KIND_FLATTEN => LayerKind::Flatten,
            KIND_DENSE => {
                let out_units = cur.u32(&format!("layer {i} out_units"))? as usize;
                if out_units > MAX_WIDTH {
                    return Err(Error::Format(format!(
                        "layer {i}: implausible unit count {out_units}"
                    )));
                }
                LayerKind::Dense {
                    out_units,
                    activation: activation_from_u32(cur.u32(&format!("layer {i} activation"))?)?,
                }
            }
            KIND_SOFTMAX => LayerKind::Softmax,
            other => return Err(Error::Format(format!("layer {i}: unknown kind {other}"))),
        };
        layers.push(layer);
    }

    let shapes = infer_shapes(&layers, input_h, input_w)?;
    let mut weights = Vec::with_capacity(layer_count);
    for (idx, (_, kernel_len, bias_len)) in shapes.iter().enumerate() {
        let mut read_tensor = |len: usize, what: &str| -> Result<Vec<f32>> {
            // check the remaining byte budget before allocating
            if cur.bytes.len().saturating_sub(cur.pos) < 4 * len {
                return Err(Error::Validation(format!(
                    "layer {idx} ({}): weight data ends early",
                    layers[idx].name()
                )));
            }
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                v.push(cur.f32(what).map_err(|_| {
                    Error::Validation(format!(
                        "layer {idx} ({}): weight data ends early",
                        layers[idx].name()
                    ))
                })?);
            }
            Ok(v)
        };
        let kernel = read_tensor(*kernel_len, "kernel")?;
        let bias = read_tensor(*bias_len, "bias")?;
        weights.push(LayerWeights { kernel, bias });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Validation(format!(
            "{} trailing bytes after the last weight tensor",
            bytes.len() - cur.pos
        )));
    }

    ClassifierModel::new(layers, weights, input_h, input_w)
}

/// Serialize a model to CNNW bytes.
pub fn save_model(model: &ClassifierModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(0u8); // padding mode: same
    out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    for layer in &model.layers {
        match layer {
            LayerKind::Conv2D {
                out_channels,
                activation,
            } => {
                out.push(KIND_CONV);
                out.extend_from_slice(&(*out_channels as u32).to_le_bytes());
                out.extend_from_slice(&activation_to_u32(*activation).to_le_bytes());
            }
            LayerKind::MaxPool2D => out.push(KIND_POOL),
            LayerKind::Dropout { rate } => {
                out.push(KIND_DROPOUT);
                out.extend_from_slice(&rate.to_le_bytes());
            }
            LayerKind::Flatten => out.push(KIND_FLATTEN),
            LayerKind::Dense {
                out_units,
                activation,
            } => {
                out.push(KIND_DENSE);
                out.extend_from_slice(&(*out_units as u32).to_le_bytes());
                out.extend_from_slice(&activation_to_u32(*activation).to_le_bytes());
            }
            LayerKind::Softmax => out.push(KIND_SOFTMAX),
        }
    }
    for w in &model.weights {
        for v in w.kernel.iter().chain(&w.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}
