//! Naive nested-loop forward-pass oracle for the CNN.
//!
//! Re-implements convolution ('same' zero padding anchored top-left),
//! 2x2/stride-2 max pooling with floor division, flatten in (row, col,
//! channel) order, dense layers and softmax directly from the layer
//! contract, independent of the library's forward code.

use coughmap_core::cnn::{Activation, ClassifierModel, LayerKind};

pub fn forward_oracle(model: &ClassifierModel, input: &[f64], h0: usize, w0: usize) -> Vec<f64> {
    let mut h = h0;
    let mut w = w0;
    let mut c = 1usize;
    // feature[(y, x, ch)] flattened as ((y * w) + x) * c + ch
    let mut feature: Vec<f64> = input.to_vec();
    let mut flat: Option<Vec<f64>> = None;

    for (idx, layer) in model.layers().iter().enumerate() {
        match layer {
            LayerKind::Conv2D {
                out_channels,
                activation,
            } => {
                let weights = model_weights(model, idx);
                let mut out = vec![0.0f64; h * w * out_channels];
                for y in 0..h {
                    for x in 0..w {
                        for oc in 0..*out_channels {
                            let mut acc = f64::from(weights.1[oc]);
                            for ic in 0..c {
                                for dy in 0..2usize {
                                    for dx in 0..2usize {
                                        let (yy, xx) = (y + dy, x + dx);
                                        if yy >= h || xx >= w {
                                            continue;
                                        }
                                        let k = weights.0[((oc * c + ic) * 2 + dy) * 2 + dx];
                                        acc += f64::from(k) * feature[(yy * w + xx) * c + ic];
                                    }
                                }
                            }
                            let v = if *activation == Activation::Relu {
                                acc.max(0.0)
                            } else {
                                acc
                            };
                            out[(y * w + x) * out_channels + oc] = v;
                        }
                    }
                }
                feature = out;
                c = *out_channels;
            }
            LayerKind::MaxPool2D => {
                let (oh, ow) = (h / 2, w / 2);
                let mut out = vec![0.0f64; oh * ow * c];
                for y in 0..oh {
                    for x in 0..ow {
                        for ch in 0..c {
                            let mut best = f64::NEG_INFINITY;
                            for dy in 0..2usize {
                                for dx in 0..2usize {
                                    let v = feature[((2 * y + dy) * w + (2 * x + dx)) * c + ch];
                                    best = best.max(v);
                                }
                            }
                            out[(y * ow + x) * c + ch] = best;
                        }
                    }
                }
                feature = out;
                h = oh;
                w = ow;
            }
            LayerKind::Dropout { .. } => {}
            LayerKind::Flatten => {
                flat = Some(feature.clone());
            }
            LayerKind::Dense {
                out_units,
                activation,
            } => {
                let input = flat.take().expect("Dense before Flatten");
                let weights = model_weights(model, idx);
                let mut out = vec![0.0f64; *out_units];
                for (o, slot) in out.iter_mut().enumerate() {
                    let mut acc = f64::from(weights.1[o]);
                    for (i, v) in input.iter().enumerate() {
                        acc += f64::from(weights.0[o * input.len() + i]) * v;
                    }
                    *slot = if *activation == Activation::Relu {
                        acc.max(0.0)
                    } else {
                        acc
                    };
                }
                flat = Some(out);
            }
            LayerKind::Softmax => {
                let mut v = flat.take().expect("Softmax before Flatten");
                let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for z in v.iter_mut() {
                    *z = (*z - max).exp();
                    sum += *z;
                }
                for z in v.iter_mut() {
                    *z /= sum;
                }
                flat = Some(v);
            }
        }
    }
    flat.expect("network produced no flat output")
}

/// The oracle reads weights through the CNNW byte round-trip so it never
/// touches the in-memory layout directly.
fn model_weights(model: &ClassifierModel, layer_idx: usize) -> (Vec<f32>, Vec<f32>) {
    parse_cnnw_weights(&coughmap_core::cnn::save_model(model), layer_idx)
}

/// Minimal independent CNNW reader: walks the header, then slices the f32
/// blob using shape arithmetic done from scratch for the fixed 45x100 input.
fn parse_cnnw_weights(bytes: &[u8], want_layer: usize) -> (Vec<f32>, Vec<f32>) {
    let u32_at = |at: usize| {
        u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]) as usize
    };
    assert_eq!(&bytes[0..4], b"CNNW");
    assert_eq!(u32_at(4), 1, "version");
    assert_eq!(bytes[8], 0, "padding mode");
    let layer_count = u32_at(9);
    let mut pos = 13usize;

    // (kernel_len, bias_len) per layer, tracking shapes
    let mut sizes: Vec<(usize, usize)> = Vec::new();
    let (mut h, mut w, mut c) = (45usize, 100usize, 1usize);
    let mut flat_dim = 0usize;
    for _ in 0..layer_count {
        let kind = bytes[pos];
        pos += 1;
        match kind {
            0 => {
                let oc = u32_at(pos);
                pos += 8; // out_channels + activation
                sizes.push((oc * c * 4, oc));
                c = oc;
            }
            1 => {
                sizes.push((0, 0));
                h /= 2;
                w /= 2;
            }
            2 => {
                pos += 4; // rate
                sizes.push((0, 0));
            }
            3 => {
                sizes.push((0, 0));
                flat_dim = h * w * c;
            }
            4 => {
                let units = u32_at(pos);
                pos += 8;
                sizes.push((units * flat_dim, units));
                flat_dim = units;
            }
            5 => sizes.push((0, 0)),
            other => panic!("unknown layer kind {other}"),
        }
    }

    let mut float_at = pos;
    for (idx, (klen, blen)) in sizes.iter().enumerate() {
        if idx == want_layer {
            let read = |start: usize, len: usize| -> Vec<f32> {
                (0..len)
                    .map(|i| {
                        let at = start + 4 * i;
                        f32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
                    })
                    .collect()
            };
            let kernel = read(float_at, *klen);
            let bias = read(float_at + 4 * klen, *blen);
            return (kernel, bias);
        }
        float_at += 4 * (klen + blen);
    }
    panic!("layer {want_layer} out of range");
}
