//! Forward pass: conv -> tanh -> average pool -> tanh -> conv -> perceptron
//! -> logistic rating.
//!
//! All dot products and pooling sums accumulate in f64 and store f32. Every
//! output element receives its contributions in a fixed `(in_channel, ky,
//! kx)` order, so a rating computed on an extracted patch is bit-identical
//! to one computed from convolution planes shared across overlapping windows
//! (which is what [`crate::detector`] relies on).

use crate::error::{Error, Result};
use crate::nn::model::{Activation, AvgPoolLayer, ConvLayer, FcLayer, NetworkModel};
use crate::nn::tensor::Tensor3;

/// Intermediate feature maps of one forward pass, kept for backpropagation
/// and shape inspection.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Pre-activation output of the first convolution.
    pub conv1_out: Tensor3,
    /// Hidden activation of `conv1_out`.
    pub act1: Tensor3,
    /// Average-pooled `act1`.
    pub pooled: Tensor3,
    /// Hidden activation of `pooled`.
    pub act2: Tensor3,
    /// Output of the second convolution, a `1x1xK` map.
    pub conv2_out: Tensor3,
    /// Perceptron pre-activation.
    pub fc_pre: f32,
    /// Final rating in `[0, 1]`.
    pub rating: f32,
}

/// Valid convolution (stride one, no padding).
///
/// Accumulates row-wise: for each output channel the weights are applied as
/// scaled shifted rows, which vectorizes while keeping the per-element
/// addition order identical to a plain `(ic, ky, kx)` dot product.
pub(crate) fn conv_forward(input: &Tensor3, layer: &ConvLayer) -> Result<Tensor3> {
    if input.channels() != layer.in_channels {
        return Err(Error::DimensionMismatch(format!(
            "convolution expects {} input channels, got {}",
            layer.in_channels,
            input.channels()
        )));
    }
    let ow = layer.output_size(input.width())?;
    let oh = layer.output_size(input.height())?;
    let (iw, f) = (input.width(), layer.filter);

    let mut out = Tensor3::zeros(ow, oh, layer.out_channels);
    let mut acc = vec![0.0f64; ow * oh];
    for oc in 0..layer.out_channels {
        acc.fill(layer.biases[oc] as f64);
        for ic in 0..layer.in_channels {
            let plane = input.plane(ic);
            for ky in 0..f {
                for kx in 0..f {
                    let w = layer.weights[layer.weight_index(oc, ic, ky, kx)] as f64;
                    for oy in 0..oh {
                        let src = &plane[(oy + ky) * iw + kx..(oy + ky) * iw + kx + ow];
                        let dst = &mut acc[oy * ow..(oy + 1) * ow];
                        for (a, &v) in dst.iter_mut().zip(src) {
                            *a += w * v as f64;
                        }
                    }
                }
            }
        }
        let plane_out = &mut out.values_mut()[oc * oh * ow..(oc + 1) * oh * ow];
        for (o, &a) in plane_out.iter_mut().zip(acc.iter()) {
            *o = a as f32;
        }
    }
    Ok(out)
}

/// Average pooling; requires `(input - window)` divisible by the stride.
pub(crate) fn pool_forward(input: &Tensor3, pool: &AvgPoolLayer) -> Result<Tensor3> {
    let (iw, ih) = (input.width(), input.height());
    if iw < pool.window
        || ih < pool.window
        || (iw - pool.window) % pool.stride != 0
        || (ih - pool.window) % pool.stride != 0
    {
        return Err(Error::DimensionMismatch(format!(
            "pooling window {}/stride {} does not tile a {}x{} input",
            pool.window, pool.stride, iw, ih
        )));
    }
    pool_region(input, (0, 0), (iw, ih), pool)
}

/// Average pooling of a `region` (width, height) crop of `input` anchored at
/// `offset`, without materializing the crop. Summation order matches
/// [`pool_forward`] exactly, so pooling a shared feature plane is bit-equal
/// to pooling an extracted copy.
pub(crate) fn pool_region(
    input: &Tensor3,
    offset: (usize, usize),
    region: (usize, usize),
    pool: &AvgPoolLayer,
) -> Result<Tensor3> {
    let (rw, rh) = region;
    debug_assert!(offset.0 + rw <= input.width() && offset.1 + rh <= input.height());
    let iw = input.width();
    let ow = (rw - pool.window) / pool.stride + 1;
    let oh = (rh - pool.window) / pool.stride + 1;
    let norm = 1.0 / (pool.window * pool.window) as f64;

    let mut out = Tensor3::zeros(ow, oh, input.channels());
    for c in 0..input.channels() {
        let plane = input.plane(c);
        for py in 0..oh {
            for px in 0..ow {
                let mut sum = 0.0f64;
                for wy in 0..pool.window {
                    let row =
                        (offset.1 + py * pool.stride + wy) * iw + offset.0 + px * pool.stride;
                    for &v in &plane[row..row + pool.window] {
                        sum += v as f64;
                    }
                }
                out.set(c, py, px, (sum * norm) as f32);
            }
        }
    }
    Ok(out)
}

/// Elementwise activation computed in f64, stored as f32.
pub(crate) fn activated(input: &Tensor3, act: Activation) -> Tensor3 {
    let mut out = input.clone();
    for v in out.values_mut() {
        *v = act.apply(*v as f64) as f32;
    }
    out
}

pub(crate) fn fc_forward(fc: &FcLayer, features: &Tensor3) -> f64 {
    let mut acc = fc.bias as f64;
    for (w, &v) in fc.weights.iter().zip(features.values()) {
        acc += *w as f64 * v as f64;
    }
    acc
}

pub(crate) struct TailTrace {
    pub rating: f32,
    pub pooled: Tensor3,
    pub act2: Tensor3,
    pub conv2_out: Tensor3,
    pub fc_pre: f32,
}

/// Everything after the first hidden activation: pool, activate, second
/// convolution, perceptron, output activation. Shared between the per-patch
/// forward pass and the window-scanning detector so both produce identical
/// bits from identical hidden maps.
pub(crate) fn rate_from_act1(model: &NetworkModel, act1: &Tensor3) -> Result<TailTrace> {
    let pooled = pool_forward(act1, &model.pool)?;
    rate_from_pooled(model, pooled)
}

/// The tail from the pooled map onward; the scanning path pools straight
/// out of a shared feature plane and joins here.
pub(crate) fn rate_from_pooled(model: &NetworkModel, pooled: Tensor3) -> Result<TailTrace> {
    let act2 = activated(&pooled, model.hidden_activation);
    let conv2_out = conv_forward(&act2, &model.conv2)?;
    if conv2_out.width() != 1 || conv2_out.height() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "second convolution must emit a 1x1 map, got {}x{}",
            conv2_out.width(),
            conv2_out.height()
        )));
    }
    if conv2_out.channels() != model.fc.in_count() {
        return Err(Error::DimensionMismatch(format!(
            "perceptron expects {} inputs, feature map has {} channels",
            model.fc.in_count(),
            conv2_out.channels()
        )));
    }
    let fc_pre = fc_forward(&model.fc, &conv2_out);
    let rating = model.output_activation.apply(fc_pre) as f32;
    Ok(TailTrace {
        rating,
        pooled,
        act2,
        conv2_out,
        fc_pre: fc_pre as f32,
    })
}

fn check_patch(model: &NetworkModel, patch: &Tensor3) -> Result<()> {
    if patch.dims() != (model.input_size, model.input_size, 1) {
        return Err(Error::DimensionMismatch(format!(
            "{} expects a {s}x{s}x1 patch, got {}x{}x{}",
            model.config,
            patch.width(),
            patch.height(),
            patch.channels(),
            s = model.input_size
        )));
    }
    Ok(())
}

/// Rates one patch, returning only the scalar in `[0, 1]`.
pub fn net_forward(model: &NetworkModel, patch: &Tensor3) -> Result<f32> {
    check_patch(model, patch)?;
    let conv1_out = conv_forward(patch, &model.conv1)?;
    let act1 = activated(&conv1_out, model.hidden_activation);
    Ok(rate_from_act1(model, &act1)?.rating)
}

/// Rates one patch and keeps every intermediate feature map.
pub fn net_forward_traced(model: &NetworkModel, patch: &Tensor3) -> Result<(f32, ForwardTrace)> {
    check_patch(model, patch)?;
    let conv1_out = conv_forward(patch, &model.conv1)?;
    let act1 = activated(&conv1_out, model.hidden_activation);
    let tail = rate_from_act1(model, &act1)?;
    Ok((
        tail.rating,
        ForwardTrace {
            conv1_out,
            act1,
            pooled: tail.pooled,
            act2: tail.act2,
            conv2_out: tail.conv2_out,
            fc_pre: tail.fc_pre,
            rating: tail.rating,
        },
    ))
}
