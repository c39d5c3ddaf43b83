//! Backpropagation for the squared-error rating loss and batch updates.
//!
//! The loss is `L = (rating - target)^2 / 2`. Gradients flow through the
//! logistic output, the perceptron, the second convolution, the second
//! hidden activation, average pooling (which spreads the incoming gradient
//! uniformly, `1/window^2`, over its window) and the first activation back
//! to the first convolution's parameters.

use crate::error::{Error, Result};
use crate::nn::forward::net_forward_traced;
use crate::nn::model::NetworkModel;
use crate::nn::tensor::Tensor3;

/// Accumulated gradients, shaped exactly like the owning model's parameters.
///
/// Values are f64 accumulators so summing a batch does not lose the low bits
/// of individual contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub conv1_weights: Vec<f64>,
    pub conv1_biases: Vec<f64>,
    pub conv2_weights: Vec<f64>,
    pub conv2_biases: Vec<f64>,
    pub fc_weights: Vec<f64>,
    pub fc_bias: f64,
    pub sample_count: usize,
}

impl GradientBuffer {
    /// Zeroed buffer matching `model`'s parameter shapes.
    pub fn zeros_for(model: &NetworkModel) -> Self {
        Self {
            conv1_weights: vec![0.0; model.conv1.weights.len()],
            conv1_biases: vec![0.0; model.conv1.biases.len()],
            conv2_weights: vec![0.0; model.conv2.weights.len()],
            conv2_biases: vec![0.0; model.conv2.biases.len()],
            fc_weights: vec![0.0; model.fc.weights.len()],
            fc_bias: 0.0,
            sample_count: 0,
        }
    }

    fn matches(&self, other: &GradientBuffer) -> bool {
        self.conv1_weights.len() == other.conv1_weights.len()
            && self.conv1_biases.len() == other.conv1_biases.len()
            && self.conv2_weights.len() == other.conv2_weights.len()
            && self.conv2_biases.len() == other.conv2_biases.len()
            && self.fc_weights.len() == other.fc_weights.len()
    }

    /// Adds another buffer (typically a single sample's gradients) into this
    /// accumulator.
    pub fn accumulate(&mut self, other: &GradientBuffer) -> Result<()> {
        if !self.matches(other) {
            return Err(Error::DimensionMismatch(
                "gradient buffers belong to different model shapes".into(),
            ));
        }
        for (a, b) in self.conv1_weights.iter_mut().zip(&other.conv1_weights) {
            *a += b;
        }
        for (a, b) in self.conv1_biases.iter_mut().zip(&other.conv1_biases) {
            *a += b;
        }
        for (a, b) in self.conv2_weights.iter_mut().zip(&other.conv2_weights) {
            *a += b;
        }
        for (a, b) in self.conv2_biases.iter_mut().zip(&other.conv2_biases) {
            *a += b;
        }
        for (a, b) in self.fc_weights.iter_mut().zip(&other.fc_weights) {
            *a += b;
        }
        self.fc_bias += other.fc_bias;
        self.sample_count += other.sample_count;
        Ok(())
    }

    /// Clears the accumulators and the sample count.
    pub fn reset(&mut self) {
        self.conv1_weights.fill(0.0);
        self.conv1_biases.fill(0.0);
        self.conv2_weights.fill(0.0);
        self.conv2_biases.fill(0.0);
        self.fc_weights.fill(0.0);
        self.fc_bias = 0.0;
        self.sample_count = 0;
    }

    /// Flat view of every gradient in serialization order; used by the
    /// finite-difference checker.
    pub fn flattened(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(
            self.conv1_weights.len()
                + self.conv1_biases.len()
                + self.conv2_weights.len()
                + self.conv2_biases.len()
                + self.fc_weights.len()
                + 1,
        );
        out.extend_from_slice(&self.conv1_weights);
        out.extend_from_slice(&self.conv1_biases);
        out.extend_from_slice(&self.conv2_weights);
        out.extend_from_slice(&self.conv2_biases);
        out.extend_from_slice(&self.fc_weights);
        out.push(self.fc_bias);
        out
    }
}

/// Runs one forward/backward pass, returning the squared-error loss and the
/// exact parameter gradients for this single sample (`sample_count == 1`).
pub fn net_backward(
    model: &NetworkModel,
    patch: &Tensor3,
    target: f32,
) -> Result<(f64, GradientBuffer)> {
    let (rating, trace) = net_forward_traced(model, patch)?;
    let mut grads = GradientBuffer::zeros_for(model);
    grads.sample_count = 1;

    let y = rating as f64;
    let t = target as f64;
    let loss = 0.5 * (y - t) * (y - t);

    // d loss / d fc_pre, through the output activation.
    let g_fc_pre = (y - t) * model.output_activation.derivative_from_output(y);

    grads.fc_bias = g_fc_pre;
    let mut g_conv2_out = vec![0.0f64; model.conv2.out_channels];
    for k in 0..model.fc.in_count() {
        grads.fc_weights[k] = g_fc_pre * trace.conv2_out.values()[k] as f64;
        g_conv2_out[k] = g_fc_pre * model.fc.weights[k] as f64;
    }

    // Second convolution: its output is 1x1, so each weight's gradient is
    // the output gradient times the corresponding act2 value.
    let act2 = &trace.act2;
    let (a2w, a2h) = (act2.width(), act2.height());
    let mut g_act2 = vec![0.0f64; act2.values().len()];
    for oc in 0..model.conv2.out_channels {
        let g = g_conv2_out[oc];
        grads.conv2_biases[oc] = g;
        for ic in 0..model.conv2.in_channels {
            let plane = act2.plane(ic);
            let g_plane = &mut g_act2[ic * a2h * a2w..(ic + 1) * a2h * a2w];
            for ky in 0..model.conv2.filter {
                for kx in 0..model.conv2.filter {
                    let idx = model.conv2.weight_index(oc, ic, ky, kx);
                    let v = plane[ky * a2w + kx] as f64;
                    grads.conv2_weights[idx] = g * v;
                    g_plane[ky * a2w + kx] += g * model.conv2.weights[idx] as f64;
                }
            }
        }
    }
    debug_assert_eq!((a2w, a2h), (model.conv2.filter, model.conv2.filter));

    // Through the second hidden activation into the pooled map.
    let mut g_pooled = g_act2;
    for (g, &a) in g_pooled.iter_mut().zip(act2.values()) {
        *g *= model.hidden_activation.derivative_from_output(a as f64);
    }

    // Pooling backward: spread uniformly over each window.
    let act1 = &trace.act1;
    let (a1w, a1h) = (act1.width(), act1.height());
    let norm = 1.0 / (model.pool.window * model.pool.window) as f64;
    let mut g_act1 = vec![0.0f64; act1.values().len()];
    for c in 0..act1.channels() {
        for py in 0..a2h {
            for px in 0..a2w {
                let g = g_pooled[(c * a2h + py) * a2w + px] * norm;
                for wy in 0..model.pool.window {
                    let row = (c * a1h + py * model.pool.stride + wy) * a1w + px * model.pool.stride;
                    for v in &mut g_act1[row..row + model.pool.window] {
                        *v += g;
                    }
                }
            }
        }
    }

    // Through the first hidden activation.
    let mut g_conv1_out = g_act1;
    for (g, &a) in g_conv1_out.iter_mut().zip(act1.values()) {
        *g *= model.hidden_activation.derivative_from_output(a as f64);
    }

    // First convolution parameter gradients.
    let (iw, f) = (patch.width(), model.conv1.filter);
    for oc in 0..model.conv1.out_channels {
        let g_plane = &g_conv1_out[oc * a1h * a1w..(oc + 1) * a1h * a1w];
        grads.conv1_biases[oc] = g_plane.iter().sum();
        for ic in 0..model.conv1.in_channels {
            let plane = patch.plane(ic);
            for ky in 0..f {
                for kx in 0..f {
                    let mut acc = 0.0f64;
                    for oy in 0..a1h {
                        let src = &plane[(oy + ky) * iw + kx..(oy + ky) * iw + kx + a1w];
                        let grd = &g_plane[oy * a1w..(oy + 1) * a1w];
                        for (&g, &v) in grd.iter().zip(src) {
                            acc += g * v as f64;
                        }
                    }
                    grads.conv1_weights[model.conv1.weight_index(oc, ic, ky, kx)] = acc;
                }
            }
        }
    }

    Ok((loss, grads))
}

/// Applies one averaged gradient-descent step, `w -= lr * (g / n)`, and
/// resets the buffer. Rejects buffers that accumulated no samples.
pub fn accumulate_and_step(
    model: &mut NetworkModel,
    buffer: &mut GradientBuffer,
    learning_rate: f64,
) -> Result<()> {
    if buffer.sample_count == 0 {
        return Err(Error::InvalidInput(
            "gradient buffer holds no samples".into(),
        ));
    }
    if buffer.conv1_weights.len() != model.conv1.weights.len()
        || buffer.conv2_weights.len() != model.conv2.weights.len()
        || buffer.fc_weights.len() != model.fc.weights.len()
    {
        return Err(Error::DimensionMismatch(
            "gradient buffer does not match the model".into(),
        ));
    }
    let scale = learning_rate / buffer.sample_count as f64;
    let step = |ws: &mut [f32], gs: &[f64]| {
        for (w, g) in ws.iter_mut().zip(gs) {
            *w = (*w as f64 - scale * g) as f32;
        }
    };
    step(&mut model.conv1.weights, &buffer.conv1_weights);
    step(&mut model.conv1.biases, &buffer.conv1_biases);
    step(&mut model.conv2.weights, &buffer.conv2_weights);
    step(&mut model.conv2.biases, &buffer.conv2_biases);
    step(&mut model.fc.weights, &buffer.fc_weights);
    model.fc.bias = (model.fc.bias as f64 - scale * buffer.fc_bias) as f32;
    buffer.reset();
    Ok(())
}
