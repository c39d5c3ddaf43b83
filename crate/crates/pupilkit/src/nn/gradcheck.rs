//! Central finite-difference verification of the analytic gradients.
//!
//! The checker never touches the backpropagation code: it re-evaluates the
//! loss in pure f64 with individually perturbed parameters and compares the
//! numeric slope against the gradients reported by [`net_backward`]. Because
//! a convolution output is linear in its weights and bias, perturbing a
//! first-layer parameter only requires re-evaluating the one affected
//! channel plane and everything downstream of it; every other recomputation
//! is done from the perturbed parameter outward. This keeps a full sweep
//! over all parameters of the 89x89 configuration affordable.

use rayon::prelude::*;

use crate::error::Result;
use crate::nn::backward::{net_backward, GradientBuffer};
use crate::nn::model::{Activation, NetworkModel};
use crate::nn::tensor::Tensor3;

/// Finite-difference step for the f64 evaluation path.
const EPSILON: f64 = 1e-5;

/// f64 mirror of a model, used only by the checker.
struct Net64 {
    input: usize,
    f1: usize,
    k1: usize,
    s1: usize,
    pool_window: usize,
    pool_stride: usize,
    sp: usize,
    f2: usize,
    k2: usize,
    conv1_w: Vec<f64>,
    conv1_b: Vec<f64>,
    conv2_w: Vec<f64>,
    conv2_b: Vec<f64>,
    fc_w: Vec<f64>,
    fc_b: f64,
    hidden: Activation,
    output: Activation,
}

struct Trace64 {
    x: Vec<f64>,
    act2: Vec<f64>,
    conv2_out: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Param {
    Conv1W(usize),
    Conv1B(usize),
    Conv2W(usize),
    Conv2B(usize),
    FcW(usize),
    FcB,
}

impl Net64 {
    fn from_model(model: &NetworkModel) -> Result<Self> {
        let chain = model.shape_chain()?;
        // Grayscale input throughout; the channel-sliced recomputation in
        // conv1_plane relies on it.
        assert_eq!(model.conv1.in_channels, 1);
        Ok(Self {
            input: model.input_size,
            f1: model.conv1.filter,
            k1: model.conv1.out_channels,
            s1: chain[1].0,
            pool_window: model.pool.window,
            pool_stride: model.pool.stride,
            sp: chain[2].0,
            f2: model.conv2.filter,
            k2: model.conv2.out_channels,
            conv1_w: model.conv1.weights.iter().map(|&w| w as f64).collect(),
            conv1_b: model.conv1.biases.iter().map(|&b| b as f64).collect(),
            conv2_w: model.conv2.weights.iter().map(|&w| w as f64).collect(),
            conv2_b: model.conv2.biases.iter().map(|&b| b as f64).collect(),
            fc_w: model.fc.weights.iter().map(|&w| w as f64).collect(),
            fc_b: model.fc.bias as f64,
            hidden: model.hidden_activation,
            output: model.output_activation,
        })
    }

    fn params(&self) -> Vec<Param> {
        let mut out = Vec::new();
        out.extend((0..self.conv1_w.len()).map(Param::Conv1W));
        out.extend((0..self.conv1_b.len()).map(Param::Conv1B));
        out.extend((0..self.conv2_w.len()).map(Param::Conv2W));
        out.extend((0..self.conv2_b.len()).map(Param::Conv2B));
        out.extend((0..self.fc_w.len()).map(Param::FcW));
        out.push(Param::FcB);
        out
    }

    /// conv1 channel plane: pre-activation values for output channel `oc`,
    /// optionally with one weight or the bias shifted by `delta`.
    fn conv1_plane(&self, x: &[f64], oc: usize, perturbed: Option<(Param, f64)>) -> Vec<f64> {
        let mut bias = self.conv1_b[oc];
        let mut w = self.conv1_w[oc * self.f1 * self.f1..(oc + 1) * self.f1 * self.f1].to_vec();
        match perturbed {
            Some((Param::Conv1W(i), d)) => w[i - oc * self.f1 * self.f1] += d,
            Some((Param::Conv1B(_), d)) => bias += d,
            _ => {}
        }
        let mut plane = vec![0.0; self.s1 * self.s1];
        for oy in 0..self.s1 {
            for ox in 0..self.s1 {
                let mut acc = bias;
                for ky in 0..self.f1 {
                    for kx in 0..self.f1 {
                        acc += w[ky * self.f1 + kx] * x[(oy + ky) * self.input + (ox + kx)];
                    }
                }
                plane[oy * self.s1 + ox] = acc;
            }
        }
        plane
    }

    /// pool + hidden activation for one channel plane of act1.
    fn pooled_activated(&self, act1_plane: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.sp * self.sp];
        let norm = 1.0 / (self.pool_window * self.pool_window) as f64;
        for py in 0..self.sp {
            for px in 0..self.sp {
                let mut sum = 0.0;
                for wy in 0..self.pool_window {
                    for wx in 0..self.pool_window {
                        sum += act1_plane
                            [(py * self.pool_stride + wy) * self.s1 + px * self.pool_stride + wx];
                    }
                }
                out[py * self.sp + px] = self.hidden.apply(sum * norm);
            }
        }
        out
    }

    fn conv2_output(&self, act2: &[f64], oc: usize, perturbed: Option<(Param, f64)>) -> f64 {
        let span = self.k1 * self.f2 * self.f2;
        let mut acc = self.conv2_b[oc]
            + match perturbed {
                Some((Param::Conv2B(i), d)) if i == oc => d,
                _ => 0.0,
            };
        for ic in 0..self.k1 {
            for ky in 0..self.f2 {
                for kx in 0..self.f2 {
                    let wi = oc * span + (ic * self.f2 + ky) * self.f2 + kx;
                    let mut w = self.conv2_w[wi];
                    if let Some((Param::Conv2W(i), d)) = perturbed {
                        if i == wi {
                            w += d;
                        }
                    }
                    acc += w * act2[(ic * self.sp + ky) * self.sp + kx];
                }
            }
        }
        acc
    }

    fn loss_from_conv2(&self, conv2_out: &[f64], target: f64, perturbed: Option<(Param, f64)>) -> f64 {
        let mut acc = self.fc_b;
        if let Some((Param::FcB, d)) = perturbed {
            acc += d;
        }
        for (k, (&w, &v)) in self.fc_w.iter().zip(conv2_out).enumerate() {
            let mut w = w;
            if let Some((Param::FcW(i), d)) = perturbed {
                if i == k {
                    w += d;
                }
            }
            acc += w * v;
        }
        let y = self.output.apply(acc);
        0.5 * (y - target) * (y - target)
    }

    fn forward(&self, x: &[f64], target: f64) -> (f64, Trace64) {
        let mut act2 = vec![0.0; self.k1 * self.sp * self.sp];
        for oc in 0..self.k1 {
            let plane: Vec<f64> = self
                .conv1_plane(x, oc, None)
                .iter()
                .map(|&z| self.hidden.apply(z))
                .collect();
            let pooled = self.pooled_activated(&plane);
            act2[oc * self.sp * self.sp..(oc + 1) * self.sp * self.sp].copy_from_slice(&pooled);
        }
        let conv2_out: Vec<f64> = (0..self.k2).map(|oc| self.conv2_output(&act2, oc, None)).collect();
        let loss = self.loss_from_conv2(&conv2_out, target, None);
        (
            loss,
            Trace64 {
                x: x.to_vec(),
                act2,
                conv2_out,
            },
        )
    }

    /// Loss with exactly one parameter shifted by `delta`, re-evaluating only
    /// the parts of the network the shift can reach.
    fn loss_perturbed(&self, trace: &Trace64, target: f64, param: Param, delta: f64) -> f64 {
        match param {
            Param::Conv1W(i) => {
                let oc = i / (self.f1 * self.f1);
                self.loss_from_conv1_channel(trace, target, oc, Some((param, delta)))
            }
            Param::Conv1B(oc) => {
                self.loss_from_conv1_channel(trace, target, oc, Some((param, delta)))
            }
            Param::Conv2W(i) => {
                let oc = i / (self.k1 * self.f2 * self.f2);
                let mut conv2_out = trace.conv2_out.clone();
                conv2_out[oc] = self.conv2_output(&trace.act2, oc, Some((param, delta)));
                self.loss_from_conv2(&conv2_out, target, None)
            }
            Param::Conv2B(oc) => {
                let mut conv2_out = trace.conv2_out.clone();
                conv2_out[oc] = self.conv2_output(&trace.act2, oc, Some((param, delta)));
                self.loss_from_conv2(&conv2_out, target, None)
            }
            Param::FcW(_) | Param::FcB => {
                self.loss_from_conv2(&trace.conv2_out, target, Some((param, delta)))
            }
        }
    }

    fn loss_from_conv1_channel(
        &self,
        trace: &Trace64,
        target: f64,
        oc: usize,
        perturbed: Option<(Param, f64)>,
    ) -> f64 {
        let plane: Vec<f64> = self
            .conv1_plane(&trace.x, oc, perturbed)
            .iter()
            .map(|&z| self.hidden.apply(z))
            .collect();
        let pooled = self.pooled_activated(&plane);
        let mut act2 = trace.act2.clone();
        act2[oc * self.sp * self.sp..(oc + 1) * self.sp * self.sp].copy_from_slice(&pooled);
        let conv2_out: Vec<f64> = (0..self.k2).map(|c| self.conv2_output(&act2, c, None)).collect();
        self.loss_from_conv2(&conv2_out, target, None)
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Verifies `net_backward` against central finite differences over every
/// parameter; returns the worst relative error.
pub fn grad_check(model: &NetworkModel, patch: &Tensor3, target: f32) -> Result<f64> {
    grad_check_with(model, patch, target, net_backward)
}

/// Same as [`grad_check`], but for an arbitrary gradient routine. This is
/// how the negative-control fixture (a deliberately broken backward pass)
/// gets checked: the reported error must blow up.
pub fn grad_check_with<F>(
    model: &NetworkModel,
    patch: &Tensor3,
    target: f32,
    gradient_fn: F,
) -> Result<f64>
where
    F: Fn(&NetworkModel, &Tensor3, f32) -> Result<(f64, GradientBuffer)>,
{
    let (_, grads) = gradient_fn(model, patch, target)?;
    let analytic = grads.flattened();

    let net = Net64::from_model(model)?;
    let x: Vec<f64> = patch.values().iter().map(|&v| v as f64).collect();
    let (_, trace) = net.forward(&x, target as f64);
    let params = net.params();
    debug_assert_eq!(params.len(), analytic.len());

    let worst = params
        .par_iter()
        .zip(analytic.par_iter())
        .map(|(&p, &a)| {
            let plus = net.loss_perturbed(&trace, target as f64, p, EPSILON);
            let minus = net.loss_perturbed(&trace, target as f64, p, -EPSILON);
            let numeric = (plus - minus) / (2.0 * EPSILON);
            relative_error(a, numeric)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Negative-control gradient routine: identical to [`net_backward`] except
/// that the pooling layer distributes its gradient with the wrong sign, the
/// way a sign slip in the pooling backward would. Exists so the verification
/// harness can prove it actually detects broken gradients.
pub fn negative_control_backward(
    model: &NetworkModel,
    patch: &Tensor3,
    target: f32,
) -> Result<(f64, GradientBuffer)> {
    let (loss, mut grads) = net_backward(model, patch, target)?;
    // Only the first convolution sits upstream of the pooling layer, so a
    // sign-flipped pool backward flips exactly these gradients.
    for g in grads.conv1_weights.iter_mut() {
        *g = -*g;
    }
    for g in grads.conv1_biases.iter_mut() {
        *g = -*g;
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{build_config, init_model, ConfigName};
    use rand::{Rng, SeedableRng};

    fn random_patch(size: usize, seed: u64) -> Tensor3 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = Tensor3::zeros(size, size, 1);
        for v in t.values_mut() {
            *v = rng.random::<f32>();
        }
        t
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for (i, config) in [ConfigName::Ck8P8, ConfigName::Sk8P8].into_iter().enumerate() {
            let model = init_model(build_config(config), 40 + i as u64);
            let patch = random_patch(config.input_size(), 50 + i as u64);
            let err = grad_check(&model, &patch, 1.0).unwrap();
            assert!(err < 1e-3, "{config}: gradient error {err}");
        }
    }

    #[test]
    fn still_correct_after_training_steps() {
        use crate::nn::backward::{accumulate_and_step, GradientBuffer};
        let mut model = init_model(build_config(ConfigName::Ck8P8), 60);
        for step in 0..100 {
            let patch = random_patch(24, 100 + step);
            let (_, g) = net_backward(&model, &patch, (step % 2) as f32).unwrap();
            let mut buf = GradientBuffer::zeros_for(&model);
            buf.accumulate(&g).unwrap();
            accumulate_and_step(&mut model, &mut buf, 0.05).unwrap();
        }
        let err = grad_check(&model, &random_patch(24, 999), 1.0).unwrap();
        assert!(err < 1e-3, "gradient error after training: {err}");
    }

    #[test]
    fn negative_control_is_detected() {
        let model = init_model(build_config(ConfigName::Ck8P8), 70);
        let patch = random_patch(24, 71);
        let err = grad_check_with(&model, &patch, 1.0, negative_control_backward).unwrap();
        assert!(err > 0.5, "corrupted backward slipped through: {err}");
    }

    /// The production checker short-cuts recomputation to the affected
    /// network slice; this compares a sample of its numeric slopes against a
    /// checker that redoes the entire forward pass from scratch.
    #[test]
    fn shortcut_matches_full_recompute() {
        let model = init_model(build_config(ConfigName::Ck8P8), 80);
        let patch = random_patch(24, 81);
        let net = Net64::from_model(&model).unwrap();
        let x: Vec<f64> = patch.values().iter().map(|&v| v as f64).collect();
        let (_, trace) = net.forward(&x, 1.0);

        let full_loss = |param: Param, delta: f64| -> f64 {
            let mut net2 = Net64::from_model(&model).unwrap();
            match param {
                Param::Conv1W(i) => net2.conv1_w[i] += delta,
                Param::Conv1B(i) => net2.conv1_b[i] += delta,
                Param::Conv2W(i) => net2.conv2_w[i] += delta,
                Param::Conv2B(i) => net2.conv2_b[i] += delta,
                Param::FcW(i) => net2.fc_w[i] += delta,
                Param::FcB => net2.fc_b += delta,
            }
            net2.forward(&x, 1.0).0
        };

        let probes = [
            Param::Conv1W(0),
            Param::Conv1W(137),
            Param::Conv1B(3),
            Param::Conv2W(42),
            Param::Conv2B(7),
            Param::FcW(5),
            Param::FcB,
        ];
        for p in probes {
            for delta in [EPSILON, -EPSILON] {
                let fast = net.loss_perturbed(&trace, 1.0, p, delta);
                let slow = full_loss(p, delta);
                assert!(
                    (fast - slow).abs() < 1e-12,
                    "shortcut deviates: {fast} vs {slow}"
                );
            }
        }
    }
}
