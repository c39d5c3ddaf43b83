//! Tiny rating networks: definition, initialization, inference,
//! differentiation and serialization.
//!
//! Five fixed configurations share one architecture — convolution, hidden
//! activation, average pooling, hidden activation, convolution, and a single
//! output perceptron squashed through a logistic — differing only in filter
//! sizes, kernel counts and input size (see [`ConfigName`]). Hidden
//! activations are `tanh`; the logistic output guarantees ratings in
//! `[0, 1]`. Inputs are patches of pixel intensities scaled to `[0, 1]`.
//!
//! Inference on a finalized model is read-only and safe to call from many
//! threads. Training mutates the model and needs exclusive access.

mod backward;
mod forward;
mod gradcheck;
mod model;
mod serialize;
mod tensor;

pub use backward::{accumulate_and_step, net_backward, GradientBuffer};
pub use forward::{net_forward, net_forward_traced, ForwardTrace};
pub use gradcheck::{grad_check, grad_check_with, negative_control_backward};
pub use model::{
    build_config, init_model, Activation, AvgPoolLayer, ConfigName, ConvLayer, FcLayer,
    NetworkModel,
};
pub use serialize::{deserialize_model, serialize_model};
pub use tensor::Tensor3;

pub(crate) use forward::{activated, conv_forward, pool_region, rate_from_pooled};
