//! CPU-only pupil center detection with tiny convolutional networks.
//!
//! The toolkit covers the full loop: five small rating networks
//! ([`nn`]), sliding-window detection pipelines with subpixel refinement
//! ([`detector`]), training-sample generation and the multi-round batch
//! gradient-descent schedule ([`trainer`]), image/label/synthetic-data I/O
//! ([`io`]) and a detection-rate evaluation harness ([`eval`]).
//!
//! A two-stage detection downscales the input image four times, scans it
//! with a coarse 24x24 network, upsamples the best window position and
//! refines it with an 89x89 network at full resolution. The direct,
//! real-time variant scans the downscaled image with a single 25x25 network
//! on every second position, re-rates the pixels around the best hit, and
//! sharpens the result with a probability-weighted subpixel shift.
//!
//! ```
//! use pupilkit::nn::{build_config, net_forward, ConfigName};
//! use pupilkit::nn::Tensor3;
//!
//! // An unweighted network rates everything 0.5 — logistic of zero.
//! let model = build_config(ConfigName::Sk8P8);
//! let patch = Tensor3::zeros(25, 25, 1);
//! assert_eq!(net_forward(&model, &patch).unwrap(), 0.5);
//! ```

pub mod detector;
pub mod error;
pub mod eval;
pub mod image;
pub mod io;
pub mod nn;
pub mod trainer;

pub use error::{Error, Result};
pub use image::GrayImage;
