//! The five network configurations and their construction.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Names of the five evaluated configurations.
///
/// The three `CK..` variants scan 24x24 windows of the downscaled image,
/// `Fine` rates 89x89 windows at full resolution, and `Sk8P8` is the direct
/// single-stage variant with a 25x25 input (odd, so the window has an exact
/// center pixel).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfigName {
    Ck8P8,
    Ck8P16,
    Ck16P32,
    Fine,
    Sk8P8,
}

impl ConfigName {
    pub const ALL: [ConfigName; 5] = [
        ConfigName::Ck8P8,
        ConfigName::Ck8P16,
        ConfigName::Ck16P32,
        ConfigName::Fine,
        ConfigName::Sk8P8,
    ];

    /// Canonical upper-case name used in model files and reports.
    pub fn as_str(self) -> &'static str {
        match self {
            ConfigName::Ck8P8 => "CK8P8",
            ConfigName::Ck8P16 => "CK8P16",
            ConfigName::Ck16P32 => "CK16P32",
            ConfigName::Fine => "FINE",
            ConfigName::Sk8P8 => "SK8P8",
        }
    }

    /// Side length of the square input patch.
    pub fn input_size(self) -> usize {
        match self {
            ConfigName::Ck8P8 | ConfigName::Ck8P16 | ConfigName::Ck16P32 => 24,
            ConfigName::Fine => 89,
            ConfigName::Sk8P8 => 25,
        }
    }

    /// True for the coarse-stage configurations that scan downscaled images.
    pub fn is_coarse(self) -> bool {
        matches!(
            self,
            ConfigName::Ck8P8 | ConfigName::Ck8P16 | ConfigName::Ck16P32
        )
    }
}

impl fmt::Display for ConfigName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConfigName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CK8P8" => Ok(ConfigName::Ck8P8),
            "CK8P16" => Ok(ConfigName::Ck8P16),
            "CK16P32" => Ok(ConfigName::Ck16P32),
            "FINE" | "F" => Ok(ConfigName::Fine),
            "SK8P8" => Ok(ConfigName::Sk8P8),
            other => Err(Error::UnknownConfig(other.to_string())),
        }
    }
}

/// Elementwise nonlinearity tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// Hyperbolic tangent, used on hidden feature maps.
    Tanh,
    /// Logistic sigmoid, used on the output so the rating lands in `[0, 1]`.
    Logistic,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the activation output `y = f(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Logistic => y * (1.0 - y),
        }
    }
}

/// Valid convolution: square filters, stride one, no padding.
///
/// Weights are stored flat in `[out_channel][in_channel][ky][kx]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub filter: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: Vec<f32>,
    pub biases: Vec<f32>,
}

impl ConvLayer {
    fn zeroed(filter: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            filter,
            in_channels,
            out_channels,
            weights: vec![0.0; out_channels * in_channels * filter * filter],
            biases: vec![0.0; out_channels],
        }
    }

    /// Flat index of weight `(oc, ic, ky, kx)`.
    #[inline]
    pub fn weight_index(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> usize {
        ((oc * self.in_channels + ic) * self.filter + ky) * self.filter + kx
    }

    /// Spatial output size for a square input, or an error when the filter
    /// does not fit.
    pub fn output_size(&self, input: usize) -> Result<usize> {
        if input < self.filter {
            return Err(Error::DimensionMismatch(format!(
                "convolution filter {} does not fit input of size {}",
                self.filter, input
            )));
        }
        Ok(input - self.filter + 1)
    }
}

/// Average pooling window; all five configurations use `window == stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AvgPoolLayer {
    pub window: usize,
    pub stride: usize,
}

/// Single output perceptron over the final `1x1xK` feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer {
    pub weights: Vec<f32>,
    pub bias: f32,
}

impl FcLayer {
    pub fn in_count(&self) -> usize {
        self.weights.len()
    }
}

/// A complete rating network: conv -> pool -> conv -> fully connected.
///
/// A forward pass over an `input_size x input_size` patch yields exactly one
/// scalar in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub config: ConfigName,
    pub input_size: usize,
    pub conv1: ConvLayer,
    pub pool: AvgPoolLayer,
    pub conv2: ConvLayer,
    pub fc: FcLayer,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl NetworkModel {
    /// Total number of learned parameters (weights and biases).
    pub fn parameter_count(&self) -> usize {
        self.conv1.weights.len()
            + self.conv1.biases.len()
            + self.conv2.weights.len()
            + self.conv2.biases.len()
            + self.fc.weights.len()
            + 1
    }

    /// The spatial/channel shape after each stage for this configuration:
    /// input, conv1 output, pooled, conv2 output. Dimensions are
    /// `(side, side, channels)`.
    pub fn shape_chain(&self) -> Result<[(usize, usize, usize); 4]> {
        let s1 = self.conv1.output_size(self.input_size)?;
        if s1 % self.pool.stride != 0 {
            return Err(Error::DimensionMismatch(format!(
                "conv1 output {} not divisible by pool stride {}",
                s1, self.pool.stride
            )));
        }
        let sp = s1 / self.pool.stride;
        let s2 = self.conv2.output_size(sp)?;
        Ok([
            (self.input_size, self.input_size, 1),
            (s1, s1, self.conv1.out_channels),
            (sp, sp, self.conv1.out_channels),
            (s2, s2, self.conv2.out_channels),
        ])
    }
}

/// Builds the unweighted skeleton for a named configuration.
///
/// All weights and biases start at zero; use [`init_model`] to draw the
/// Gaussian initialization.
pub fn build_config(config: ConfigName) -> NetworkModel {
    let (c1, k1, pool, c2, k2, p) = match config {
        ConfigName::Ck8P8 => (5, 8, 4, 5, 8, 8),
        ConfigName::Ck8P16 => (5, 8, 4, 5, 16, 16),
        ConfigName::Ck16P32 => (5, 16, 4, 5, 32, 32),
        ConfigName::Fine => (20, 8, 5, 14, 8, 8),
        ConfigName::Sk8P8 => (6, 8, 4, 5, 8, 8),
    };
    let model = NetworkModel {
        config,
        input_size: config.input_size(),
        conv1: ConvLayer::zeroed(c1, 1, k1),
        pool: AvgPoolLayer {
            window: pool,
            stride: pool,
        },
        conv2: ConvLayer::zeroed(c2, k1, k2),
        fc: FcLayer {
            weights: vec![0.0; p],
            bias: 0.0,
        },
        hidden_activation: Activation::Tanh,
        output_activation: Activation::Logistic,
    };
    debug_assert!(model.shape_chain().is_ok());
    model
}

/// Draws every weight independently from `N(0, 0.01^2)`; biases stay zero.
///
/// Deterministic for a fixed seed: weights are filled in serialization order
/// (conv1, conv2, fully connected).
pub fn init_model(mut model: NetworkModel, seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f64, 0.01).expect("valid stddev");
    let mut fill = |ws: &mut [f32]| {
        for w in ws {
            *w = normal.sample(&mut rng) as f32;
        }
    };
    fill(&mut model.conv1.weights);
    fill(&mut model.conv2.weights);
    fill(&mut model.fc.weights);
    model.conv1.biases.fill(0.0);
    model.conv2.biases.fill(0.0);
    model.fc.bias = 0.0;
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_dimensions_per_config() {
        let m = build_config(ConfigName::Ck8P8);
        assert_eq!((m.conv1.filter, m.conv1.out_channels), (5, 8));
        assert_eq!((m.pool.window, m.pool.stride), (4, 4));
        assert_eq!((m.conv2.filter, m.conv2.out_channels), (5, 8));
        assert_eq!(m.fc.in_count(), 8);
        assert_eq!(m.input_size, 24);

        let m = build_config(ConfigName::Ck8P16);
        assert_eq!(m.conv2.out_channels, 16);
        assert_eq!(m.fc.in_count(), 16);

        let m = build_config(ConfigName::Ck16P32);
        assert_eq!(m.conv1.out_channels, 16);
        assert_eq!(m.conv2.out_channels, 32);
        assert_eq!(m.fc.in_count(), 32);

        let m = build_config(ConfigName::Fine);
        assert_eq!((m.conv1.filter, m.pool.window, m.conv2.filter), (20, 5, 14));
        assert_eq!(m.input_size, 89);

        let m = build_config(ConfigName::Sk8P8);
        assert_eq!(m.conv1.filter, 6);
        assert_eq!(m.input_size, 25);
    }

    #[test]
    fn shape_chains_close_to_one_by_one() {
        for config in ConfigName::ALL {
            let chain = build_config(config).shape_chain().unwrap();
            assert_eq!(chain[3].0, 1, "{config}: conv2 must emit a 1x1 map");
        }
    }

    #[test]
    fn unknown_name_rejected() {
        let err = "CK9P9".parse::<ConfigName>().unwrap_err();
        assert!(matches!(err, Error::UnknownConfig(_)));
        assert!("sk8p8".parse::<ConfigName>().is_ok());
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_model(build_config(ConfigName::Ck8P8), 42);
        let b = init_model(build_config(ConfigName::Ck8P8), 42);
        assert_eq!(a, b);
        let c = init_model(build_config(ConfigName::Ck8P8), 43);
        assert_ne!(a, c);
    }

    #[test]
    fn init_statistics_and_bias() {
        // Pool weights from several seeds to reach 10k draws.
        let mut all = Vec::new();
        for seed in 0..6 {
            let m = init_model(build_config(ConfigName::Ck16P32), seed);
            all.extend(m.conv1.weights.iter().map(|&w| w as f64));
            all.extend(m.conv2.weights.iter().map(|&w| w as f64));
            assert!(m.conv1.biases.iter().all(|&b| b == 0.0));
            assert!(m.conv2.biases.iter().all(|&b| b == 0.0));
            assert_eq!(m.fc.bias, 0.0);
        }
        assert!(all.len() >= 10_000);
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!((std - 0.01).abs() < 0.001, "sample std {std}");
        assert!(mean.abs() < 0.001, "sample mean {mean}");
    }
}
