//! 8-bit grayscale raster and bicubic downscaling.
//!
//! Every pipeline input is a [`GrayImage`]: a row-major buffer of 8-bit
//! intensities. Downscaling uses Catmull-Rom bicubic interpolation
//! (`a = -0.5`) with clamped borders; an output pixel `(xo, yo)` samples the
//! source at `(xo * f + (f - 1) / 2, yo * f + (f - 1) / 2)`, the center of
//! the `f x f` footprint it replaces. The matching inverse mapping lives in
//! [`crate::detector::upsample_position`].

use crate::error::{Error, Result};

/// Single-channel 8-bit image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    /// Wraps a row-major pixel buffer. Fails if the length is not `width * height`.
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("image dimensions must be >= 1".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "pixel buffer has {} bytes, expected {} for {}x{}",
                pixels.len(),
                width * height,
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    /// Constant-intensity image.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Intensity at `(x, y)`; panics when out of bounds.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Intensity at a possibly out-of-range coordinate, with edge clamping.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.pixels[y * self.width + x]
    }

    /// The whole image as f32 intensities scaled to `[0, 1]` (divide by 255).
    pub fn to_normalized(&self) -> Vec<f32> {
        self.pixels.iter().map(|&p| p as f32 / 255.0).collect()
    }

    /// Downscales by an integer factor with Catmull-Rom bicubic interpolation.
    ///
    /// Dimensions not divisible by `factor` are cropped at the bottom/right
    /// so the top-left coordinate frame (where labels live) is preserved.
    /// Interpolated values are re-quantized to 8 bits by rounding half away
    /// from zero and clamping to `[0, 255]`.
    pub fn downscale_bicubic(&self, factor: usize) -> Result<GrayImage> {
        if factor < 1 {
            return Err(Error::InvalidInput("downscale factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let out_w = self.width / factor;
        let out_h = self.height / factor;
        if out_w == 0 || out_h == 0 {
            return Err(Error::InvalidInput(format!(
                "{}x{} image too small for downscale factor {}",
                self.width, self.height, factor
            )));
        }
        let crop_w = out_w * factor;
        let crop_h = out_h * factor;

        // Source sample positions share one fractional offset, so the 4-tap
        // kernel weights are constant across the image.
        let offset = (factor as f64 - 1.0) / 2.0;
        let t = offset - offset.floor();
        let weights = catmull_rom_weights(t);
        let base = |o: usize| (o * factor) as i64 + offset.floor() as i64;

        // Horizontal pass over the cropped region, kept in f64 until the end.
        let mut rows = vec![0.0f64; crop_h * out_w];
        for y in 0..crop_h {
            let row = &self.pixels[y * self.width..y * self.width + crop_w];
            for xo in 0..out_w {
                let b = base(xo);
                let mut acc = 0.0;
                for (k, w) in weights.iter().enumerate() {
                    let sx = (b + k as i64 - 1).clamp(0, crop_w as i64 - 1) as usize;
                    acc += w * row[sx] as f64;
                }
                rows[y * out_w + xo] = acc;
            }
        }

        // Vertical pass and quantization.
        let mut pixels = Vec::with_capacity(out_w * out_h);
        for yo in 0..out_h {
            let b = base(yo);
            for xo in 0..out_w {
                let mut acc = 0.0;
                for (k, w) in weights.iter().enumerate() {
                    let sy = (b + k as i64 - 1).clamp(0, crop_h as i64 - 1) as usize;
                    acc += w * rows[sy * out_w + xo];
                }
                pixels.push(acc.round().clamp(0.0, 255.0) as u8);
            }
        }

        GrayImage::new(out_w, out_h, pixels)
    }
}

/// Catmull-Rom (a = -0.5) weights for the four taps around a sample at
/// fractional position `t` in `[0, 1)`, in Horner form.
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Catmull-Rom kernel from its piecewise polynomial definition; the
    /// production path uses precomputed Horner-form weights instead.
    fn kernel(s: f64) -> f64 {
        let a = -0.5;
        let s = s.abs();
        if s <= 1.0 {
            (a + 2.0) * s.powi(3) - (a + 3.0) * s * s + 1.0
        } else if s < 2.0 {
            a * s.powi(3) - 5.0 * a * s * s + 8.0 * a * s - 4.0 * a
        } else {
            0.0
        }
    }

    /// Direct (non-separable) bicubic evaluation at a source position.
    fn bicubic_at(img: &GrayImage, sx: f64, sy: f64) -> f64 {
        let bx = sx.floor() as i64;
        let by = sy.floor() as i64;
        let mut acc = 0.0;
        for ky in -1..=2 {
            for kx in -1..=2 {
                let w = kernel(sx - (bx + kx) as f64) * kernel(sy - (by + ky) as f64);
                acc += w * img.get_clamped(bx + kx, by + ky) as f64;
            }
        }
        acc
    }

    #[test]
    fn paper_geometry_384x288_factor4() {
        let img = GrayImage::filled(384, 288, 10);
        let ds = img.downscale_bicubic(4).unwrap();
        assert_eq!((ds.width(), ds.height()), (96, 72));
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = GrayImage::filled(64, 48, 137);
        let ds = img.downscale_bicubic(4).unwrap();
        assert!(ds.pixels().iter().all(|&p| p == 137));
    }

    #[test]
    fn ramp_matches_direct_kernel_evaluation() {
        // Horizontal ramp 0..255; compare against the independent direct
        // 16-tap evaluation of the kernel at every sample point.
        let img = GrayImage::from_fn(96, 40, |x, _| ((x * 255) / 95) as u8);
        let ds = img.downscale_bicubic(4).unwrap();
        for yo in 0..ds.height() {
            for xo in 0..ds.width() {
                let expected = bicubic_at(&img, xo as f64 * 4.0 + 1.5, yo as f64 * 4.0 + 1.5)
                    .round()
                    .clamp(0.0, 255.0);
                let got = ds.get(xo, yo) as f64;
                assert!(
                    (got - expected).abs() <= 1.0,
                    "pixel ({xo},{yo}): got {got}, expected {expected}"
                );
            }
        }
    }

    #[test]
    fn random_image_matches_direct_kernel_evaluation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let img = GrayImage::from_fn(61, 47, |_, _| rng.random::<u8>());
        // 61x47 crops to 60x44 before scaling.
        let ds = img.downscale_bicubic(4).unwrap();
        assert_eq!((ds.width(), ds.height()), (15, 11));
        let cropped = GrayImage::from_fn(60, 44, |x, y| img.get(x, y));
        for yo in 0..ds.height() {
            for xo in 0..ds.width() {
                let expected = bicubic_at(&cropped, xo as f64 * 4.0 + 1.5, yo as f64 * 4.0 + 1.5)
                    .round()
                    .clamp(0.0, 255.0);
                assert!(
                    (ds.get(xo, yo) as f64 - expected).abs() <= 1.0,
                    "pixel ({xo},{yo})"
                );
            }
        }
    }

    #[test]
    fn factor_one_is_identity() {
        let img = GrayImage::from_fn(13, 9, |x, y| (x * 17 + y * 31) as u8);
        assert_eq!(img.downscale_bicubic(1).unwrap(), img);
    }

    #[test]
    fn factor_zero_rejected() {
        let img = GrayImage::filled(8, 8, 0);
        assert!(matches!(
            img.downscale_bicubic(0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn too_small_for_factor_rejected() {
        let img = GrayImage::filled(3, 3, 0);
        assert!(img.downscale_bicubic(4).is_err());
    }

    #[test]
    fn buffer_length_validated() {
        assert!(GrayImage::new(4, 4, vec![0; 15]).is_err());
        assert!(GrayImage::new(4, 4, vec![0; 16]).is_ok());
    }
}
