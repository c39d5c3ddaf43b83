//! Patch extraction with edge clamping.

use crate::image::GrayImage;
use crate::nn::Tensor3;

/// Cuts a `size x size` patch around an integer center, normalized to
/// `[0, 1]`.
///
/// The patch spans `[center - floor((size-1)/2), center + ceil((size-1)/2)]`
/// on each axis; for an odd `size` the center pixel is the geometric center,
/// for an even `size` it sits half a pixel up-left of it. Coordinates
/// outside the image are clamped to the nearest edge pixel, so any center is
/// valid and the result always holds exactly `size * size` values.
pub fn extract_patch(image: &GrayImage, center: (i64, i64), size: usize) -> Tensor3 {
    let half = (size as i64 - 1) / 2;
    let x0 = center.0 - half;
    let y0 = center.1 - half;
    let mut patch = Tensor3::zeros(size, size, 1);
    for y in 0..size {
        for x in 0..size {
            let v = image.get_clamped(x0 + x as i64, y0 + y as i64);
            patch.set(0, y, x, v as f32 / 255.0);
        }
    }
    patch
}
