//! Detection pipelines.
//!
//! Two ways to find a pupil center:
//!
//! * **Two-stage** ([`detect_two_stage`]): downscale the image four times,
//!   scan it with a coarse 24x24 network, upsample the best window center to
//!   full resolution, then rate 89x89 windows around that estimate with the
//!   FINE network and keep the best one, subpixel-refined.
//! * **Direct** ([`detect_direct`]): scan the downscaled image with the
//!   25x25 single-stage network on every second position, re-rate the 9x9
//!   window origins around the winner per-pixel, and refine the maximum with
//!   the probability-weighted shift before mapping back to full resolution.
//!
//! All window ratings inside a response map are independent and evaluated in
//! parallel; given finalized models every operation here is pure.

mod patch;
mod response;
mod subpixel;

pub use patch::extract_patch;
pub use response::{argmax_response, coarse_response_map, fine_detect, Argmax, CoordSpace, ResponseMap};
pub use subpixel::{refine_subpixel, SubpixelShift};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::nn::{ConfigName, NetworkModel};

/// Neighborhood edge for the subpixel refinement window.
pub const REFINE_WINDOW: usize = 7;

/// Side of the per-pixel re-rating region around the fast scan's maximum;
/// chosen as the smallest region that fully contains the 7x7 refinement
/// window.
const LOCAL_REGION: usize = 9;

/// Maps a downscaled position to full resolution: the center of the source
/// pixel's `factor x factor` footprint, `pos * factor + (factor - 1) / 2`.
pub fn upsample_position(pos: (f64, f64), factor: usize) -> (f64, f64) {
    let offset = (factor as f64 - 1.0) / 2.0;
    (pos.0 * factor as f64 + offset, pos.1 * factor as f64 + offset)
}

/// Inverse of [`upsample_position`]: the downscaled-grid coordinate of a
/// full-resolution position. Training labels go through this, so a position
/// that survives a round trip through both mappings is unchanged.
pub fn downscale_position(pos: (f64, f64), factor: usize) -> (f64, f64) {
    let offset = (factor as f64 - 1.0) / 2.0;
    ((pos.0 - offset) / factor as f64, (pos.1 - offset) / factor as f64)
}

/// Knobs of the two-stage pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectSettings {
    /// Downscaling factor before the coarse scan.
    pub scale_factor: usize,
    /// Coarse scan stride (1 or 2).
    pub coarse_stride: usize,
    /// Search radius around the upsampled coarse estimate, in pixels.
    pub fine_radius: usize,
    /// Stride of the fine search grid. Subpixel refinement only applies
    /// when this is 1 (per-pixel responses exist around the maximum).
    pub fine_stride: usize,
}

impl Default for DetectSettings {
    fn default() -> Self {
        Self {
            scale_factor: 4,
            coarse_stride: 1,
            fine_radius: 10,
            fine_stride: 1,
        }
    }
}

/// Where a detection pipeline put the pupil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionResult {
    /// Best coarse-stage window center, in full-resolution coordinates.
    pub coarse_center: (f64, f64),
    /// Best fine-stage (or per-pixel re-rated) center, full resolution.
    pub fine_center: Option<(f64, f64)>,
    /// Final, subpixel-refined center, full resolution.
    pub refined_center: (f64, f64),
    /// Rating of the winning window, in `[0, 1]`.
    pub confidence: f32,
}

/// Runs the full two-stage pipeline: downscale, coarse scan, upsample, fine
/// search, subpixel refinement.
pub fn detect_two_stage(
    image: &GrayImage,
    coarse_model: &NetworkModel,
    fine_model: &NetworkModel,
    settings: &DetectSettings,
) -> Result<DetectionResult> {
    if !coarse_model.config.is_coarse() {
        return Err(Error::InvalidInput(format!(
            "first stage needs a coarse configuration (CK8P8, CK8P16 or CK16P32), got {}",
            coarse_model.config
        )));
    }
    let ds = image.downscale_bicubic(settings.scale_factor)?;
    let coarse_map = coarse_response_map(&ds, coarse_model, settings.coarse_stride)?;
    let coarse = argmax_response(&coarse_map);
    let coarse_full = upsample_position(coarse.center, settings.scale_factor);

    let fine_map = fine_detect(
        image,
        coarse_full,
        fine_model,
        settings.fine_radius,
        settings.fine_stride,
    )?;
    let fine = argmax_response(&fine_map);

    let refined = if settings.fine_stride == 1 {
        let shift = refine_subpixel(&fine_map, fine.grid, REFINE_WINDOW, REFINE_WINDOW)?;
        (fine.center.0 + shift.dx, fine.center.1 + shift.dy)
    } else {
        fine.center
    };

    Ok(DetectionResult {
        coarse_center: coarse_full,
        fine_center: Some(fine.center),
        refined_center: refined,
        confidence: fine.rating,
    })
}

/// Runs the inexpensive single-stage pipeline with the 25x25 network.
///
/// The downscaled image is scanned on every second position; the network is
/// then re-applied per pixel on the 9x9 window origins surrounding the
/// maximum, and the local maximum is refined with the subpixel shift. The
/// fractional shift survives the upsampling (it is scaled by the factor
/// along with the position).
pub fn detect_direct(image: &GrayImage, model: &NetworkModel) -> Result<DetectionResult> {
    if model.config != ConfigName::Sk8P8 {
        return Err(Error::InvalidInput(format!(
            "direct detection requires the SK8P8 configuration, got {}",
            model.config
        )));
    }
    let factor = 4;
    let ds = image.downscale_bicubic(factor)?;
    let fast_map = coarse_response_map(&ds, model, 2)?;
    let fast = argmax_response(&fast_map);
    let coarse_full = upsample_position(fast.center, factor);

    // Per-pixel origins around the winning window, clamped so the full
    // region stays inside the image.
    let size = model.input_size;
    let best_origin = (fast.grid.0 * 2, fast.grid.1 * 2);
    let span = |origin: usize, limit: usize| -> Vec<usize> {
        let reach = LOCAL_REGION - 1;
        let lo = if limit >= reach {
            (origin as i64 - (reach / 2) as i64).clamp(0, (limit - reach) as i64) as usize
        } else {
            0
        };
        (lo..=(lo + reach).min(limit)).collect()
    };
    let xs = span(best_origin.0, ds.width() - size);
    let ys = span(best_origin.1, ds.height() - size);
    let ratings = response::scan_windows(&ds, model, &xs, &ys)?;
    let half = (size - 1) as f64 / 2.0;
    let local_map = ResponseMap::from_parts(
        CoordSpace::Downscaled,
        (xs[0] as f64 + half, ys[0] as f64 + half),
        1,
        xs.len(),
        ys.len(),
        ratings,
    )?;

    let local = argmax_response(&local_map);
    let shift = refine_subpixel(&local_map, local.grid, REFINE_WINDOW, REFINE_WINDOW)?;
    let refined_ds = (local.center.0 + shift.dx, local.center.1 + shift.dy);

    Ok(DetectionResult {
        coarse_center: coarse_full,
        fine_center: Some(upsample_position(local.center, factor)),
        refined_center: upsample_position(refined_ds, factor),
        confidence: local.rating,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_config, init_model};
    use rand::{Rng, SeedableRng};

    fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.random::<u8>())
    }

    #[test]
    fn upsample_footprint_center() {
        assert_eq!(upsample_position((0.0, 0.0), 4), (1.5, 1.5));
        assert_eq!(upsample_position((24.0, 18.0), 4), (97.5, 73.5));
        assert_eq!(upsample_position((7.25, 3.0), 1), (7.25, 3.0));
    }

    #[test]
    fn downscale_position_inverts_upsample() {
        for p in [(0.0, 0.0), (193.5, 145.5), (37.25, 81.0)] {
            let down = downscale_position(p, 4);
            let up = upsample_position(down, 4);
            assert!((up.0 - p.0).abs() < 1e-12 && (up.1 - p.1).abs() < 1e-12);
        }
        assert_eq!(downscale_position((1.5, 1.5), 4), (0.0, 0.0));
    }

    #[test]
    fn radius_zero_two_stage_returns_upsampled_coarse() {
        let coarse = init_model(build_config(ConfigName::Ck8P8), 1);
        let fine = init_model(build_config(ConfigName::Fine), 2);
        let img = random_image(384, 288, 3);
        let settings = DetectSettings {
            fine_radius: 0,
            ..DetectSettings::default()
        };
        let r = detect_two_stage(&img, &coarse, &fine, &settings).unwrap();
        // One candidate window; its nominal center is the coarse estimate
        // and the 1x1 refinement window shifts by (0, 0).
        assert_eq!(r.refined_center, r.coarse_center);
        assert_eq!(r.fine_center, Some(r.coarse_center));
    }

    #[test]
    fn two_stage_is_deterministic() {
        let coarse = init_model(build_config(ConfigName::Ck8P16), 4);
        let fine = init_model(build_config(ConfigName::Fine), 5);
        let img = random_image(384, 288, 6);
        let a = detect_two_stage(&img, &coarse, &fine, &DetectSettings::default()).unwrap();
        let b = detect_two_stage(&img, &coarse, &fine, &DetectSettings::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn refined_center_stays_near_fine_center() {
        let coarse = init_model(build_config(ConfigName::Ck8P8), 7);
        let fine = init_model(build_config(ConfigName::Fine), 8);
        let img = random_image(384, 288, 9);
        let r = detect_two_stage(&img, &coarse, &fine, &DetectSettings::default()).unwrap();
        let f = r.fine_center.unwrap();
        assert!((r.refined_center.0 - f.0).abs() <= 3.5);
        assert!((r.refined_center.1 - f.1).abs() <= 3.5);
    }

    #[test]
    fn model_config_checked() {
        let coarse = init_model(build_config(ConfigName::Ck8P8), 10);
        let fine = init_model(build_config(ConfigName::Fine), 11);
        let img = random_image(384, 288, 12);
        assert!(detect_two_stage(&img, &fine, &fine, &DetectSettings::default()).is_err());
        assert!(detect_direct(&img, &coarse).is_err());
    }

    /// A hand-built model whose rating increases with window brightness:
    /// conv1 passes the center pixel through, conv2 averages, the perceptron
    /// amplifies. Makes response maps predictably peaked.
    fn brightness_model() -> NetworkModel {
        let mut m = build_config(ConfigName::Sk8P8);
        for oc in 0..m.conv1.out_channels {
            let f = m.conv1.filter;
            let idx = m.conv1.weight_index(oc, 0, f / 2, f / 2);
            m.conv1.weights[idx] = 1.0;
        }
        let n = m.conv2.weights.len() as f32;
        for w in m.conv2.weights.iter_mut() {
            *w = 1.0 / n;
        }
        for w in m.fc.weights.iter_mut() {
            *w = 4.0;
        }
        m
    }

    #[test]
    fn direct_two_phase_matches_exhaustive_scan_on_peaked_image() {
        // Bright radial blob: the response peaks where the window centers on
        // the blob, and the stride-2 + local re-rating must find the same
        // pixel as a full stride-1 scan.
        let model = brightness_model();
        for (bx, by, seed) in [(200.0, 150.0, 1u64), (96.0, 80.0, 2), (301.0, 212.0, 3)] {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let img = GrayImage::from_fn(384, 288, |x, y| {
                let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
                let v = 220.0 * (-d2 / 800.0).exp() + rng.random::<f64>() * 8.0;
                v.min(255.0) as u8
            });
            let r = detect_direct(&img, &model).unwrap();

            let ds = img.downscale_bicubic(4).unwrap();
            let full = coarse_response_map(&ds, &model, 1).unwrap();
            let best = argmax_response(&full);
            let expected = upsample_position(best.center, 4);
            assert_eq!(r.fine_center, Some(expected), "blob at ({bx},{by})");
        }
    }

    #[test]
    fn direct_detection_is_deterministic() {
        let model = init_model(build_config(ConfigName::Sk8P8), 20);
        let img = random_image(384, 288, 21);
        assert_eq!(
            detect_direct(&img, &model).unwrap(),
            detect_direct(&img, &model).unwrap()
        );
    }
}
