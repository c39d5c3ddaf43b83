//! Synthetic labeled eye images for desk-scale training and tests.
//!
//! Each frame is a sclera-gray background with an iris disc and a darker
//! rotated pupil ellipse at a random position, optionally disturbed by
//! bright reflection blobs (which may overlap the pupil), Gaussian blur and
//! additive Gaussian noise. The label is the exact ellipse center.
//! Generation is deterministic per seed and independent per frame, so frames
//! can be produced in parallel.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::io::{save_manifest, write_pgm, DatasetManifest, LabeledFrame, ManifestEntry};

/// Geometry, contrast and disturbance ranges for the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub width: usize,
    pub height: usize,
    /// Pupil semi-axis range, pixels.
    pub pupil_radius: (f64, f64),
    /// Iris radius range, pixels; must lie strictly above the pupil range.
    pub iris_radius: (f64, f64),
    pub pupil_intensity: (u8, u8),
    pub iris_intensity: (u8, u8),
    pub sclera_intensity: (u8, u8),
    /// How many bright reflection blobs to draw, inclusive range.
    pub reflection_count: (usize, usize),
    pub reflection_intensity: (u8, u8),
    /// Standard deviation of the additive Gaussian pixel noise.
    pub noise_sigma: f64,
    /// Standard deviation of the Gaussian blur applied before the noise.
    pub blur_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            width: 384,
            height: 288,
            pupil_radius: (8.0, 20.0),
            iris_radius: (34.0, 56.0),
            pupil_intensity: (5, 45),
            iris_intensity: (70, 130),
            sclera_intensity: (150, 215),
            reflection_count: (0, 3),
            reflection_intensity: (220, 255),
            noise_sigma: 8.0,
            blur_sigma: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticParams {
    fn validate(&self) -> Result<()> {
        if self.pupil_radius.1 >= self.iris_radius.0 {
            return Err(Error::InvalidInput(format!(
                "infeasible geometry: pupil radius up to {} not below iris radius from {}",
                self.pupil_radius.1, self.iris_radius.0
            )));
        }
        if self.pupil_intensity.1 >= self.iris_intensity.0
            || self.iris_intensity.1 >= self.sclera_intensity.0
        {
            return Err(Error::InvalidInput(
                "intensities must satisfy pupil < iris < sclera".into(),
            ));
        }
        let margin = self.iris_radius.1.ceil() as usize * 2 + 4;
        if self.width < margin || self.height < margin {
            return Err(Error::InvalidInput(format!(
                "{}x{} image cannot fit an iris of radius {}",
                self.width, self.height, self.iris_radius.1
            )));
        }
        Ok(())
    }
}

/// SplitMix64 step; gives every frame an independent, reproducible stream.
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generates `count` labeled frames.
pub fn synth_generate(
    params: &SyntheticParams,
    count: usize,
    dataset_id: &str,
) -> Result<Vec<LabeledFrame>> {
    params.validate()?;
    (0..count)
        .map(|i| {
            let (image, pupil) = render_frame(params, mix_seed(params.seed, i as u64));
            Ok(LabeledFrame {
                image,
                pupil,
                dataset_id: dataset_id.to_string(),
                frame_index: i,
            })
        })
        .collect()
}

fn render_frame(params: &SyntheticParams, seed: u64) -> (GrayImage, (f64, f64)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (params.width, params.height);

    let iris_r = rng.random_range(params.iris_radius.0..=params.iris_radius.1);
    let margin = iris_r.ceil() + 2.0;
    let cx = rng.random_range(margin..=(w as f64 - 1.0 - margin));
    let cy = rng.random_range(margin..=(h as f64 - 1.0 - margin));
    let axis_a = rng.random_range(params.pupil_radius.0..=params.pupil_radius.1);
    let axis_b = rng.random_range(params.pupil_radius.0..=params.pupil_radius.1);
    let theta = rng.random_range(0.0..std::f64::consts::PI);
    let (sin_t, cos_t) = theta.sin_cos();

    let pupil_v = rng.random_range(params.pupil_intensity.0..=params.pupil_intensity.1) as f64;
    let iris_v = rng.random_range(params.iris_intensity.0..=params.iris_intensity.1) as f64;
    let sclera_v = rng.random_range(params.sclera_intensity.0..=params.sclera_intensity.1) as f64;

    let mut buf = vec![sclera_v; w * h];
    let iris_r2 = iris_r * iris_r;
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if dx * dx + dy * dy > iris_r2 {
                continue;
            }
            let u = (dx * cos_t + dy * sin_t) / axis_a;
            let v = (-dx * sin_t + dy * cos_t) / axis_b;
            buf[y * w + x] = if u * u + v * v <= 1.0 { pupil_v } else { iris_v };
        }
    }

    // Bright blobs near the eye; they may cover parts of the pupil.
    let blobs = rng.random_range(params.reflection_count.0..=params.reflection_count.1);
    for _ in 0..blobs {
        let dist = rng.random_range(0.0..=2.0 * iris_r);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let bx = cx + dist * angle.cos();
        let by = cy + dist * angle.sin();
        let br = rng.random_range(2.0..=6.0);
        let bv =
            rng.random_range(params.reflection_intensity.0..=params.reflection_intensity.1) as f64;
        let x0 = ((bx - br).floor().max(0.0)) as usize;
        let x1 = ((bx + br).ceil().min(w as f64 - 1.0)) as usize;
        let y0 = ((by - br).floor().max(0.0)) as usize;
        let y1 = ((by + br).ceil().min(h as f64 - 1.0)) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
                if d2 <= br * br {
                    buf[y * w + x] = bv;
                }
            }
        }
    }

    if params.blur_sigma > 0.0 {
        gaussian_blur(&mut buf, w, h, params.blur_sigma);
    }

    if params.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, params.noise_sigma).expect("valid sigma");
        for v in buf.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    let pixels = buf
        .into_iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    (
        GrayImage::new(w, h, pixels).expect("generator dims valid"),
        (cx, cy),
    )
}

/// Separable Gaussian blur with edge clamping.
fn gaussian_blur(buf: &mut [f64], w: usize, h: usize, sigma: f64) {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= sum;
    }

    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let sx = (x as i64 + k as i64 - radius).clamp(0, w as i64 - 1) as usize;
                acc += kv * buf[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let sy = (y as i64 + k as i64 - radius).clamp(0, h as i64 - 1) as usize;
                acc += kv * tmp[sy * w + x];
            }
            buf[y * w + x] = acc;
        }
    }
}

/// Renders a dataset to disk: zero-padded PGM files plus a `manifest.csv`.
/// Returns the manifest path.
pub fn write_synthetic_dataset(
    params: &SyntheticParams,
    count: usize,
    dir: impl AsRef<Path>,
) -> Result<std::path::PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dataset_id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "synthetic".into());
    let frames = synth_generate(params, count, &dataset_id)?;
    let mut entries = Vec::with_capacity(frames.len());
    for frame in &frames {
        let name = format!("{:05}.pgm", frame.frame_index);
        write_pgm(&frame.image, dir.join(&name))?;
        entries.push(ManifestEntry {
            image: name.into(),
            pupil: frame.pupil,
        });
    }
    let manifest = DatasetManifest {
        dataset_id,
        root: dir.to_path_buf(),
        frames: entries,
    };
    let manifest_path = dir.join("manifest.csv");
    save_manifest_or_header(&manifest, &manifest_path)?;
    Ok(manifest_path)
}

/// Zero frames still produce a manifest with the header line.
fn save_manifest_or_header(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    if manifest.frames.is_empty() {
        return std::fs::write(path, "image,x,y\n").map_err(|e| Error::io(path, e));
    }
    save_manifest(manifest, path)
}
