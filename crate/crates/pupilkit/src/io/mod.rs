//! Dataset loading: images, label manifests, and synthetic eye images.
//!
//! Accepted image inputs are binary 8-bit PGM (`P5`) and PNG (8-bit
//! grayscale or RGB; color is converted by the usual luminance weights
//! `0.299 R + 0.587 G + 0.114 B`, rounded half up). Labels arrive as CSV
//! manifests with one header line and `relative_image_path,x,y` rows; the
//! coordinate origin is the center of the top-left pixel, and sub-pixel
//! labels are allowed.

mod synth;

pub use synth::{synth_generate, write_synthetic_dataset, SyntheticParams};

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// One hand-labeled (or synthesized) frame.
#[derive(Debug, Clone)]
pub struct LabeledFrame {
    pub image: GrayImage,
    /// Pupil center in full-resolution image coordinates.
    pub pupil: (f64, f64),
    pub dataset_id: String,
    /// Position of the frame within its dataset; identifies the frame for
    /// validation splits and leakage checks.
    pub frame_index: usize,
}

/// A parsed label manifest: image paths (relative to the manifest location)
/// plus pupil coordinates, all validated against the referenced files.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub root: PathBuf,
    pub frames: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub pupil: (f64, f64),
}

/// Loads an 8-bit grayscale image, dispatching on the file's magic bytes.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes, path)
}

fn decode_image(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        return decode_pgm(bytes, path);
    }
    const PNG_MAGIC: &[u8] = &[0x89, b'P', b'N', b'G'];
    if bytes.starts_with(PNG_MAGIC) {
        return decode_png(bytes, path);
    }
    Err(Error::UnsupportedFormat(format!(
        "{}: only binary PGM (P5) and PNG are accepted",
        path.display()
    )))
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    use image::{DynamicImage, ImageFormat};
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
        Error::TruncatedFile(format!("{}: {e}", path.display()))
    })?;
    match img {
        DynamicImage::ImageLuma8(gray) => GrayImage::new(
            gray.width() as usize,
            gray.height() as usize,
            gray.into_raw(),
        ),
        DynamicImage::ImageRgb8(rgb) => {
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            let pixels = rgb
                .into_raw()
                .chunks_exact(3)
                .map(|p| luminance(p[0], p[1], p[2]))
                .collect();
            GrayImage::new(w, h, pixels)
        }
        other => Err(Error::UnsupportedFormat(format!(
            "{}: PNG pixel layout {:?} (need 8-bit gray or RGB)",
            path.display(),
            other.color()
        ))),
    }
}

/// ITU-R 601 luminance, rounded half up.
fn luminance(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64 + 0.5).floor() as u8
}

fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut pos = 2; // past "P5"
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        *field = pgm_header_number(bytes, &mut pos, path)?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: PGM maxval {} (only 8-bit supported)",
            path.display(),
            maxval
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let expected = width.checked_mul(height).ok_or_else(|| {
        Error::TruncatedFile(format!("{}: absurd dimensions", path.display()))
    })?;
    if bytes.len() < pos + expected {
        return Err(Error::TruncatedFile(format!(
            "{}: raster has {} of {} bytes",
            path.display(),
            bytes.len().saturating_sub(pos),
            expected
        )));
    }
    GrayImage::new(width, height, bytes[pos..pos + expected].to_vec())
}

/// Parses the next decimal number in a PGM header, skipping whitespace and
/// `#` comments.
fn pgm_header_number(bytes: &[u8], pos: &mut usize, path: &Path) -> Result<usize> {
    let truncated = || Error::TruncatedFile(format!("{}: header ended early", path.display()));
    loop {
        match bytes.get(*pos) {
            None => return Err(truncated()),
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b) if b.is_ascii_digit() => break,
            Some(b) => {
                return Err(Error::TruncatedFile(format!(
                    "{}: unexpected byte 0x{b:02x} in header",
                    path.display()
                )))
            }
        }
    }
    let mut value = 0usize;
    while let Some(&b) = bytes.get(*pos) {
        if !b.is_ascii_digit() {
            break;
        }
        value = value * 10 + (b - b'0') as usize;
        *pos += 1;
    }
    Ok(value)
}

/// Writes a binary 8-bit PGM file.
pub fn write_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a manifest CSV, verifying that every referenced image exists and
/// every label lies inside its image.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    // A file named `manifest.csv` names its dataset after the directory.
    let dataset_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| s != "manifest")
        .or_else(|| {
            root.file_name()
                .map(|s| s.to_string_lossy().into_owned())
        })
        .unwrap_or_else(|| "dataset".into());

    let err_at = |line: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut frames = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue; // header
        }
        let line_no = idx + 1;
        let mut parts = line.rsplitn(3, ',');
        let y_str = parts.next();
        let x_str = parts.next();
        let img_str = parts.next();
        let (Some(y_str), Some(x_str), Some(img_str)) = (y_str, x_str, img_str) else {
            return Err(err_at(line_no, format!("expected `image,x,y`, got `{line}`")));
        };
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| err_at(line_no, format!("{what} `{}` is not a number", s.trim())))
        };
        let x = parse(x_str, "x label")?;
        let y = parse(y_str, "y label")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(err_at(line_no, "non-finite label".into()));
        }
        let rel = PathBuf::from(img_str.trim());
        let full = root.join(&rel);
        let (w, h) = image_dimensions(&full)
            .map_err(|e| err_at(line_no, format!("image `{}`: {e}", rel.display())))?;
        if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
            return Err(err_at(
                line_no,
                format!("label ({x}, {y}) outside the {w}x{h} image"),
            ));
        }
        frames.push(ManifestEntry {
            image: rel,
            pupil: (x, y),
        });
    }
    if frames.is_empty() {
        return Err(err_at(1, "empty manifest".into()));
    }
    Ok(DatasetManifest {
        dataset_id,
        root,
        frames,
    })
}

/// Image dimensions without decoding the full raster.
fn image_dimensions(path: &Path) -> Result<(usize, usize)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") {
        let mut pos = 2;
        let w = pgm_header_number(&bytes, &mut pos, path)?;
        let h = pgm_header_number(&bytes, &mut pos, path)?;
        return Ok((w, h));
    }
    let (w, h) = image::load_from_memory(&bytes)
        .map_err(|e| Error::TruncatedFile(format!("{}: {e}", path.display())))
        .map(|i| (i.width() as usize, i.height() as usize))?;
    Ok((w, h))
}

/// Writes a manifest CSV (header plus one row per frame). Float labels use
/// the shortest lossless decimal form, so a write/read cycle is exact.
pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("image,x,y\n");
    for entry in &manifest.frames {
        out.push_str(&format!(
            "{},{},{}\n",
            entry.image.display(),
            entry.pupil.0,
            entry.pupil.1
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Fully loads every frame referenced by a manifest.
pub fn load_frames(manifest: &DatasetManifest) -> Result<Vec<LabeledFrame>> {
    manifest
        .frames
        .iter()
        .enumerate()
        .map(|(frame_index, entry)| {
            let image = load_image(manifest.root.join(&entry.image))?;
            Ok(LabeledFrame {
                image,
                pupil: entry.pupil,
                dataset_id: manifest.dataset_id.clone(),
                frame_index,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        let img = GrayImage::new(2, 2, vec![0, 255, 128, 64]).unwrap();
        write_pgm(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.pixels(), &[0, 255, 128, 64]);
        assert_eq!((back.width(), back.height()), (2, 2));
    }

    #[test]
    fn pgm_with_comment_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        fs::write(&path, b"P5\n# a comment\n3 1\n255\n\x01\x02\x03").unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.pixels(), &[1, 2, 3]);
    }

    #[test]
    fn truncated_pgm_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        fs::write(&path, b"P5\n4 4\n255\n\x00\x01").unwrap();
        assert!(matches!(
            load_image(&path),
            Err(Error::TruncatedFile(_))
        ));
    }

    #[test]
    fn unknown_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        fs::write(&path, b"GIF89a....").unwrap();
        assert!(matches!(
            load_image(&path),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn png_gray_and_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let gray_path = dir.path().join("g.png");
        image::GrayImage::from_raw(2, 1, vec![7, 200])
            .unwrap()
            .save(&gray_path)
            .unwrap();
        assert_eq!(load_image(&gray_path).unwrap().pixels(), &[7, 200]);

        let rgb_path = dir.path().join("c.png");
        image::RgbImage::from_raw(2, 1, vec![255, 255, 255, 255, 0, 0])
            .unwrap()
            .save(&rgb_path)
            .unwrap();
        // white -> 255; pure red -> round(0.299 * 255) = 76.
        assert_eq!(load_image(&rgb_path).unwrap().pixels(), &[255, 76]);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::filled(384, 288, 100);
        write_pgm(&img, dir.path().join("0001.pgm")).unwrap();
        let manifest = DatasetManifest {
            dataset_id: "ds".into(),
            root: dir.path().to_path_buf(),
            frames: vec![ManifestEntry {
                image: "0001.pgm".into(),
                pupil: (192.5, 144.0),
            }],
        };
        let mpath = dir.path().join("ds.csv");
        save_manifest(&manifest, &mpath).unwrap();
        let back = load_manifest(&mpath).unwrap();
        assert_eq!(back.frames, manifest.frames);
        assert_eq!(back.dataset_id, "ds");
        let frames = load_frames(&back).unwrap();
        assert_eq!(frames[0].pupil, (192.5, 144.0));
        assert_eq!(frames[0].frame_index, 0);
    }

    #[test]
    fn out_of_bounds_label_cites_line() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(&GrayImage::filled(384, 288, 0), dir.path().join("a.pgm")).unwrap();
        let mpath = dir.path().join("m.csv");
        fs::write(&mpath, "image,x,y\na.pgm,500,100\n").unwrap();
        match load_manifest(&mpath) {
            Err(Error::Manifest { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected manifest error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_label_cites_line() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(&GrayImage::filled(8, 8, 0), dir.path().join("a.pgm")).unwrap();
        let mpath = dir.path().join("m.csv");
        fs::write(&mpath, "image,x,y\na.pgm,3,2\na.pgm,x7,2\n").unwrap();
        match load_manifest(&mpath) {
            Err(Error::Manifest { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("x7"));
            }
            other => panic!("expected manifest error, got {other:?}"),
        }
    }

    #[test]
    fn empty_manifest_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mpath = dir.path().join("m.csv");
        fs::write(&mpath, "image,x,y\n").unwrap();
        assert!(matches!(load_manifest(&mpath), Err(Error::Manifest { .. })));
    }

    #[test]
    fn missing_image_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mpath = dir.path().join("m.csv");
        fs::write(&mpath, "image,x,y\nnope.pgm,1,1\n").unwrap();
        assert!(load_manifest(&mpath).is_err());
    }
}
