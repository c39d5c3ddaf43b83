//! Sliding-window evaluation and response maps.
//!
//! A [`ResponseMap`] is the grid of network ratings obtained by rating a
//! window at many positions. Scanning shares the first convolution across
//! overlapping windows: the convolution is translation-invariant, so each
//! window's first feature maps are crops of one globally computed map. The
//! arithmetic (accumulation order, f64 sums, f32 stores) is identical to
//! rating each window in isolation, which keeps both routes bit-equal — the
//! tests pin that equality against a naive per-window loop.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::nn::{self, NetworkModel, Tensor3};

/// Which coordinate frame a response map's positions live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordSpace {
    /// Positions on the 4x-downscaled image.
    Downscaled,
    /// Positions on the original input image.
    Full,
}

/// Grid of ratings in `[0, 1]` with enough geometry to map cells back to
/// image coordinates: cell `(i, j)` sits at `origin + stride * (i, j)`.
#[derive(Debug, Clone)]
pub struct ResponseMap {
    space: CoordSpace,
    origin: (f64, f64),
    stride: usize,
    grid_width: usize,
    grid_height: usize,
    ratings: Vec<f32>,
}

impl ResponseMap {
    pub fn space(&self) -> CoordSpace {
        self.space
    }

    /// Image coordinates of cell `(0, 0)` (a window center).
    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    /// Pixels between neighboring evaluated centers.
    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn grid_width(&self) -> usize {
        self.grid_width
    }

    pub fn grid_height(&self) -> usize {
        self.grid_height
    }

    pub fn ratings(&self) -> &[f32] {
        &self.ratings
    }

    #[inline]
    pub fn rating(&self, i: usize, j: usize) -> f32 {
        self.ratings[j * self.grid_width + i]
    }

    /// Image coordinates of grid cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (self.stride * i) as f64,
            self.origin.1 + (self.stride * j) as f64,
        )
    }

    /// Builds a map from raw parts; mainly useful in tests and for the
    /// subpixel refinement of synthetic grids.
    pub fn from_parts(
        space: CoordSpace,
        origin: (f64, f64),
        stride: usize,
        grid_width: usize,
        grid_height: usize,
        ratings: Vec<f32>,
    ) -> Result<Self> {
        if ratings.len() != grid_width * grid_height {
            return Err(Error::DimensionMismatch(format!(
                "{} ratings for a {}x{} grid",
                ratings.len(),
                grid_width,
                grid_height
            )));
        }
        if grid_width == 0 || grid_height == 0 || stride == 0 {
            return Err(Error::InvalidInput("empty response grid".into()));
        }
        Ok(Self {
            space,
            origin,
            stride,
            grid_width,
            grid_height,
            ratings,
        })
    }
}

/// Highest-rated cell of a response map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Argmax {
    /// Grid coordinates (column, row) of the maximum.
    pub grid: (usize, usize),
    /// Image coordinates of that cell's window center.
    pub center: (f64, f64),
    /// The winning rating.
    pub rating: f32,
}

/// Returns the maximal cell; ties break to the smallest row, then the
/// smallest column, independent of evaluation order.
pub fn argmax_response(map: &ResponseMap) -> Argmax {
    let mut best = (0usize, 0usize);
    let mut best_rating = f32::NEG_INFINITY;
    for j in 0..map.grid_height {
        for i in 0..map.grid_width {
            let r = map.rating(i, j);
            if r > best_rating {
                best_rating = r;
                best = (i, j);
            }
        }
    }
    Argmax {
        grid: best,
        center: map.cell_center(best.0, best.1),
        rating: best_rating,
    }
}

/// Rates every window whose top-left corner is in `xs` x `ys`.
///
/// Shares the first convolution over the bounding region of all windows;
/// rows of the grid are rated in parallel into disjoint output cells.
pub(crate) fn scan_windows(
    image: &GrayImage,
    model: &NetworkModel,
    xs: &[usize],
    ys: &[usize],
) -> Result<Vec<f32>> {
    let size = model.input_size;
    let rx0 = *xs.iter().min().unwrap();
    let rx1 = xs.iter().max().unwrap() + size;
    let ry0 = *ys.iter().min().unwrap();
    let ry1 = ys.iter().max().unwrap() + size;
    debug_assert!(rx1 <= image.width() && ry1 <= image.height());

    // Normalized region tensor; same `v / 255` scaling as patch extraction.
    let (rw, rh) = (rx1 - rx0, ry1 - ry0);
    let mut region = Tensor3::zeros(rw, rh, 1);
    for y in 0..rh {
        for x in 0..rw {
            region.set(0, y, x, image.get(rx0 + x, ry0 + y) as f32 / 255.0);
        }
    }

    let conv1 = nn::conv_forward(&region, &model.conv1)?;
    let act1 = nn::activated(&conv1, model.hidden_activation);
    let crop = size - model.conv1.filter + 1;

    let mut ratings = vec![0.0f32; xs.len() * ys.len()];
    ratings
        .par_chunks_mut(xs.len())
        .zip(ys.par_iter())
        .try_for_each(|(row, &y0)| -> Result<()> {
            for (cell, &x0) in row.iter_mut().zip(xs) {
                let pooled =
                    nn::pool_region(&act1, (x0 - rx0, y0 - ry0), (crop, crop), &model.pool)?;
                *cell = nn::rate_from_pooled(model, pooled)?.rating;
            }
            Ok(())
        })?;
    Ok(ratings)
}

/// Scans the whole image with `model`-sized windows on a stride grid.
///
/// This is the first detection stage: on the downscaled image it rates
/// every window position (stride 1), or every second one (stride 2) in the
/// fast scanning mode. The grid covers `floor((W - S) / stride) + 1` by
/// `floor((H - S) / stride) + 1` windows.
pub fn coarse_response_map(
    image_ds: &GrayImage,
    model: &NetworkModel,
    stride: usize,
) -> Result<ResponseMap> {
    let size = model.input_size;
    if image_ds.width() < size || image_ds.height() < size {
        return Err(Error::InvalidInput(format!(
            "{}x{} image is smaller than the {}x{} scan window",
            image_ds.width(),
            image_ds.height(),
            size,
            size
        )));
    }
    if !(1..=2).contains(&stride) {
        return Err(Error::InvalidInput(format!(
            "scan stride must be 1 or 2, got {stride}"
        )));
    }
    let xs: Vec<usize> = (0..=image_ds.width() - size).step_by(stride).collect();
    let ys: Vec<usize> = (0..=image_ds.height() - size).step_by(stride).collect();
    let ratings = scan_windows(image_ds, model, &xs, &ys)?;
    let half = (size - 1) as f64 / 2.0;
    ResponseMap::from_parts(
        CoordSpace::Downscaled,
        (half, half),
        stride,
        xs.len(),
        ys.len(),
        ratings,
    )
}

/// Rates candidate windows around a coarse estimate at full resolution.
///
/// Candidate centers keep their nominal (possibly fractional) coordinates
/// `coarse + (i, j) * stride` for `i, j` in `[-radius, radius]`; the actual
/// pixel window for each candidate is anchored at the rounded center and
/// clamped to lie fully inside the image.
pub fn fine_detect(
    image: &GrayImage,
    coarse: (f64, f64),
    model: &NetworkModel,
    radius: usize,
    stride: usize,
) -> Result<ResponseMap> {
    if model.config != crate::nn::ConfigName::Fine {
        return Err(Error::InvalidInput(format!(
            "fine positioning requires the FINE configuration, got {}",
            model.config
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be >= 1".into()));
    }
    let size = model.input_size;
    if image.width() < size || image.height() < size {
        return Err(Error::InvalidInput(format!(
            "{}x{} image is smaller than the {size}x{size} fine window",
            image.width(),
            image.height()
        )));
    }
    let half = (size as i64 - 1) / 2;
    let clamp_origin = |nominal: f64, limit: usize| -> usize {
        let origin = nominal.round() as i64 - half;
        origin.clamp(0, (limit - size) as i64) as usize
    };
    let offsets: Vec<i64> = (-(radius as i64)..=radius as i64)
        .step_by(stride)
        .collect();
    let xs: Vec<usize> = offsets
        .iter()
        .map(|&d| clamp_origin(coarse.0 + d as f64, image.width()))
        .collect();
    let ys: Vec<usize> = offsets
        .iter()
        .map(|&d| clamp_origin(coarse.1 + d as f64, image.height()))
        .collect();
    let ratings = scan_windows(image, model, &xs, &ys)?;
    ResponseMap::from_parts(
        CoordSpace::Full,
        (coarse.0 - radius as f64, coarse.1 - radius as f64),
        stride,
        xs.len(),
        ys.len(),
        ratings,
    )
}
