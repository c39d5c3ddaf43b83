//! Probability-weighted subpixel shift of a response maximum.
//!
//! The ratings in a square neighborhood of the maximum are normalized into a
//! distribution `D(x, y) = R(x, y) / sum(R)`, and the shift vector is the
//! distribution-weighted mean of the integer offsets from the center:
//! `shift = sum D(i, j) * (i, j)`. Adding the shift to the integer maximum
//! gives the refined position. The window is nominally `N x M` (7x7 here);
//! at map borders it shrinks symmetrically (for example to 5x7) so the
//! offsets stay centered on the true maximum.

use crate::detector::response::ResponseMap;
use crate::error::{Error, Result};

/// Fractional shift produced by [`refine_subpixel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubpixelShift {
    pub dx: f64,
    pub dy: f64,
    /// Set when every rating in the window was zero; the shift is then
    /// `(0, 0)` by convention.
    pub degenerate: bool,
}

/// Computes the shift vector from the `n x m` square of ratings centered at
/// `max_pos` (grid coordinates). Requires a stride-1 map, since the shift is
/// measured in pixels of the map's coordinate space; `|dx| <= n/2` and
/// `|dy| <= m/2` by construction.
pub fn refine_subpixel(
    map: &ResponseMap,
    max_pos: (usize, usize),
    n: usize,
    m: usize,
) -> Result<SubpixelShift> {
    if map.stride() != 1 {
        return Err(Error::InvalidInput(
            "subpixel refinement needs per-pixel (stride 1) responses".into(),
        ));
    }
    let (gx, gy) = max_pos;
    if gx >= map.grid_width() || gy >= map.grid_height() {
        return Err(Error::InvalidInput(format!(
            "maximum position ({gx},{gy}) outside the {}x{} grid",
            map.grid_width(),
            map.grid_height()
        )));
    }
    // Symmetric shrink at the borders.
    let hx = (n / 2).min(gx).min(map.grid_width() - 1 - gx) as i64;
    let hy = (m / 2).min(gy).min(map.grid_height() - 1 - gy) as i64;

    let mut sum = 0.0f64;
    for j in -hy..=hy {
        for i in -hx..=hx {
            sum += map.rating((gx as i64 + i) as usize, (gy as i64 + j) as usize) as f64;
        }
    }
    if sum <= 0.0 {
        return Ok(SubpixelShift {
            dx: 0.0,
            dy: 0.0,
            degenerate: true,
        });
    }
    let (mut dx, mut dy) = (0.0f64, 0.0f64);
    for j in -hy..=hy {
        for i in -hx..=hx {
            let d = map.rating((gx as i64 + i) as usize, (gy as i64 + j) as usize) as f64 / sum;
            dx += d * i as f64;
            dy += d * j as f64;
        }
    }
    Ok(SubpixelShift {
        dx,
        dy,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::response::CoordSpace;

    fn map_from(grid: Vec<f32>, w: usize, h: usize) -> ResponseMap {
        ResponseMap::from_parts(CoordSpace::Downscaled, (0.0, 0.0), 1, w, h, grid).unwrap()
    }

    #[test]
    fn uniform_window_gives_zero_shift() {
        let map = map_from(vec![0.3; 81], 9, 9);
        let s = refine_subpixel(&map, (4, 4), 7, 7).unwrap();
        assert!(s.dx.abs() < 1e-12 && s.dy.abs() < 1e-12);
        assert!(!s.degenerate);
    }

    #[test]
    fn delta_at_center_gives_zero_shift() {
        let mut grid = vec![0.0f32; 49];
        grid[3 * 7 + 3] = 1.0;
        let map = map_from(grid, 7, 7);
        let s = refine_subpixel(&map, (3, 3), 7, 7).unwrap();
        assert_eq!((s.dx, s.dy), (0.0, 0.0));
    }

    #[test]
    fn two_point_case_hand_derived() {
        // R = 1 at the center and 1 at offset (3,3): D = 0.5 each, so the
        // shift is 0.5 * (0,0) + 0.5 * (3,3) = (1.5, 1.5).
        let mut grid = vec![0.0f32; 49];
        grid[3 * 7 + 3] = 1.0;
        grid[6 * 7 + 6] = 1.0;
        let map = map_from(grid, 7, 7);
        let s = refine_subpixel(&map, (3, 3), 7, 7).unwrap();
        assert!((s.dx - 1.5).abs() < 1e-6 && (s.dy - 1.5).abs() < 1e-6);
    }

    #[test]
    fn all_zero_window_flagged_degenerate() {
        let map = map_from(vec![0.0; 49], 7, 7);
        let s = refine_subpixel(&map, (3, 3), 7, 7).unwrap();
        assert!(s.degenerate);
        assert_eq!((s.dx, s.dy), (0.0, 0.0));
    }

    #[test]
    fn border_window_shrinks_symmetrically() {
        // Maximum one cell from the left edge: only offsets -1..=1 in x are
        // usable, so |dx| <= 1 regardless of the mass distribution.
        let mut grid = vec![0.0f32; 9 * 9];
        grid[4 * 9 + 1] = 1.0;
        grid[4 * 9 + 2] = 1.0; // pull to the right
        let map = map_from(grid, 9, 9);
        let s = refine_subpixel(&map, (1, 4), 7, 7).unwrap();
        assert!((s.dx - 0.5).abs() < 1e-12);
        assert_eq!(s.dy, 0.0);
    }

    #[test]
    fn stride_two_map_rejected() {
        let map =
            ResponseMap::from_parts(CoordSpace::Downscaled, (0.0, 0.0), 2, 7, 7, vec![0.1; 49])
                .unwrap();
        assert!(refine_subpixel(&map, (3, 3), 7, 7).is_err());
    }

    #[test]
    fn shift_bounded_and_scale_invariant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let grid: Vec<f32> = (0..81).map(|_| rng.random::<f32>()).collect();
            let scaled: Vec<f32> = grid.iter().map(|&v| v * 37.5).collect();
            let map = map_from(grid, 9, 9);
            let map_scaled = map_from(scaled, 9, 9);
            let s = refine_subpixel(&map, (4, 4), 7, 7).unwrap();
            assert!(s.dx.abs() <= 3.0 && s.dy.abs() <= 3.0);
            let s2 = refine_subpixel(&map_scaled, (4, 4), 7, 7).unwrap();
            assert!((s.dx - s2.dx).abs() < 1e-6 && (s.dy - s2.dy).abs() < 1e-6);
        }
    }

    #[test]
    fn mirror_symmetry() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let grid: Vec<f32> = (0..49).map(|_| rng.random::<f32>()).collect();
            let mut mirrored = vec![0.0f32; 49];
            for y in 0..7 {
                for x in 0..7 {
                    mirrored[y * 7 + (6 - x)] = grid[y * 7 + x];
                }
            }
            let s = refine_subpixel(&map_from(grid, 7, 7), (3, 3), 7, 7).unwrap();
            let m = refine_subpixel(&map_from(mirrored, 7, 7), (3, 3), 7, 7).unwrap();
            assert!((s.dx + m.dx).abs() < 1e-12, "dx must mirror");
            assert!((s.dy - m.dy).abs() < 1e-12, "dy must be preserved");
        }
    }
}
