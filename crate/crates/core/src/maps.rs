//! Text localization maps: cylindrical Gaussian patches warped onto word
//! quads and composed into a single-channel target field.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{affine_from_quad, Point, QuadBox};

/// Default ratio between the Gaussian standard deviation and the patch
/// height. At the default 0.4 threshold the above-threshold band then covers
/// about 81% of the box height.
pub const DEFAULT_SIGMA_RATIO: f64 = 0.3;

/// Row-major 2-D field.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid("grid data length does not match dimensions"));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.push(self.get(x, y));
            }
        }
        Self {
            width: self.height,
            height: self.width,
            data,
        }
    }

    /// Copy of the `w x h` window at `(x0, y0)`; must lie inside the grid.
    pub fn window(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::invalid("window exceeds grid bounds"));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
        }
        Ok(Self { width: w, height: h, data })
    }
}

/// Single-channel map with values in `[0, 1]`. `scale` is the number of map
/// pixels per source-image pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    grid: Grid<f64>,
    scale: f64,
}

impl HeatMap {
    pub fn new(grid: Grid<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("heat map scale must be positive"));
        }
        if grid.data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("heat map values must lie in [0, 1]"));
        }
        Ok(Self { grid, scale })
    }

    /// Clamps values into `[0, 1]`; NaN becomes 0.
    pub fn from_clamped(mut grid: Grid<f64>, scale: f64) -> Result<Self> {
        for v in grid.data.iter_mut() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(grid, scale)
    }

    pub fn zeros(width: usize, height: usize, scale: f64) -> Result<Self> {
        Self::new(Grid::filled(width, height, 0.0), scale)
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.grid
    }

    pub fn into_grid(self) -> Grid<f64> {
        self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.grid.get(x, y)
    }

    pub fn values(&self) -> &[f64] {
        &self.grid.data
    }

    pub fn max_value(&self) -> f64 {
        self.grid.data.iter().copied().fold(0.0, f64::max)
    }

    /// Rounds every value to the nearest multiple of 1/255, as stored in an
    /// 8-bit PNG.
    pub fn quantized_u8(&self) -> Vec<u8> {
        self.grid.data.iter().map(|&v| (v * 255.0).round() as u8).collect()
    }

    pub fn from_u8(width: usize, height: usize, data: &[u8], scale: f64) -> Result<Self> {
        let values = data.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(Grid::from_vec(width, height, values)?, scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPatchSpec {
    pub width_px: usize,
    pub height_px: usize,
    /// sigma = sigma_ratio * height_px
    pub sigma_ratio: f64,
}

impl GaussianPatchSpec {
    pub fn sigma(&self) -> f64 {
        self.sigma_ratio * self.height_px as f64
    }
}

/// The raw cylindrical Gaussian profile `1/(2 pi sigma) exp(-my^2 / 2 sigma^2)`.
pub fn cylindrical_gaussian(my: f64, sigma: f64) -> f64 {
    (-(my * my) / (2.0 * sigma * sigma)).exp() / (2.0 * core::f64::consts::PI * sigma)
}

/// A `height_px x width_px` patch that is constant along x and Gaussian along
/// y, centred on row `(height_px - 1) / 2` and normalized to a peak of 1.
pub fn gaussian_patch(spec: GaussianPatchSpec) -> Result<HeatMap> {
    if spec.width_px == 0 || spec.height_px == 0 {
        return Err(Error::invalid("patch dimensions must be >= 1"));
    }
    if !(spec.sigma_ratio > 0.0 && spec.sigma_ratio <= 1.0) {
        return Err(Error::invalid("sigma_ratio must lie in (0, 1]"));
    }
    let sigma = spec.sigma();
    let peak = cylindrical_gaussian(0.0, sigma);
    let center = (spec.height_px as f64 - 1.0) / 2.0;
    let mut grid = Grid::filled(spec.width_px, spec.height_px, 0.0);
    for y in 0..spec.height_px {
        let v = (cylindrical_gaussian(y as f64 - center, sigma) / peak).min(1.0);
        grid.data[y * spec.width_px..(y + 1) * spec.width_px].fill(v);
    }
    HeatMap::new(grid, 1.0)
}

/// How overlapping patches combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Composition {
    /// Per-pixel maximum; keeps the map in `[0, 1]`.
    #[default]
    Max,
    /// Plain summation of the warped patches. Overlaps can exceed 1.
    Sum,
}

/// Renders the target map for an `image_w x image_h` image at the given scale.
pub fn render_map(image_w: usize, image_h: usize, quads: &[QuadBox], scale: f64, sigma_ratio: f64) -> Result<HeatMap> {
    let grid = render_grid(image_w, image_h, quads, scale, sigma_ratio, Composition::Max)?;
    HeatMap::new(grid, scale)
}

/// Renders with an explicit composition rule. With [`Composition::Sum`] the
/// result is not a valid [`HeatMap`], hence the raw grid.
pub fn render_grid(image_w: usize, image_h: usize, quads: &[QuadBox], scale: f64, sigma_ratio: f64, composition: Composition) -> Result<Grid<f64>> {
    if image_w == 0 || image_h == 0 {
        return Err(Error::invalid("image dimensions must be >= 1"));
    }
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::invalid("map scale must lie in (0, 1]"));
    }
    let map_w = (image_w as f64 * scale).round() as usize;
    let map_h = (image_h as f64 * scale).round() as usize;
    if map_w == 0 || map_h == 0 {
        return Err(Error::invalid("map would be empty at this scale"));
    }
    let mut grid = Grid::filled(map_w, map_h, 0.0);
    for quad in quads {
        stamp_quad(&mut grid, &quad.scaled(scale, scale), sigma_ratio, composition)?;
    }
    Ok(grid)
}

fn stamp_quad(grid: &mut Grid<f64>, quad: &QuadBox, sigma_ratio: f64, composition: Composition) -> Result<()> {
    let patch_w = (quad.width().round() as usize).max(1);
    let patch_h = (quad.height().round() as usize).max(1);
    let patch = gaussian_patch(GaussianPatchSpec {
        width_px: patch_w,
        height_px: patch_h,
        sigma_ratio,
    })?;
    let to_patch = affine_from_quad(quad, patch_w, patch_h)?.inverse();
    let bounds = quad.bounding_rect();
    let x_lo = bounds.x0.floor().max(0.0) as usize;
    let y_lo = bounds.y0.floor().max(0.0) as usize;
    let x_hi = (bounds.x1.ceil().max(0.0) as usize).min(grid.width);
    let y_hi = (bounds.y1.ceil().max(0.0) as usize).min(grid.height);
    let (pw, ph) = (patch_w as f64, patch_h as f64);
    for v in y_lo..y_hi {
        for u in x_lo..x_hi {
            let p = to_patch.apply(Point::new(u as f64 + 0.5, v as f64 + 0.5));
            if !(p.x >= 0.0 && p.x < pw && p.y >= 0.0 && p.y < ph) {
                continue;
            }
            let value = sample_bilinear(patch.grid(), p.x - 0.5, p.y - 0.5);
            let cell = &mut grid.data[v * grid.width + u];
            match composition {
                Composition::Max => *cell = cell.max(value),
                Composition::Sum => *cell += value,
            }
        }
    }
    Ok(())
}

/// Bilinear sample at continuous index coordinates, clamping to the edges.
fn sample_bilinear(grid: &Grid<f64>, x: f64, y: f64) -> f64 {
    let max_x = (grid.width - 1) as f64;
    let max_y = (grid.height - 1) as f64;
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = (x0 + 1).min(grid.width - 1);
    let y1 = (y0 + 1).min(grid.height - 1);
    let top = grid.get(x0, y0) * (1.0 - fx) + grid.get(x1, y0) * fx;
    let bottom = grid.get(x0, y1) * (1.0 - fx) + grid.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> QuadBox {
        QuadBox::from_rect(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn patch_peak_row_is_one() {
        for ratio in [0.1, 0.25, 0.7, 1.0] {
            let p = gaussian_patch(GaussianPatchSpec {
                width_px: 5,
                height_px: 9,
                sigma_ratio: ratio,
            })
            .unwrap();
            assert!((0..5).all(|x| p.get(x, 4) == 1.0));
        }
    }

    #[test]
    fn patch_one_sigma_offset() {
        let sigma = 2.25;
        let v = cylindrical_gaussian(sigma, sigma) / cylindrical_gaussian(0.0, sigma);
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
        assert!((v - 0.60653).abs() < 1e-5);
        // sigma = 4 and centre row 4, so row 0 sits exactly one sigma out.
        let p = gaussian_patch(GaussianPatchSpec {
            width_px: 1,
            height_px: 9,
            sigma_ratio: 4.0 / 9.0,
        })
        .unwrap();
        assert!((p.get(0, 0) - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_peak_matches_prefactor() {
        assert!((cylindrical_gaussian(0.0, 1.0) - 0.159_154_943).abs() < 1e-8);
    }

    #[test]
    fn invalid_patch_specs() {
        assert!(gaussian_patch(GaussianPatchSpec {
            width_px: 0,
            height_px: 3,
            sigma_ratio: 0.25
        })
        .is_err());
        assert!(gaussian_patch(GaussianPatchSpec {
            width_px: 3,
            height_px: 0,
            sigma_ratio: 0.25
        })
        .is_err());
        assert!(gaussian_patch(GaussianPatchSpec {
            width_px: 3,
            height_px: 3,
            sigma_ratio: 0.0
        })
        .is_err());
    }

    #[test]
    fn zero_quads_give_zero_map() {
        let m = render_map(40, 30, &[], 1.0, 0.25).unwrap();
        assert_eq!((m.width(), m.height()), (40, 30));
        assert!(m.values().iter().all(|&v| v == 0.0));
        assert!(render_map(0, 30, &[], 1.0, 0.25).is_err());
    }

    #[test]
    fn single_quad_peak_on_centerline() {
        // Odd height so the centre row falls on a pixel centre (row 30).
        let m = render_map(80, 60, &[rect(10., 20., 60., 41.)], 1.0, 0.25).unwrap();
        let (mut best, mut at) = (f64::MIN, (0, 0));
        for y in 0..m.height() {
            for x in 0..m.width() {
                if m.get(x, y) > best {
                    best = m.get(x, y);
                    at = (x, y);
                }
            }
        }
        assert_eq!(best, 1.0);
        assert_eq!(at.1, 30);
        assert!((10..60).all(|x| m.get(x, 30) == 1.0));
        assert_eq!(m.get(9, 30), 0.0);
        assert_eq!(m.get(60, 30), 0.0);
    }

    #[test]
    fn overlapping_quads_max_vs_sum() {
        let q = rect(10., 20., 60., 41.);
        let one = render_map(80, 60, &[q], 1.0, 0.25).unwrap();
        let two = render_map(80, 60, &[q, q], 1.0, 0.25).unwrap();
        assert_eq!(one, two);
        let summed = render_grid(80, 60, &[q, q], 1.0, 0.25, Composition::Sum).unwrap();
        let peak = summed.data().iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(peak, 2.0);
    }

    #[test]
    fn scaled_map_dimensions() {
        let m = render_map(401, 203, &[rect(100., 40., 200., 60.)], 0.25, 0.25).unwrap();
        assert_eq!((m.width(), m.height()), (100, 51));
        assert!(m.max_value() > 0.9);
    }

    proptest! {
        #[test]
        fn patch_symmetric(w in 1usize..8, h in 1usize..40, ratio in 0.05f64..1.0) {
            let p = gaussian_patch(GaussianPatchSpec { width_px: w, height_px: h, sigma_ratio: ratio }).unwrap();
            for y in 0..h {
                prop_assert!((p.get(0, y) - p.get(0, h - 1 - y)).abs() <= 1e-12);
            }
        }

        #[test]
        fn render_values_in_unit_range(
            boxes in proptest::collection::vec((0f64..70.0, 0f64..50.0, 2f64..30.0, 2f64..20.0), 0..8),
            scale in 0.2f64..1.0,
        ) {
            let quads: Vec<_> = boxes.iter().map(|&(x, y, w, h)| rect(x, y, x + w, y + h)).collect();
            let m = render_map(80, 60, &quads, scale, 0.25).unwrap();
            prop_assert!(m.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn render_translation_equivariant(
            boxes in proptest::collection::vec((5u32..30, 5u32..20, 3u32..25, 3u32..15), 1..5),
            dx in 0u32..20, dy in 0u32..15,
        ) {
            let quads: Vec<_> = boxes.iter()
                .map(|&(x, y, w, h)| rect(x as f64, y as f64, (x + w) as f64, (y + h) as f64))
                .collect();
            let shifted: Vec<_> = quads.iter().map(|q| q.translated(dx as f64, dy as f64)).collect();
            let (w, h) = (100usize, 80usize);
            let a = render_map(w, h, &quads, 1.0, 0.25).unwrap();
            let b = render_map(w, h, &shifted, 1.0, 0.25).unwrap();
            for y in 0..h - dy as usize {
                for x in 0..w - dx as usize {
                    prop_assert_eq!(a.get(x, y), b.get(x + dx as usize, y + dy as usize));
                }
            }
        }

        #[test]
        fn affine_round_trip(
            cx in -50f64..50.0, cy in -50f64..50.0, angle in -3.1f64..3.1,
            w in 2f64..60.0, h in 2f64..40.0, pw in 1usize..64, ph in 1usize..64,
        ) {
            let (c, s) = (angle.cos(), angle.sin());
            let p1 = Point::new(cx, cy);
            let p2 = Point::new(cx + c * w, cy + s * w);
            let p4 = Point::new(cx - s * h, cy + c * h);
            let p3 = Point::new(p2.x - s * h, p2.y + c * h);
            let q = QuadBox::new([p1, p2, p3, p4]).unwrap();
            let a = affine_from_quad(&q, pw, ph).unwrap();
            for (src, dst) in [(Point::new(0., 0.), p1), (Point::new(pw as f64, 0.), p2), (Point::new(0., ph as f64), p4)] {
                let m = a.apply(src);
                prop_assert!((m.x - dst.x).abs() < 1e-9 && (m.y - dst.y).abs() < 1e-9);
            }
        }
    }
}
