use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::QuadBox;
use crate::imaging::{binarize, border_following_rects, dilate, labeling_rects};
use crate::maps::HeatMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComponentMethod {
    #[default]
    BorderFollowing,
    Labeling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocessParams {
    pub threshold: f64,
    /// Odd kernel width and height.
    pub dilation_kernel: (usize, usize),
    pub dilation_iters: usize,
    /// Components whose bounding rectangle covers fewer map pixels are dropped.
    pub min_box_area_px: usize,
    pub method: ComponentMethod,
}

impl Default for PostprocessParams {
    fn default() -> Self {
        Self {
            threshold: 0.4,
            dilation_kernel: (3, 3),
            dilation_iters: 1,
            min_box_area_px: 4,
            method: ComponentMethod::BorderFollowing,
        }
    }
}

impl PostprocessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid("threshold must lie in (0, 1)"));
        }
        let (kw, kh) = self.dilation_kernel;
        if kw % 2 == 0 || kh % 2 == 0 {
            return Err(Error::invalid("dilation kernel sides must be odd"));
        }
        Ok(())
    }
}

/// Threshold, dilate and box the connected regions of a map. Boxes come
/// back in source-image pixels: map coordinates are divided by
/// `map.scale() * scale_back.0` along x and `map.scale() * scale_back.1`
/// along y, where `scale_back` is the resize applied before the map was made.
pub fn localize_from_map(map: &HeatMap, params: &PostprocessParams, scale_back: (f64, f64)) -> Result<Vec<QuadBox>> {
    params.validate()?;
    if !(scale_back.0 > 0.0 && scale_back.1 > 0.0) {
        return Err(Error::invalid("scale_back factors must be positive"));
    }
    let (kw, kh) = params.dilation_kernel;
    let mask = dilate(&binarize(map, params.threshold), kw, kh, params.dilation_iters);
    let rects = match params.method {
        ComponentMethod::BorderFollowing => border_following_rects(&mask),
        ComponentMethod::Labeling => labeling_rects(&mask),
    };
    let fx = map.scale() * scale_back.0;
    let fy = map.scale() * scale_back.1;
    rects
        .into_iter()
        .filter(|r| r.area() >= params.min_box_area_px)
        .map(|r| QuadBox::from_rect(r.x0 as f64 / fx, r.y0 as f64 / fy, r.x1 as f64 / fx, r.y1 as f64 / fy))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::iou;
    use crate::maps::{render_map, DEFAULT_SIGMA_RATIO};
    use proptest::prelude::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> QuadBox {
        QuadBox::from_rect(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn empty_map_gives_no_boxes() {
        let m = HeatMap::zeros(30, 20, 1.0).unwrap();
        assert!(localize_from_map(&m, &PostprocessParams::default(), (1.0, 1.0)).unwrap().is_empty());
    }

    #[test]
    fn single_quad_round_trip() {
        let q = rect(20., 15., 90., 35.);
        let m = render_map(120, 60, &[q], 1.0, DEFAULT_SIGMA_RATIO).unwrap();
        let boxes = localize_from_map(&m, &PostprocessParams::default(), (1.0, 1.0)).unwrap();
        assert_eq!(boxes.len(), 1);
        assert!(iou(&boxes[0], &q) >= 0.8, "iou {}", iou(&boxes[0], &q));
    }

    #[test]
    fn separation_and_merging() {
        let a = rect(10., 10., 50., 30.);
        let far = rect(70., 10., 110., 30.);
        let m = render_map(130, 40, &[a, far], 1.0, DEFAULT_SIGMA_RATIO).unwrap();
        assert_eq!(localize_from_map(&m, &PostprocessParams::default(), (1.0, 1.0)).unwrap().len(), 2);

        // A one pixel gap closes under a 3x3 dilation.
        let near = rect(51., 10., 90., 30.);
        let m = render_map(130, 40, &[a, near], 1.0, DEFAULT_SIGMA_RATIO).unwrap();
        let boxes = localize_from_map(&m, &PostprocessParams::default(), (1.0, 1.0)).unwrap();
        assert_eq!(boxes.len(), 1);
        // Without dilation the gap survives.
        let no_dilate = PostprocessParams {
            dilation_iters: 0,
            ..Default::default()
        };
        assert_eq!(localize_from_map(&m, &no_dilate, (1.0, 1.0)).unwrap().len(), 2);
    }

    #[test]
    fn scale_back_to_source_pixels() {
        // Source quad at x in [100, 200] after a 0.5 resize sits at [50, 100]
        // of the resized image; the map is 1/4 of that.
        let q = rect(100., 40., 200., 80.);
        let resized = q.scaled(0.5, 0.5);
        let m = render_map(160, 80, &[resized], 0.25, DEFAULT_SIGMA_RATIO).unwrap();
        let boxes = localize_from_map(&m, &PostprocessParams::default(), (0.5, 0.5)).unwrap();
        assert_eq!(boxes.len(), 1);
        assert!(iou(&boxes[0], &q) >= 0.5);
        assert!(localize_from_map(
            &m,
            &PostprocessParams {
                threshold: 1.0,
                ..Default::default()
            },
            (1.0, 1.0)
        )
        .is_err());
        assert!(localize_from_map(
            &m,
            &PostprocessParams {
                dilation_kernel: (2, 3),
                ..Default::default()
            },
            (1.0, 1.0)
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn well_separated_round_trip(
            cells in proptest::collection::vec((0u32..3, 8u32..24, 20u32..60), 1..9),
        ) {
            // One box per 80x40 grid cell, so neighbours never come closer
            // than the cell padding.
            let mut quads = Vec::new();
            for (i, &(dx, h, w)) in cells.iter().enumerate() {
                let cx = (i % 3) as f64 * 80.0 + 6.0 + dx as f64;
                let cy = (i / 3) as f64 * 40.0 + 6.0;
                quads.push(rect(cx, cy, cx + w as f64, cy + h as f64));
            }
            let m = render_map(240, 120, &quads, 1.0, DEFAULT_SIGMA_RATIO).unwrap();
            let boxes = localize_from_map(&m, &PostprocessParams::default(), (1.0, 1.0)).unwrap();
            prop_assert_eq!(boxes.len(), quads.len());
            for q in &quads {
                let best = boxes.iter().map(|b| iou(b, q)).fold(0.0, f64::max);
                prop_assert!(best >= 0.8, "best iou {}", best);
            }
            let labeled = localize_from_map(&m, &PostprocessParams { method: ComponentMethod::Labeling, ..Default::default() }, (1.0, 1.0)).unwrap();
            prop_assert_eq!(labeled, boxes);
        }
    }
}
