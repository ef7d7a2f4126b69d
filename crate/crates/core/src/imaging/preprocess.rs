use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::imaging::{detect_content_region, resample_bicubic, ContentRegion, Image, Sample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessParams {
    /// Target length of the content region's short side, in pixels.
    pub short_axis_target: usize,
    /// Fraction of the maximum intensity mapped to 0.
    pub lo_frac: f64,
    /// Fraction of the maximum intensity mapped to 255.
    pub hi_frac: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            short_axis_target: 550,
            lo_frac: 0.50,
            hi_frac: 0.9995,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub image: Image<u8>,
    /// Output pixels per input pixel along x.
    pub scale_x: f64,
    /// Output pixels per input pixel along y.
    pub scale_y: f64,
    pub content: ContentRegion,
    /// Set when the input has no intensity range to window; the image is then
    /// all zeros.
    pub degenerate: bool,
}

/// Resizes the page so the content region's short side equals
/// `short_axis_target` and windows intensities so that `lo_frac * max` maps
/// to 0 and `hi_frac * max` maps to 255.
pub fn preprocess<T: Sample>(img: &Image<T>, params: &PreprocessParams) -> Result<Preprocessed> {
    if params.short_axis_target == 0 {
        return Err(Error::invalid("short_axis_target must be >= 1"));
    }
    if !(params.lo_frac >= 0.0 && params.lo_frac < params.hi_frac) {
        return Err(Error::invalid("need 0 <= lo_frac < hi_frac"));
    }
    let content = detect_content_region(img);
    let scale = params.short_axis_target as f64 / content.short_axis() as f64;
    let new_w = ((img.width() as f64 * scale).round() as usize).max(1);
    let new_h = ((img.height() as f64 * scale).round() as usize).max(1);

    let resized: Vec<_> = (0..img.channels())
        .map(|c| resample_bicubic(&img.channel(c), new_w, new_h))
        .collect::<Result<_>>()?;
    let (windowed, degenerate) = window_intensities(&resized, params.lo_frac, params.hi_frac);
    if degenerate {
        log::warn!("constant image: intensity window is degenerate, emitting zeros");
    }
    Ok(Preprocessed {
        image: Image::from_channels(&windowed)?,
        scale_x: new_w as f64 / img.width() as f64,
        scale_y: new_h as f64 / img.height() as f64,
        content,
        degenerate,
    })
}

/// Linear intensity window onto `[0, 255]` using the maximum over all
/// channels. Returns zeros and `true` for a constant (or all-black) input.
pub fn window_intensities(channels: &[crate::maps::Grid<f64>], lo_frac: f64, hi_frac: f64) -> (Vec<crate::maps::Grid<f64>>, bool) {
    let all = || channels.iter().flat_map(|g| g.data().iter().copied());
    let max = all().fold(f64::NEG_INFINITY, f64::max);
    let min = all().fold(f64::INFINITY, f64::min);
    let (lo, hi) = (lo_frac * max, hi_frac * max);
    let degenerate = !(max > 0.0) || min == max || !(hi > lo);
    let out = channels
        .iter()
        .map(|g| {
            let mut g = g.clone();
            for v in g.data_mut() {
                *v = if degenerate { 0.0 } else { ((*v - lo) / (hi - lo) * 255.0).clamp(0.0, 255.0) };
            }
            g
        })
        .collect();
    (out, degenerate)
}
