//! Raster images, pre-processing, crop augmentation and map-to-box
//! post-processing.

mod augment;
mod components;
mod content;
mod localize;
mod morphology;
mod preprocess;
mod resize;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use crate::error::{Error, Result};
use crate::maps::Grid;

pub use augment::{random_crop_pair, random_crop_pair_with, CropPair};
pub use components::{border_following_rects, labeling_rects, PixelRect};
pub use content::{detect_content_region, ContentRegion, CONTENT_PROFILE_FRACTION};
pub use localize::{localize_from_map, ComponentMethod, PostprocessParams};
pub use morphology::{binarize, dilate, Mask};
pub use preprocess::{preprocess, window_intensities, PreprocessParams, Preprocessed};
pub use resize::{bicubic_resize, catmull_rom_weight, resample_bicubic};

/// A pixel sample type.
pub trait Sample: Copy + Default + PartialEq + Debug + Send + Sync + 'static {
    /// Value of a fully bright sample.
    const WHITE: Self;
    fn to_f64(self) -> f64;
    /// Rounds and clamps into the representable range.
    fn from_f64(v: f64) -> Self;
}

impl Sample for u8 {
    const WHITE: Self = 255;

    fn to_f64(self) -> f64 {
        f64::from(self)
    }

    fn from_f64(v: f64) -> Self {
        if v.is_nan() {
            0
        } else {
            num_traits::Float::round(v.clamp(0.0, 255.0)) as u8
        }
    }
}

impl Sample for f32 {
    const WHITE: Self = 1.0;

    fn to_f64(self) -> f64 {
        f64::from(self)
    }

    fn from_f64(v: f64) -> Self {
        if v.is_nan() {
            0.0
        } else {
            v.clamp(0.0, 1.0) as f32
        }
    }
}

/// Interleaved `height x width x channels` image, channels 1 (gray) or 3 (RGB).
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Sample> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be >= 1"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid("images have 1 or 3 channels"));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid("image data length does not match dimensions"));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
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

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: T) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Rec. 601 luma normalized to `[0, 1]` of the sample type's range.
    pub fn luma(&self) -> Grid<f64> {
        let white = T::WHITE.to_f64();
        let mut out = Vec::with_capacity(self.width * self.height);
        for px in self.data.chunks_exact(self.channels) {
            let v = if self.channels == 1 {
                px[0].to_f64()
            } else {
                0.299 * px[0].to_f64() + 0.587 * px[1].to_f64() + 0.114 * px[2].to_f64()
            };
            out.push(v / white);
        }
        Grid::from_vec(self.width, self.height, out).expect("luma dimensions")
    }

    /// Channel `c` as a float grid in the sample's native range.
    pub fn channel(&self, c: usize) -> Grid<f64> {
        let data = self.data.iter().skip(c).step_by(self.channels).map(|s| s.to_f64()).collect();
        Grid::from_vec(self.width, self.height, data).expect("channel dimensions")
    }

    pub fn from_channels(channels: &[Grid<f64>]) -> Result<Self> {
        let first = channels.first().ok_or_else(|| Error::invalid("no channels"))?;
        let (w, h) = (first.width(), first.height());
        if channels.iter().any(|g| g.width() != w || g.height() != h) {
            return Err(Error::invalid("channel dimensions differ"));
        }
        let mut data = Vec::with_capacity(w * h * channels.len());
        for i in 0..w * h {
            for g in channels {
                data.push(T::from_f64(g.data()[i]));
            }
        }
        Self::new(w, h, channels.len(), data)
    }

    /// Copies the `w x h` window at `(x0, y0)`; areas outside the image are white.
    pub fn crop_padded(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        let mut out = Self::filled(w, h, self.channels, T::WHITE)?;
        let c = self.channels;
        for y in 0..h.min(self.height.saturating_sub(y0)) {
            let src_row = ((y0 + y) * self.width + x0) * c;
            let n = w.min(self.width.saturating_sub(x0)) * c;
            out.data[y * w * c..y * w * c + n].copy_from_slice(&self.data[src_row..src_row + n]);
        }
        Ok(out)
    }

    /// Pads right and bottom with white so both sides are multiples of `m`.
    pub fn pad_to_multiple(&self, m: usize) -> Result<Self> {
        let w = self.width.div_ceil(m) * m;
        let h = self.height.div_ceil(m) * m;
        if (w, h) == (self.width, self.height) {
            return Ok(self.clone());
        }
        self.crop_padded(0, 0, w, h)
    }

    pub fn to_rgb(&self) -> Self {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    pub fn to_gray(&self) -> Image<T> {
        if self.channels == 1 {
            return self.clone();
        }
        let white = T::WHITE.to_f64();
        let luma = self.luma();
        let data = luma.data().iter().map(|&v| T::from_f64(v * white)).collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }
}

impl Image<u8> {
    /// Samples rescaled to `[0, 1]`.
    pub fn to_unit_f32(&self) -> Image<f32> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f32::from(v) / 255.0).collect(),
        }
    }
}

impl Image<f32> {
    pub fn to_u8(&self) -> Image<u8> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| u8::from_f64(f64::from(v) * 255.0)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_pads_with_white() {
        let img = Image::<u8>::filled(3, 2, 1, 7).unwrap();
        let c = img.crop_padded(1, 1, 4, 3).unwrap();
        assert_eq!(c.data(), &[7, 7, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255]);
        let p = img.pad_to_multiple(4).unwrap();
        assert_eq!((p.width(), p.height()), (4, 4));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Image::<u8>::new(0, 1, 1, vec![]).is_err());
        assert!(Image::<u8>::new(1, 1, 2, vec![0, 0]).is_err());
        assert!(Image::<u8>::new(2, 1, 1, vec![0]).is_err());
    }
}
