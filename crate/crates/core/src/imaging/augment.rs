#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{Image, Sample};
use crate::maps::{Grid, HeatMap};

/// An aligned image/map crop and where it was taken from, in image pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CropPair<T> {
    pub image: Image<T>,
    pub map: HeatMap,
    pub offset_x: usize,
    pub offset_y: usize,
}

/// Seeded wrapper around [`random_crop_pair_with`].
pub fn random_crop_pair<T: Sample>(img: &Image<T>, map: &HeatMap, crop: usize, seed: u64) -> Result<CropPair<T>> {
    random_crop_pair_with(img, map, crop, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Takes a `crop x crop` window at a uniformly random offset and the map
/// window covering the same field of view. Offsets are multiples of the map
/// stride so the map window starts on a whole map pixel. Images smaller than
/// the crop are padded with white (and the map with zeros) first.
pub fn random_crop_pair_with<T: Sample, R: Rng + ?Sized>(img: &Image<T>, map: &HeatMap, crop: usize, rng: &mut R) -> Result<CropPair<T>> {
    let stride = (1.0 / map.scale()).round();
    if stride < 1.0 || (stride * map.scale() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("map scale must be 1/k for an integer k"));
    }
    let stride = stride as usize;
    if crop == 0 || crop % stride != 0 {
        return Err(Error::invalid("crop size times map scale must be an integer"));
    }
    let map_crop = crop / stride;

    let steps = |len: usize| len.saturating_sub(crop) / stride + 1;
    let dx = rng.random_range(0..steps(img.width())) * stride;
    let dy = rng.random_range(0..steps(img.height())) * stride;

    let image = img.crop_padded(dx, dy, crop, crop)?;
    let (mx, my) = (dx / stride, dy / stride);
    let mut grid = Grid::filled(map_crop, map_crop, 0.0);
    for y in 0..map_crop.min(map.height().saturating_sub(my)) {
        for x in 0..map_crop.min(map.width().saturating_sub(mx)) {
            grid.set(x, y, map.get(mx + x, my + y));
        }
    }
    Ok(CropPair {
        image,
        map: HeatMap::new(grid, map.scale())?,
        offset_x: dx,
        offset_y: dy,
    })
}
