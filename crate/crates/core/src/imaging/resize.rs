use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::maps::{Grid, HeatMap};

const CATMULL_ROM_A: f64 = -0.5;

/// Cubic convolution kernel with `a = -0.5`.
pub fn catmull_rom_weight(t: f64) -> f64 {
    let a = CATMULL_ROM_A;
    let t = t.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
}

/// Half-pixel-centred source taps for every output position, edges clamped.
fn taps(src_len: usize, dst_len: usize) -> Vec<Taps> {
    let ratio = src_len as f64 / dst_len as f64;
    let last = src_len as isize - 1;
    (0..dst_len)
        .map(|i| {
            let s = (i as f64 + 0.5) * ratio - 0.5;
            let base = s.floor();
            let frac = s - base;
            let base = base as isize;
            let mut t = Taps {
                index: [0; 4],
                weight: [0.0; 4],
            };
            for k in 0..4 {
                let off = k as isize - 1;
                t.index[k] = (base + off).clamp(0, last) as usize;
                t.weight[k] = catmull_rom_weight(frac - off as f64);
            }
            t
        })
        .collect()
}

/// Separable bicubic resampling without clipping.
pub fn resample_bicubic(src: &Grid<f64>, target_w: usize, target_h: usize) -> Result<Grid<f64>> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::invalid("target dimensions must be >= 1"));
    }
    let (sw, sh) = (src.width(), src.height());
    let xt = taps(sw, target_w);
    let yt = taps(sh, target_h);

    let mut horiz = Vec::with_capacity(target_w * sh);
    for y in 0..sh {
        let row = &src.data()[y * sw..(y + 1) * sw];
        for t in &xt {
            let mut acc = 0.0;
            for k in 0..4 {
                acc += t.weight[k] * row[t.index[k]];
            }
            horiz.push(acc);
        }
    }

    let mut out = Vec::with_capacity(target_w * target_h);
    for t in &yt {
        for x in 0..target_w {
            let mut acc = 0.0;
            for k in 0..4 {
                acc += t.weight[k] * horiz[t.index[k] * target_w + x];
            }
            out.push(acc);
        }
    }
    Grid::from_vec(target_w, target_h, out)
}

/// Catmull-Rom resize of a map, clipped back into `[0, 1]`. The map scale is
/// adjusted by the horizontal resize ratio.
pub fn bicubic_resize(map: &HeatMap, target_w: usize, target_h: usize) -> Result<HeatMap> {
    let grid = resample_bicubic(map.grid(), target_w, target_h)?;
    let scale = map.scale() * target_w as f64 / map.width() as f64;
    HeatMap::from_clamped(grid, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Grid<f64> {
        let mut g = Grid::filled(w, h, 0.0);
        for y in 0..h {
            for x in 0..w {
                g.set(x, y, f(x, y));
            }
        }
        g
    }

    /// Direct 4x4 neighbourhood convolution, independent of the separable path.
    fn oracle(src: &Grid<f64>, tw: usize, th: usize) -> Grid<f64> {
        let (sw, sh) = (src.width() as f64, src.height() as f64);
        grid(tw, th, |x, y| {
            let sx = (x as f64 + 0.5) * sw / tw as f64 - 0.5;
            let sy = (y as f64 + 0.5) * sh / th as f64 - 0.5;
            let (bx, by) = (sx.floor() as i64, sy.floor() as i64);
            let mut acc = 0.0;
            for j in by - 1..=by + 2 {
                for i in bx - 1..=bx + 2 {
                    let w = catmull_rom_weight(sx - i as f64) * catmull_rom_weight(sy - j as f64);
                    let ci = i.clamp(0, src.width() as i64 - 1) as usize;
                    let cj = j.clamp(0, src.height() as i64 - 1) as usize;
                    acc += w * src.get(ci, cj);
                }
            }
            acc.clamp(0.0, 1.0)
        })
    }

    #[test]
    fn kernel_values() {
        assert_eq!(catmull_rom_weight(0.0), 1.0);
        assert_eq!(catmull_rom_weight(1.0), 0.0);
        assert_eq!(catmull_rom_weight(2.0), 0.0);
        assert!((catmull_rom_weight(0.5) - 0.5625).abs() < 1e-15);
        assert!((catmull_rom_weight(1.5) + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn same_size_is_identity() {
        let g = grid(7, 5, |x, y| ((x * 3 + y * 5) % 11) as f64 / 10.0);
        let m = HeatMap::new(g.clone(), 0.25).unwrap();
        let r = bicubic_resize(&m, 7, 5).unwrap();
        for (a, b) in r.values().iter().zip(g.data()) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert_eq!(r.scale(), 0.25);
    }

    #[test]
    fn constants_are_preserved() {
        let m = HeatMap::new(Grid::filled(6, 4, 0.7), 1.0).unwrap();
        for (w, h) in [(1, 1), (3, 9), (13, 8), (24, 16)] {
            let r = bicubic_resize(&m, w, h).unwrap();
            assert!(r.values().iter().all(|v| (v - 0.7).abs() <= 1e-6));
        }
    }

    #[test]
    fn upscaled_bright_pixel_matches_oracle() {
        let src = grid(8, 8, |x, y| if (x, y) == (3, 5) { 1.0 } else { 0.0 });
        let m = HeatMap::new(src.clone(), 0.25).unwrap();
        let r = bicubic_resize(&m, 16, 16).unwrap();
        let o = oracle(&src, 16, 16);
        let max_err = r.values().iter().zip(o.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max_err <= 1e-5, "max |delta| {max_err}");
        // Peak lands on the 2x2 block covering source pixel (3, 5).
        let best = r.values().iter().copied().fold(0.0, f64::max);
        let at = r.values().iter().position(|&v| v == best).unwrap();
        let (px, py) = (at % 16, at / 16);
        assert!((6..=7).contains(&px) && (10..=11).contains(&py));
        assert_eq!(r.scale(), 0.5);
    }

    #[test]
    fn zero_target_rejected() {
        let m = HeatMap::zeros(4, 4, 1.0).unwrap();
        assert!(bicubic_resize(&m, 0, 3).is_err());
    }

    proptest! {
        #[test]
        fn commutes_with_transpose(
            w in 1usize..9, h in 1usize..9, tw in 1usize..20, th in 1usize..20,
            seed in proptest::collection::vec(0f64..1.0, 81),
        ) {
            let g = grid(w, h, |x, y| seed[y * 9 + x]);
            let a = resample_bicubic(&g, tw, th).unwrap().transpose();
            let b = resample_bicubic(&g.transpose(), th, tw).unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn matches_direct_oracle(
            w in 1usize..9, h in 1usize..9, tw in 1usize..20, th in 1usize..20,
            seed in proptest::collection::vec(0f64..1.0, 81),
        ) {
            let g = grid(w, h, |x, y| seed[y * 9 + x]);
            let r = bicubic_resize(&HeatMap::new(g.clone(), 1.0).unwrap(), tw, th).unwrap();
            let o = oracle(&g, tw, th);
            for (x, y) in r.values().iter().zip(o.data()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}
