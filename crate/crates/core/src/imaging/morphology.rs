use crate::maps::{Grid, HeatMap};

pub type Mask = Grid<bool>;

/// `true` where the map value reaches `threshold`.
pub fn binarize(map: &HeatMap, threshold: f64) -> Mask {
    let data = map.values().iter().map(|&v| v >= threshold).collect();
    Grid::from_vec(map.width(), map.height(), data).expect("same dimensions")
}

/// Dilation with a centred `kw x kh` rectangle, repeated `iterations` times.
/// Kernel sides are expected to be odd.
pub fn dilate(mask: &Mask, kw: usize, kh: usize, iterations: usize) -> Mask {
    let mut out = mask.clone();
    for _ in 0..iterations {
        out = dilate_axis(&out, kw / 2, true);
        out = dilate_axis(&out, kh / 2, false);
    }
    out
}

fn dilate_axis(mask: &Mask, reach: usize, horizontal: bool) -> Mask {
    if reach == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let mut out = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            if horizontal {
                for xx in x.saturating_sub(reach)..(x + reach + 1).min(w) {
                    out.set(xx, y, true);
                }
            } else {
                for yy in y.saturating_sub(reach)..(y + reach + 1).min(h) {
                    out.set(x, yy, true);
                }
            }
        }
    }
    out
}
