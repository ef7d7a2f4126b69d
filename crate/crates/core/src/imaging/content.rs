use crate::imaging::{Image, Sample};

/// Fraction of the baseline-corrected profile maximum that marks content.
pub const CONTENT_PROFILE_FRACTION: f64 = 0.02;

/// Pixel bounds `[x0, x1) x [y0, y1)` of the inked part of a page.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContentRegion {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl ContentRegion {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn short_axis(&self) -> usize {
        self.width().min(self.height())
    }
}

/// Finds the content rectangle from row and column sums of the inverted
/// intensity (text is dark on light paper). Each profile has its minimum
/// subtracted so that uniform paper tone or noise does not count as content;
/// the region then spans the first to last index above
/// [`CONTENT_PROFILE_FRACTION`] of the profile peak. Falls back to the full
/// extent along any axis without signal.
pub fn detect_content_region<T: Sample>(img: &Image<T>) -> ContentRegion {
    let luma = img.luma();
    let (w, h) = (luma.width(), luma.height());
    let mut cols = alloc::vec![0.0f64; w];
    let mut rows = alloc::vec![0.0f64; h];
    for y in 0..h {
        for x in 0..w {
            let ink = 1.0 - luma.get(x, y);
            cols[x] += ink;
            rows[y] += ink;
        }
    }
    let (x0, x1) = signal_edges(&cols);
    let (y0, y1) = signal_edges(&rows);
    ContentRegion { x0, x1, y0, y1 }
}

fn signal_edges(profile: &[f64]) -> (usize, usize) {
    let base = profile.iter().copied().fold(f64::INFINITY, f64::min);
    let peak = profile.iter().map(|v| v - base).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return (0, profile.len());
    }
    let thr = CONTENT_PROFILE_FRACTION * peak;
    let first = profile.iter().position(|v| v - base > thr);
    let last = profile.iter().rposition(|v| v - base > thr);
    match (first, last) {
        (Some(a), Some(b)) => (a, b + 1),
        _ => (0, profile.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_page_falls_back_to_full_image() {
        let img = Image::<u8>::filled(50, 30, 1, 255).unwrap();
        assert_eq!(detect_content_region(&img), ContentRegion { x0: 0, x1: 50, y0: 0, y1: 30 });
    }

    #[test]
    fn finds_black_rectangle() {
        let mut img = Image::<u8>::filled(120, 60, 1, 255).unwrap();
        for y in 10..30 {
            for x in 40..80 {
                img.set(x, y, 0, 0);
            }
        }
        let r = detect_content_region(&img);
        assert!(r.x0.abs_diff(40) <= 1 && r.x1.abs_diff(80) <= 1);
        assert!(r.y0.abs_diff(10) <= 1 && r.y1.abs_diff(30) <= 1);
    }

    #[test]
    fn frame_touching_borders_is_full_image() {
        let mut img = Image::<u8>::filled(40, 25, 3, 255).unwrap();
        for x in 0..40 {
            for c in 0..3 {
                img.set(x, 0, c, 0);
                img.set(x, 24, c, 0);
            }
        }
        for y in 0..25 {
            for c in 0..3 {
                img.set(0, y, c, 0);
                img.set(39, y, c, 0);
            }
        }
        assert_eq!(detect_content_region(&img), ContentRegion { x0: 0, x1: 40, y0: 0, y1: 25 });
    }
}
