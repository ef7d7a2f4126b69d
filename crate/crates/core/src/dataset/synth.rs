//! Receipt-like synthetic pages: rows of dark glyph-like strokes on a noisy
//! light background, with exact word boxes.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::QuadBox;
use crate::imaging::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDocSpec {
    pub page_width: usize,
    pub page_height: usize,
    pub margin: usize,
    pub num_lines: usize,
    pub box_height: RangeInclusive<usize>,
    pub word_width: RangeInclusive<usize>,
    pub word_gap: RangeInclusive<usize>,
    pub line_gap: RangeInclusive<usize>,
    /// Ink intensity in `[0, 1]`; lower is darker.
    pub ink: RangeInclusive<f64>,
    pub background: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticDocSpec {
    fn default() -> Self {
        Self {
            page_width: 512,
            page_height: 704,
            margin: 28,
            num_lines: 12,
            box_height: 14..=22,
            word_width: 24..=110,
            word_gap: 14..=40,
            line_gap: 12..=28,
            ink: 0.05..=0.35,
            background: 0.92,
            noise_sigma: 0.03,
            seed: 0,
        }
    }
}

impl SyntheticDocSpec {
    fn validate(&self) -> Result<()> {
        let nonempty = |r: &RangeInclusive<usize>| r.start() <= r.end();
        if !(nonempty(&self.box_height) && nonempty(&self.word_width) && nonempty(&self.word_gap) && nonempty(&self.line_gap)) {
            return Err(Error::invalid("synthetic document ranges must be non-empty"));
        }
        if *self.box_height.start() < 4 || *self.word_width.start() < 1 || *self.word_gap.start() < 1 {
            return Err(Error::invalid("boxes need height >= 4, width >= 1 and gaps >= 1"));
        }
        if !(self.ink.start() <= self.ink.end() && *self.ink.start() >= 0.0 && *self.ink.end() <= 1.0) {
            return Err(Error::invalid("ink range must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.background) || !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("background must lie in [0, 1] and noise sigma >= 0"));
        }
        let content_w = self.page_width.saturating_sub(2 * self.margin);
        // Every line reserves room for a full-width word even after the
        // ragged right edge is cut back by up to a third.
        if content_w * 2 / 3 < *self.word_width.end() {
            return Err(Error::invalid("page too narrow for the word width range"));
        }
        let worst_line = self.box_height.end() + self.line_gap.end();
        if 2 * self.margin + self.num_lines * worst_line > self.page_height {
            return Err(Error::invalid("page too small for the requested number of lines"));
        }
        Ok(())
    }
}

/// Spec of document `index` in a corpus generated from `seed`. Text size,
/// spacing, ink contrast, background and noise vary from page to page, so a
/// single page does not show the whole corpus' range of styles.
pub fn corpus_spec(seed: u64, index: u64) -> SyntheticDocSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let base = SyntheticDocSpec::default();
    let h_lo = rng.random_range(16..=28usize);
    let h_hi = h_lo + rng.random_range(2..=8usize);
    // Extents follow the text size, with floors that keep neighbouring words
    // and lines apart on a quarter-resolution map.
    let k = (h_lo + h_hi) as f64 / 36.0;
    let sized = |lo: f64, hi: f64, floor: f64| {
        let a = (lo * k).round().max(floor);
        a as usize..=((hi * k).round().max(a)) as usize
    };
    let word_width = sized(24.0, 110.0, 2.0);
    let word_width = *word_width.start()..=(*word_width.end()).min(300);
    let line_gap = sized(10.0, 26.0, 14.0);
    let content_h = base.page_height - 2 * base.margin;
    let max_lines = content_h / (h_hi + line_gap.end());
    let ink_lo = rng.random_range(0.0..0.25);
    let ink_hi = ink_lo + rng.random_range(0.05..0.3);
    SyntheticDocSpec {
        num_lines: rng.random_range(max_lines.min(6)..=max_lines.min(16)),
        box_height: h_lo..=h_hi,
        word_width,
        word_gap: sized(14.0, 40.0, 20.0),
        line_gap,
        ink: ink_lo..=ink_hi,
        background: rng.random_range(0.8..0.97),
        noise_sigma: rng.random_range(0.01..0.06),
        seed: rng.random(),
        ..base
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDoc {
    pub image: Image<u8>,
    pub boxes: Vec<QuadBox>,
}

/// Generates a grayscale page and its word boxes. The same spec (including
/// seed) always yields identical bytes.
pub fn synth_document(spec: &SyntheticDocSpec) -> Result<SyntheticDoc> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.page_width, spec.page_height);
    let mut canvas = vec![spec.background; w * h];
    let content_w = w - 2 * spec.margin;

    let mut boxes = Vec::new();
    let mut y = spec.margin;
    for _ in 0..spec.num_lines {
        let bh = rng.random_range(spec.box_height.clone());
        let mut x = spec.margin + rng.random_range(0..=content_w / 8);
        let line_end = w - spec.margin - rng.random_range(0..=content_w / 3);
        loop {
            let ww = rng.random_range(spec.word_width.clone());
            if x + ww > line_end {
                break;
            }
            let ink = rng.random_range(spec.ink.clone());
            draw_word(&mut canvas, w, (x, y, ww, bh), ink, &mut rng);
            boxes.push(QuadBox::from_rect(x as f64, y as f64, (x + ww) as f64, (y + bh) as f64)?);
            x += ww + rng.random_range(spec.word_gap.clone());
        }
        y += bh + rng.random_range(spec.line_gap.clone());
    }

    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).map_err(|_| Error::invalid("noise sigma"))?;
    let data = canvas
        .into_iter()
        .map(|v| {
            let n = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            ((v + n).clamp(0.0, 1.0) * 255.0).round() as u8
        })
        .collect();
    Ok(SyntheticDoc {
        image: Image::new(w, h, 1, data)?,
        boxes,
    })
}

struct Canvas<'a> {
    data: &'a mut [f64],
    width: usize,
    clip: (usize, usize, usize, usize),
    ink: f64,
}

impl Canvas<'_> {
    fn put(&mut self, x: isize, y: isize) {
        let (x0, y0, x1, y1) = self.clip;
        if x >= x0 as isize && x < x1 as isize && y >= y0 as isize && y < y1 as isize {
            let cell = &mut self.data[y as usize * self.width + x as usize];
            *cell = cell.min(self.ink);
        }
    }

    fn fill(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        for y in y0.round() as isize..y1.round() as isize {
            for x in x0.round() as isize..x1.round() as isize {
                self.put(x, y);
            }
        }
    }

    fn ellipse(&mut self, cx: f64, cy: f64, rx: f64, ry: f64, stroke: f64) {
        let (rx, ry) = (rx.max(1.0), ry.max(1.0));
        for y in (cy - ry - 1.0).floor() as isize..=(cy + ry + 1.0).ceil() as isize {
            for x in (cx - rx - 1.0).floor() as isize..=(cx + rx + 1.0).ceil() as isize {
                let (dx, dy) = ((x as f64 + 0.5 - cx) / rx, (y as f64 + 0.5 - cy) / ry);
                let r = (dx * dx + dy * dy).sqrt();
                if (r - 1.0).abs() * rx.min(ry) <= stroke / 2.0 {
                    self.put(x, y);
                }
            }
        }
    }
}

/// Fills a word box with glyph-like strokes. The first and last glyph touch
/// the box's left and right edges and at least one stroke spans the full
/// height, so the box is tight around the ink.
fn draw_word(data: &mut [f64], width: usize, (x, y, w, h): (usize, usize, usize, usize), ink: f64, rng: &mut ChaCha8Rng) {
    let mut c = Canvas {
        data,
        width,
        clip: (x, y, x + w, y + h),
        ink,
    };
    let hf = h as f64;
    let stroke = (hf / 9.0).round().max(1.5);
    let (top, bottom) = (y as f64, (y + h) as f64);
    let x_height_top = top + 0.35 * hf;
    let x_end = (x + w) as f64;
    let mut gx = x as f64;
    while gx < x_end {
        let cw = (hf * rng.random_range(0.45..0.75)).min(x_end - gx).max(stroke);
        let last = gx + cw + 2.0 >= x_end;
        let kind = rng.random_range(0..6);
        match kind {
            0 => c.fill(gx, top, gx + stroke, bottom),
            1 => c.fill(gx, x_height_top, gx + stroke, bottom),
            2 => c.ellipse(
                gx + cw / 2.0,
                (x_height_top + bottom) / 2.0,
                cw / 2.0 - stroke / 2.0,
                (bottom - x_height_top) / 2.0 - stroke / 2.0,
                stroke,
            ),
            3 => {
                c.fill(gx, x_height_top, gx + stroke, bottom);
                c.fill(gx + cw - stroke, x_height_top, gx + cw, bottom);
                c.fill(gx, x_height_top, gx + cw, x_height_top + stroke);
            }
            4 => {
                c.fill(gx, top, gx + stroke, bottom);
                c.ellipse(
                    gx + cw / 2.0,
                    (x_height_top + bottom) / 2.0,
                    cw / 2.0 - stroke / 2.0,
                    (bottom - x_height_top) / 2.0 - stroke / 2.0,
                    stroke,
                );
            }
            _ => {
                let mid = gx + cw / 2.0;
                c.fill(mid - stroke / 2.0, top, mid + stroke / 2.0, bottom);
                c.fill(gx, x_height_top, gx + cw, x_height_top + stroke);
            }
        }
        gx += cw + rng.random_range(1.0..3.0);
        if last {
            break;
        }
    }
    // Close the word with a full-height stroke on its right edge; a tall
    // glyph clipped at the edge may have left no ink in the top row.
    c.fill(x_end - stroke, top, x_end, bottom);
}
