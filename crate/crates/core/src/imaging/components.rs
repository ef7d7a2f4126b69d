//! Bounding rectangles of 8-connected foreground components, by flood-fill
//! labeling and by Suzuki-Abe border following.

use alloc::vec;
use alloc::vec::Vec;

use crate::imaging::Mask;

/// Pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PixelRect {
    pub y0: usize,
    pub x0: usize,
    pub y1: usize,
    pub x1: usize,
}

impl PixelRect {
    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn point(x: usize, y: usize) -> Self {
        Self {
            y0: y,
            x0: x,
            y1: y + 1,
            x1: x + 1,
        }
    }

    fn include(&mut self, x: usize, y: usize) {
        self.x0 = self.x0.min(x);
        self.y0 = self.y0.min(y);
        self.x1 = self.x1.max(x + 1);
        self.y1 = self.y1.max(y + 1);
    }
}

const NEIGHBOURS_8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Reference extraction: flood fill over 8-connected foreground pixels.
/// Rectangles are returned sorted.
pub fn labeling_rects(mask: &Mask) -> Vec<PixelRect> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut rects = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            if !mask.get(sx, sy) || seen[sy * w + sx] {
                continue;
            }
            let mut rect = PixelRect::point(sx, sy);
            seen[sy * w + sx] = true;
            stack.push((sx, sy));
            while let Some((x, y)) = stack.pop() {
                rect.include(x, y);
                for (dx, dy) in NEIGHBOURS_8 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if mask.get(nx, ny) && !seen[ny * w + nx] {
                        seen[ny * w + nx] = true;
                        stack.push((nx, ny));
                    }
                }
            }
            rects.push(rect);
        }
    }
    rects.sort_unstable();
    rects
}

/// Clockwise on screen (y down), starting east.
const RING: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

fn ring_index(dx: isize, dy: isize) -> usize {
    RING.iter().position(|&d| d == (dx, dy)).expect("neighbour offset")
}

/// Suzuki-Abe topological border following. Every outer border encloses
/// exactly one 8-connected component, so the rectangles of the outer borders
/// equal the component rectangles. Returned sorted.
pub fn border_following_rects(mask: &Mask) -> Vec<PixelRect> {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    // One pixel of background padding on every side.
    let pw = w + 2;
    let ph = h + 2;
    let mut f = vec![0i32; (pw * ph) as usize];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x as usize, y as usize) {
                f[((y + 1) * pw + x + 1) as usize] = 1;
            }
        }
    }
    let idx = |x: isize, y: isize| (y * pw + x) as usize;

    let mut nbd = 1i32;
    let mut rects = Vec::new();
    for i in 1..ph - 1 {
        for j in 1..pw - 1 {
            let v = f[idx(j, i)];
            if v == 0 {
                continue;
            }
            let outer = v == 1 && f[idx(j - 1, i)] == 0;
            let hole = !outer && v >= 1 && f[idx(j + 1, i)] == 0;
            if !(outer || hole) {
                continue;
            }
            nbd += 1;
            let from = if outer { (j - 1, i) } else { (j + 1, i) };
            let mut rect = PixelRect::point((j - 1) as usize, (i - 1) as usize);
            trace_border(&mut f, pw, (j, i), from, nbd, &mut |x, y| rect.include((x - 1) as usize, (y - 1) as usize));
            if outer {
                rects.push(rect);
            }
        }
    }
    rects.sort_unstable();
    rects
}

fn trace_border(f: &mut [i32], pw: isize, start: (isize, isize), from: (isize, isize), nbd: i32, visit: &mut impl FnMut(isize, isize)) {
    let idx = |(x, y): (isize, isize)| (y * pw + x) as usize;

    // Clockwise search around the start pixel, beginning at `from`.
    let first_dir = ring_index(from.0 - start.0, from.1 - start.1);
    let mut found = None;
    for k in 0..8 {
        let (dx, dy) = RING[(first_dir + k) % 8];
        let p = (start.0 + dx, start.1 + dy);
        if f[idx(p)] != 0 {
            found = Some(p);
            break;
        }
    }
    let Some(p1) = found else {
        f[idx(start)] = -nbd;
        return;
    };

    let mut p2 = p1;
    let mut p3 = start;
    loop {
        visit(p3.0, p3.1);
        // Counter-clockwise search around p3, starting just after p2.
        let back = ring_index(p2.0 - p3.0, p2.1 - p3.1);
        let mut east_zero_examined = false;
        let mut p4 = p3;
        for k in 1..=8 {
            let dir = (back + 8 - k) % 8;
            let (dx, dy) = RING[dir];
            let q = (p3.0 + dx, p3.1 + dy);
            if f[idx(q)] != 0 {
                p4 = q;
                break;
            }
            if dir == 0 {
                east_zero_examined = true;
            }
        }
        let cell = &mut f[idx(p3)];
        if east_zero_examined {
            *cell = -nbd;
        } else if *cell == 1 {
            *cell = nbd;
        }
        if p4 == start && p3 == p1 {
            break;
        }
        p2 = p3;
        p3 = p4;
    }
}
