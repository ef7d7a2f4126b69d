//! Word boxes, rectangles and the affine maps that place Gaussian patches.

use core::fmt;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn dist(self, other: Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }
}

/// A word location as four corners in pixel coordinates (y grows downward),
/// ordered clockwise on screen starting at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadBox {
    corners: [Point; 4],
}

impl QuadBox {
    /// Builds a quad from corners given in clockwise order starting top-left.
    /// Coordinates must be finite and the polygon must enclose a positive area.
    pub fn new(corners: [Point; 4]) -> Result<Self> {
        if corners.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invalid("quad has non-finite coordinates"));
        }
        let quad = Self { corners };
        if quad.signed_area().abs() <= 0.0 {
            return Err(Error::invalid("quad has zero area"));
        }
        Ok(quad)
    }

    /// Like [`QuadBox::new`], but reorders the corners so that they run
    /// clockwise on screen starting from the corner closest to the top-left.
    pub fn normalized(corners: [Point; 4]) -> Result<Self> {
        let mut quad = Self::new(corners)?;
        if quad.signed_area() < 0.0 {
            quad.corners.swap(1, 3);
        }
        let start = (0..4)
            .min_by(|&a, &b| {
                let ka = quad.corners[a].x + quad.corners[a].y;
                let kb = quad.corners[b].x + quad.corners[b].y;
                ka.partial_cmp(&kb).unwrap_or(core::cmp::Ordering::Equal)
            })
            .unwrap_or(0);
        quad.corners.rotate_left(start);
        Ok(quad)
    }

    /// Axis-aligned rectangle `[x0, x1) x [y0, y1)` as a quad.
    pub fn from_rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new([Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)])
    }

    pub fn corners(&self) -> &[Point; 4] {
        &self.corners
    }

    /// Shoelace area; positive for clockwise-on-screen ordering.
    pub fn signed_area(&self) -> f64 {
        let c = &self.corners;
        let mut acc = 0.0;
        for i in 0..4 {
            let (a, b) = (c[i], c[(i + 1) % 4]);
            acc += a.x * b.y - b.x * a.y;
        }
        acc / 2.0
    }

    pub fn bounding_rect(&self) -> Rect {
        let mut r = Rect {
            x0: f64::INFINITY,
            y0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for p in &self.corners {
            r.x0 = r.x0.min(p.x);
            r.y0 = r.y0.min(p.y);
            r.x1 = r.x1.max(p.x);
            r.y1 = r.y1.max(p.y);
        }
        r
    }

    /// Length of the top edge (corner 1 to corner 2).
    pub fn width(&self) -> f64 {
        self.corners[0].dist(self.corners[1])
    }

    /// Length of the left edge (corner 1 to corner 4).
    pub fn height(&self) -> f64 {
        self.corners[0].dist(self.corners[3])
    }

    pub fn scaled(&self, sx: f64, sy: f64) -> Self {
        Self {
            corners: self.corners.map(|p| Point::new(p.x * sx, p.y * sy)),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            corners: self.corners.map(|p| Point::new(p.x + dx, p.y + dy)),
        }
    }
}

impl fmt::Display for QuadBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.corners.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{},{}", p.x, p.y)?;
        }
        Ok(())
    }
}

/// Axis-aligned rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        (self.x1 - self.x0).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y1 - self.y0).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn to_quad(&self) -> Result<QuadBox> {
        QuadBox::from_rect(self.x0, self.y0, self.x1, self.y1)
    }
}

/// `p -> linear * p + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    /// Row-major 2x2 matrix.
    pub linear: [[f64; 2]; 2],
    pub offset: [f64; 2],
}

impl AffineMap {
    pub fn new(linear: [[f64; 2]; 2], offset: [f64; 2]) -> Result<Self> {
        let map = Self { linear, offset };
        let det = map.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::invalid("affine map is singular"));
        }
        Ok(map)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.linear;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn apply(&self, p: Point) -> Point {
        let m = &self.linear;
        Point::new(m[0][0] * p.x + m[0][1] * p.y + self.offset[0], m[1][0] * p.x + m[1][1] * p.y + self.offset[1])
    }

    pub fn inverse(&self) -> AffineMap {
        let m = &self.linear;
        let det = self.determinant();
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let offset = [
            -(inv[0][0] * self.offset[0] + inv[0][1] * self.offset[1]),
            -(inv[1][0] * self.offset[0] + inv[1][1] * self.offset[1]),
        ];
        AffineMap { linear: inv, offset }
    }
}

/// Corner-3 residual above which the affine fit is reported as poor.
pub const AFFINE_RESIDUAL_WARN_PX: f64 = 2.0;

/// Affine map taking patch corners `(0,0)`, `(w,0)`, `(0,h)` onto quad corners
/// 1, 2 and 4. Corner 3 is implied by the other three.
pub fn affine_from_quad(quad: &QuadBox, patch_w: usize, patch_h: usize) -> Result<AffineMap> {
    if patch_w == 0 || patch_h == 0 {
        return Err(Error::invalid("patch dimensions must be >= 1"));
    }
    let [c1, c2, c3, c4] = *quad.corners();
    let (w, h) = (patch_w as f64, patch_h as f64);
    let linear = [[(c2.x - c1.x) / w, (c4.x - c1.x) / h], [(c2.y - c1.y) / w, (c4.y - c1.y) / h]];
    let map = AffineMap::new(linear, [c1.x, c1.y]).map_err(|_| Error::invalid("degenerate quad: corners 1, 2 and 4 are collinear"))?;
    let residual = map.apply(Point::new(w, h)).dist(c3);
    if residual > AFFINE_RESIDUAL_WARN_PX {
        log::warn!("affine fit misses quad corner 3 by {residual:.2} px");
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(pts: [(f64, f64); 4]) -> QuadBox {
        QuadBox::new(pts.map(|(x, y)| Point::new(x, y))).unwrap()
    }

    #[test]
    fn axis_aligned_unit_scaling() {
        let q = quad([(10., 20.), (60., 20.), (60., 40.), (10., 40.)]);
        let a = affine_from_quad(&q, 50, 20).unwrap();
        assert_eq!(a.linear, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(a.offset, [10.0, 20.0]);
        let a = affine_from_quad(&q, 25, 10).unwrap();
        assert_eq!(a.linear, [[2.0, 0.0], [0.0, 2.0]]);
        assert_eq!(a.offset, [10.0, 20.0]);
    }

    #[test]
    fn rotated_square_hits_corners() {
        let s = core::f64::consts::FRAC_1_SQRT_2 * 10.0;
        let q = quad([(50.0, 40.0), (50.0 + s, 40.0 + s), (50.0, 40.0 + 2.0 * s), (50.0 - s, 40.0 + s)]);
        let a = affine_from_quad(&q, 10, 10).unwrap();
        let c = q.corners();
        for (p, target) in [(Point::new(0., 0.), c[0]), (Point::new(10., 0.), c[1]), (Point::new(0., 10.), c[3])] {
            let m = a.apply(p);
            assert!((m.x - target.x).abs() < 1e-9 && (m.y - target.y).abs() < 1e-9);
        }
        // rotation-scale: columns orthogonal with equal norm
        let l = a.linear;
        assert!((l[0][0] * l[0][1] + l[1][0] * l[1][1]).abs() < 1e-12);
        assert!((l[0][0].hypot(l[1][0]) - l[0][1].hypot(l[1][1])).abs() < 1e-12);
    }

    #[test]
    fn collinear_quad_rejected() {
        // Nonzero shoelace area but corners 1, 2, 4 on one line.
        let q = quad([(0., 0.), (10., 0.), (5., 5.), (-10., 0.)]);
        assert!(affine_from_quad(&q, 4, 4).is_err());
        assert!(QuadBox::from_rect(0., 0., 0., 5.).is_err());
    }

    #[test]
    fn normalization_reorders_counterclockwise_input() {
        let ccw = [(10., 40.), (60., 40.), (60., 20.), (10., 20.)].map(|(x, y)| Point::new(x, y));
        let q = QuadBox::normalized(ccw).unwrap();
        assert_eq!(q, quad([(10., 20.), (60., 20.), (60., 40.), (10., 40.)]));
    }

    #[test]
    fn inverse_round_trips() {
        let a = AffineMap::new([[2.0, 0.5], [-0.3, 1.5]], [4.0, -2.0]).unwrap();
        let p = Point::new(3.25, -7.5);
        let back = a.inverse().apply(a.apply(p));
        assert!((back.x - p.x).abs() < 1e-12 && (back.y - p.y).abs() < 1e-12);
    }
}
