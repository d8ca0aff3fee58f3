//! Planar geometry on the L∞ metric.

use serde::{Deserialize, Serialize};

/// Slack used when a lattice coordinate is compared against a box side.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn linf(self, other: Point) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    /// Counterclockwise angle of `self - centre` in [0, 2π).
    pub fn angle_from(self, centre: Point) -> f64 {
        let a = (self.y - centre.y).atan2(self.x - centre.x);
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }
}

/// Closed axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Rect { xmin, xmax, ymin, ymax }
    }

    /// The closed box Λ_r(c) = c + [-r, r]².
    pub fn square(c: Point, r: f64) -> Self {
        Rect::new(c.x - r, c.x + r, c.y - r, c.y + r)
    }

    /// Degenerate rectangle at a point, the seed of a bounding box.
    pub fn point(p: Point) -> Self {
        Rect::new(p.x, p.x, p.y, p.y)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    /// L∞ diameter of the rectangle.
    pub fn diameter(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn centre(&self) -> Point {
        Point::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin - GEOM_EPS
            && p.x <= self.xmax + GEOM_EPS
            && p.y >= self.ymin - GEOM_EPS
            && p.y <= self.ymax + GEOM_EPS
    }

    /// Membership in the half-open box `[xmin, xmax) × [ymin, ymax)`.
    #[inline]
    pub fn contains_half_open(&self, p: Point) -> bool {
        p.x >= self.xmin - GEOM_EPS
            && p.x < self.xmax - GEOM_EPS
            && p.y >= self.ymin - GEOM_EPS
            && p.y < self.ymax - GEOM_EPS
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.xmin >= self.xmin - GEOM_EPS
            && other.xmax <= self.xmax + GEOM_EPS
            && other.ymin >= self.ymin - GEOM_EPS
            && other.ymax <= self.ymax + GEOM_EPS
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.xmin <= other.xmax + GEOM_EPS
            && other.xmin <= self.xmax + GEOM_EPS
            && self.ymin <= other.ymax + GEOM_EPS
            && other.ymin <= self.ymax + GEOM_EPS
    }

    pub fn expand(&mut self, p: Point) {
        self.xmin = self.xmin.min(p.x);
        self.xmax = self.xmax.max(p.x);
        self.ymin = self.ymin.min(p.y);
        self.ymax = self.ymax.max(p.y);
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect::new(
            self.xmin.min(other.xmin),
            self.xmax.max(other.xmax),
            self.ymin.min(other.ymin),
            self.ymax.max(other.ymax),
        )
    }

    /// Largest L∞ distance from `c` to a point of the rectangle.
    #[inline]
    pub fn reach_from(&self, c: Point) -> f64 {
        (self.xmax - c.x)
            .max(c.x - self.xmin)
            .max(self.ymax - c.y)
            .max(c.y - self.ymin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_open_excludes_upper_sides() {
        let r = Rect::square(Point::ORIGIN, 1.0);
        assert!(r.contains_half_open(Point::new(-1.0, -1.0)));
        assert!(!r.contains_half_open(Point::new(1.0, 0.0)));
        assert!(!r.contains_half_open(Point::new(0.0, 1.0)));
        assert!(r.contains(Point::new(1.0, 1.0)));
    }

    #[test]
    fn reach_is_linf_extent() {
        let r = Rect::new(-1.0, 3.0, 0.0, 0.5);
        assert_eq!(r.reach_from(Point::ORIGIN), 3.0);
        assert_eq!(r.diameter(), 4.0);
    }
}
